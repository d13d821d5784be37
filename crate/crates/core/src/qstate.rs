//! Exact finite-dimensional state engine.
//!
//! States live on a labelled tensor basis with site-major ordering (site 0 is
//! the most significant index). Qubit sites are canonically expressed in the
//! x̃ basis, index 0 = `x+` (x̃ = +1) and index 1 = `x-` (x̃ = −1). The ỹ basis
//! is reached only through [`basis_change_xy`], which uses the real symmetric
//! map
//!
//! ```text
//! |ỹ = ±1⟩ = (|x̃ = +1⟩ ± |x̃ = −1⟩) / √2
//! ```
//!
//! with no extra phases. The same matrix converts coefficients in either
//! direction, so the map is an involution.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

pub const EXACT_TOL: f64 = 1e-12;
pub const INEQUALITY_SLACK: f64 = 1e-10;

const X_LABELS: [&str; 2] = ["x+", "x-"];
const Y_LABELS: [&str; 2] = ["y+", "y-"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteBasis {
    X,
    Y,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateVector {
    dims: Vec<usize>,
    amplitudes: Vec<Complex64>,
    basis_labels: Vec<Vec<String>>,
}

impl StateVector {
    /// Builds a state, checking shape and normalization.
    pub fn new(
        dims: Vec<usize>,
        amplitudes: Vec<Complex64>,
        basis_labels: Vec<Vec<String>>,
    ) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: amplitudes.len(),
            });
        }
        if basis_labels.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: basis_labels.len(),
            });
        }
        for (d, labels) in dims.iter().zip(&basis_labels) {
            if labels.len() != *d {
                return Err(Error::DimensionMismatch {
                    expected: *d,
                    got: labels.len(),
                });
            }
        }
        let norm = norm_sqr(&amplitudes);
        if (norm - 1.0).abs() > EXACT_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            dims,
            amplitudes,
            basis_labels,
        })
    }

    /// `n` qubits in the x̃ basis; amplitudes are normalized here.
    pub fn qubits(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = norm_sqr(&amplitudes).sqrt();
        if norm == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / norm).collect();
        let labels = (0..n).map(|_| x_labels()).collect();
        Self::new(vec![2; n], amplitudes, labels)
    }

    /// Single-site state with arbitrary labels; amplitudes are normalized here.
    pub fn single(labels: &[&str], amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = norm_sqr(&amplitudes).sqrt();
        if norm == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        Self::new(
            vec![labels.len()],
            amplitudes.into_iter().map(|a| a / norm).collect(),
            vec![labels.iter().map(|s| s.to_string()).collect()],
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn basis_labels(&self) -> &[Vec<String>] {
        &self.basis_labels
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn site_basis(&self, site: usize) -> SiteBasis {
        let labels = &self.basis_labels[site];
        if labels == &x_labels() {
            SiteBasis::X
        } else if labels == &y_labels() {
            SiteBasis::Y
        } else {
            SiteBasis::Other
        }
    }

    /// Flat index of a multi-index (one entry per site).
    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&digit, &dim)| acc * dim + digit)
    }

    /// Amplitude of the basis state named by one label per site, e.g. `["x-", "x+", "x+"]`.
    pub fn amplitude(&self, labels: &[&str]) -> Option<Complex64> {
        if labels.len() != self.dims.len() {
            return None;
        }
        let digits: Option<Vec<usize>> = labels
            .iter()
            .zip(&self.basis_labels)
            .map(|(l, site)| site.iter().position(|s| s == l))
            .collect();
        digits.map(|d| self.amplitudes[self.index_of(&d)])
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.dims.len() {
            return Err(Error::SiteOutOfRange {
                site,
                n_sites: self.dims.len(),
            });
        }
        Ok(())
    }

    fn check_qubit(&self, site: usize) -> Result<()> {
        self.check_site(site)?;
        if self.dims[site] != 2 {
            return Err(Error::NotQubit {
                site,
                dim: self.dims[site],
            });
        }
        Ok(())
    }

    /// Applies a `d×d` matrix (row-major) to one site.
    fn apply_site(&self, site: usize, matrix: &[Complex64]) -> Vec<Complex64> {
        apply_site(&self.dims, &self.amplitudes, site, matrix)
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }
}

fn x_labels() -> Vec<String> {
    X_LABELS.iter().map(|s| s.to_string()).collect()
}

fn y_labels() -> Vec<String> {
    Y_LABELS.iter().map(|s| s.to_string()).collect()
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn apply_site(
    dims: &[usize],
    amps: &[Complex64],
    site: usize,
    matrix: &[Complex64],
) -> Vec<Complex64> {
    let d = dims[site];
    let inner_stride: usize = dims[site + 1..].iter().product();
    let outer = amps.len() / (d * inner_stride);
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for o in 0..outer {
        for i in 0..inner_stride {
            let base = o * d * inner_stride + i;
            for row in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for col in 0..d {
                    acc += matrix[row * d + col] * amps[base + col * inner_stride];
                }
                out[base + row * inner_stride] = acc;
            }
        }
    }
    out
}

fn hadamard() -> [Complex64; 4] {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [h, h, h, -h]
}

/// Re-expresses one qubit site in the other dichotomic basis (x̃ ↔ ỹ).
pub fn basis_change_xy(state: &StateVector, site: usize) -> Result<StateVector> {
    state.check_qubit(site)?;
    let amplitudes = state.apply_site(site, &hadamard());
    let mut basis_labels = state.basis_labels.clone();
    basis_labels[site] = match state.site_basis(site) {
        SiteBasis::X => y_labels(),
        SiteBasis::Y => x_labels(),
        SiteBasis::Other => basis_labels[site].clone(),
    };
    Ok(StateVector {
        dims: state.dims.clone(),
        amplitudes,
        basis_labels,
    })
}

/// The three-qubit GHZ state in the x̃ basis:
/// `½(|−++⟩ + |+−+⟩ + |++−⟩ − |−−−⟩)`.
pub fn ghz() -> StateVector {
    let mut amps = vec![Complex64::new(0.0, 0.0); 8];
    // digit 0 = x+, digit 1 = x-
    amps[0b100] = Complex64::new(0.5, 0.0);
    amps[0b010] = Complex64::new(0.5, 0.0);
    amps[0b001] = Complex64::new(0.5, 0.0);
    amps[0b111] = Complex64::new(-0.5, 0.0);
    StateVector {
        dims: vec![2; 3],
        amplitudes: amps,
        basis_labels: (0..3).map(|_| x_labels()).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ObservableKind {
    XTilde,
    YTilde,
}

/// A ±1-valued x̃ or ỹ observable acting on a single qubit site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DichotomicObservable {
    pub site: usize,
    pub kind: ObservableKind,
}

impl DichotomicObservable {
    pub fn x(site: usize) -> Self {
        Self {
            site,
            kind: ObservableKind::XTilde,
        }
    }

    pub fn y(site: usize) -> Self {
        Self {
            site,
            kind: ObservableKind::YTilde,
        }
    }

    /// 2×2 matrix of the observable in the given site basis.
    ///
    /// In the x̃ basis x̃ = diag(1, −1) and ỹ = [[0, 1], [1, 0]]; in the ỹ basis
    /// the roles swap.
    pub fn site_matrix(&self, basis: SiteBasis) -> Result<[Complex64; 4]> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let diag = [one, zero, zero, -one];
        let flip = [zero, one, one, zero];
        match (basis, self.kind) {
            (SiteBasis::X, ObservableKind::XTilde) | (SiteBasis::Y, ObservableKind::YTilde) => {
                Ok(diag)
            }
            (SiteBasis::X, ObservableKind::YTilde) | (SiteBasis::Y, ObservableKind::XTilde) => {
                Ok(flip)
            }
            (SiteBasis::Other, _) => Err(Error::InvalidParameter(format!(
                "site {} is not in the x̃ or ỹ basis",
                self.site
            ))),
        }
    }

    /// Full-space operator for a state of the given shape.
    pub fn to_operator(&self, state: &StateVector) -> Result<HermitianOperator> {
        state.check_qubit(self.site)?;
        let m = self.site_matrix(state.site_basis(self.site))?;
        let n = state.len();
        let mut matrix = vec![Complex64::new(0.0, 0.0); n * n];
        for col in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[col] = Complex64::new(1.0, 0.0);
            let image = apply_site(&state.dims, &e, self.site, &m);
            for (row, v) in image.into_iter().enumerate() {
                matrix[row * n + col] = v;
            }
        }
        HermitianOperator::new(n, matrix)
    }
}

/// Square complex matrix, row-major, checked Hermitian on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    matrix: Vec<Complex64>,
}

impl HermitianOperator {
    pub fn new(dim: usize, matrix: Vec<Complex64>) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        let mut dev: f64 = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                dev = dev.max((matrix[r * dim + c] - matrix[c * dim + r].conj()).norm());
            }
        }
        if dev > EXACT_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { dim, matrix })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let matrix = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| Complex64::new(v, 0.0)))
            .collect();
        Self::new(dim, matrix)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|r| {
                self.matrix[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect()
    }

    pub fn expectation(&self, v: &[Complex64]) -> Complex64 {
        inner(v, &self.apply(v))
    }
}

/// `⟨ψ| Π_k O_k |ψ⟩` for one dichotomic observable per listed site.
pub fn parity_expectation(state: &StateVector, obs: &[DichotomicObservable]) -> Result<f64> {
    let mut seen = vec![false; state.n_sites()];
    let mut image = state.amplitudes.clone();
    for o in obs {
        state.check_qubit(o.site)?;
        if std::mem::replace(&mut seen[o.site], true) {
            return Err(Error::DuplicateSite(o.site));
        }
        let m = o.site_matrix(state.site_basis(o.site))?;
        image = apply_site(&state.dims, &image, o.site, &m);
    }
    Ok(inner(&state.amplitudes, &image).re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobertsonBound {
    /// ΔA·ΔB
    pub lhs: f64,
    /// |⟨[A, B]⟩| / 2
    pub rhs: f64,
}

impl RobertsonBound {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs - INEQUALITY_SLACK
    }
}

pub fn robertson_bound(
    state: &StateVector,
    a: &HermitianOperator,
    b: &HermitianOperator,
) -> Result<RobertsonBound> {
    let n = state.len();
    for op in [a, b] {
        if op.dim != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: op.dim,
            });
        }
    }
    let psi = &state.amplitudes;
    let spread = |op: &HermitianOperator| {
        let image = op.apply(psi);
        let mean = inner(psi, &image).re;
        let mean_sq = norm_sqr(&image);
        (mean_sq - mean * mean).max(0.0).sqrt()
    };
    let a_psi = a.apply(psi);
    let b_psi = b.apply(psi);
    // ⟨ψ|AB|ψ⟩ − ⟨ψ|BA|ψ⟩ = ⟨Aψ|Bψ⟩ − ⟨Bψ|Aψ⟩
    let ab = inner(&a_psi, &b_psi);
    let commutator = ab - ab.conj();
    Ok(RobertsonBound {
        lhs: spread(a) * spread(b),
        rhs: commutator.norm() / 2.0,
    })
}

/// One parity relation among local hidden values: the product of the listed
/// variables must equal `sign`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityConstraint {
    pub name: &'static str,
    pub factors: [(usize, ObservableKind); 3],
    pub sign: i8,
}

/// The four GHZ relations: x̃x̃x̃ = −1 and the three x̃ỹỹ permutations = +1.
pub fn ghz_constraints() -> [ParityConstraint; 4] {
    use ObservableKind::{XTilde as X, YTilde as Y};
    [
        ParityConstraint {
            name: "xxx",
            factors: [(0, X), (1, X), (2, X)],
            sign: -1,
        },
        ParityConstraint {
            name: "xyy",
            factors: [(0, X), (1, Y), (2, Y)],
            sign: 1,
        },
        ParityConstraint {
            name: "yxy",
            factors: [(0, Y), (1, X), (2, Y)],
            sign: 1,
        },
        ParityConstraint {
            name: "yyx",
            factors: [(0, Y), (1, Y), (2, X)],
            sign: 1,
        },
    ]
}

/// A predetermined ±1 value for x̃ and ỹ at each of the three sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HiddenAssignment {
    pub x: [i8; 3],
    pub y: [i8; 3],
}

impl HiddenAssignment {
    /// Decodes bits `(x̃_A, x̃_B, x̃_C, ỹ_A, ỹ_B, ỹ_C)` from the low six bits, 1 ↦ −1.
    pub fn from_bits(bits: u8) -> Self {
        let v = |k: u8| if bits >> k & 1 == 1 { -1 } else { 1 };
        Self {
            x: [v(5), v(4), v(3)],
            y: [v(2), v(1), v(0)],
        }
    }

    pub fn value(&self, site: usize, kind: ObservableKind) -> i8 {
        match kind {
            ObservableKind::XTilde => self.x[site],
            ObservableKind::YTilde => self.y[site],
        }
    }

    pub fn product(&self, c: &ParityConstraint) -> i8 {
        c.factors.iter().map(|&(s, k)| self.value(s, k)).product()
    }

    pub fn satisfies(&self, c: &ParityConstraint) -> bool {
        self.product(c) == c.sign
    }
}

/// Counts the 64 local value assignments that satisfy every given relation.
pub fn hv_search_with(constraints: &[ParityConstraint]) -> usize {
    (0u8..64)
        .map(HiddenAssignment::from_bits)
        .filter(|a| constraints.iter().all(|c| a.satisfies(c)))
        .count()
}

/// Exhaustive search for local hidden values reproducing all four GHZ relations.
pub fn hv_search() -> usize {
    hv_search_with(&ghz_constraints())
}

/// Born-rule measurement of one dichotomic observable.
///
/// Returns the outcome and the renormalized post-measurement state.
pub fn projective_measure<R: Rng + ?Sized>(
    state: &StateVector,
    obs: DichotomicObservable,
    rng: &mut R,
) -> Result<(i8, StateVector)> {
    state.check_qubit(obs.site)?;
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > EXACT_TOL {
        return Err(Error::NotNormalized(norm));
    }
    let m = obs.site_matrix(state.site_basis(obs.site))?;
    let image = state.apply_site(obs.site, &m);
    // P± = (1 ± O)/2
    let projected = |sign: f64| -> Vec<Complex64> {
        state
            .amplitudes
            .iter()
            .zip(&image)
            .map(|(a, oa)| (a + oa * sign) * 0.5)
            .collect()
    };
    let plus = projected(1.0);
    let p_plus = norm_sqr(&plus);
    let u: f64 = rng.gen();
    let (outcome, branch) = if u < p_plus {
        (1, plus)
    } else {
        (-1, projected(-1.0))
    };
    let weight = norm_sqr(&branch);
    if weight <= 0.0 {
        return Err(Error::ZeroProbabilityBranch);
    }
    let scale = weight.sqrt();
    Ok((
        outcome,
        StateVector {
            dims: state.dims.clone(),
            amplitudes: branch.into_iter().map(|a| a / scale).collect(),
            basis_labels: state.basis_labels.clone(),
        },
    ))
}

/// Probability of outcome +1 for a dichotomic observable.
pub fn outcome_probability(state: &StateVector, obs: DichotomicObservable) -> Result<f64> {
    let mean = parity_expectation(state, &[obs])?;
    Ok((1.0 + mean) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn x_plus_maps_to_even_y_superposition() {
        let s = StateVector::qubits(1, vec![c(1.0), c(0.0)]).unwrap();
        let y = basis_change_xy(&s, 0).unwrap();
        assert_eq!(y.site_basis(0), SiteBasis::Y);
        assert!((y.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < EXACT_TOL);
        assert!((y.amplitudes()[1].re - FRAC_1_SQRT_2).abs() < EXACT_TOL);
    }

    #[test]
    fn y_plus_in_x_basis() {
        // start in the ỹ basis at |ỹ=+1⟩ and convert back
        let s = basis_change_xy(&StateVector::qubits(1, vec![c(1.0), c(0.0)]).unwrap(), 0)
            .unwrap();
        let y_plus = StateVector::new(vec![2], vec![c(1.0), c(0.0)], s.basis_labels().to_vec())
            .unwrap();
        let x = basis_change_xy(&y_plus, 0).unwrap();
        assert_eq!(x.site_basis(0), SiteBasis::X);
        assert!((x.amplitude(&["x+"]).unwrap().re - FRAC_1_SQRT_2).abs() < EXACT_TOL);
        assert!((x.amplitude(&["x-"]).unwrap().re - FRAC_1_SQRT_2).abs() < EXACT_TOL);
    }

    #[test]
    fn basis_change_is_involution() {
        let g = ghz();
        let back = basis_change_xy(&basis_change_xy(&g, 1).unwrap(), 1).unwrap();
        for (a, b) in g.amplitudes().iter().zip(back.amplitudes()) {
            assert!((a - b).norm() < EXACT_TOL);
        }
        assert_eq!(back.basis_labels(), g.basis_labels());
    }

    #[test]
    fn basis_change_errors() {
        let g = ghz();
        assert!(matches!(
            basis_change_xy(&g, 3),
            Err(Error::SiteOutOfRange { site: 3, .. })
        ));
        let qutrit = StateVector::single(&["a", "b", "c"], vec![c(1.0), c(0.0), c(0.0)]).unwrap();
        assert!(matches!(
            basis_change_xy(&qutrit, 0),
            Err(Error::NotQubit { dim: 3, .. })
        ));
    }

    #[test]
    fn ghz_amplitudes() {
        let g = ghz();
        assert_eq!(g.amplitude(&["x-", "x+", "x+"]).unwrap(), c(0.5));
        assert_eq!(g.amplitude(&["x+", "x+", "x+"]).unwrap(), c(0.0));
        assert_eq!(g.amplitude(&["x-", "x-", "x-"]).unwrap(), c(-0.5));
        assert!((g.norm_sqr() - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn ghz_in_mixed_basis() {
        let g = ghz();
        let mixed = basis_change_xy(&basis_change_xy(&g, 1).unwrap(), 2).unwrap();
        let expect = [
            (["x-", "y+", "y-"], 0.5),
            (["x-", "y-", "y+"], 0.5),
            (["x+", "y-", "y-"], -0.5),
            (["x+", "y+", "y+"], 0.5),
        ];
        let mut total = 0.0;
        for (labels, amp) in expect {
            let a = mixed.amplitude(&labels).unwrap();
            assert!((a - c(amp)).norm() < EXACT_TOL, "{labels:?}: {a}");
            total += a.norm_sqr();
        }
        assert!((total - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn ghz_parities() {
        use DichotomicObservable as O;
        let g = ghz();
        let xxx = parity_expectation(&g, &[O::x(0), O::x(1), O::x(2)]).unwrap();
        assert!((xxx + 1.0).abs() < EXACT_TOL);
        for obs in [
            [O::x(0), O::y(1), O::y(2)],
            [O::y(0), O::x(1), O::y(2)],
            [O::y(0), O::y(1), O::x(2)],
        ] {
            assert!((parity_expectation(&g, &obs).unwrap() - 1.0).abs() < EXACT_TOL);
        }
    }

    #[test]
    fn parity_is_basis_independent() {
        use DichotomicObservable as O;
        let g = ghz();
        let mixed = basis_change_xy(&basis_change_xy(&g, 1).unwrap(), 2).unwrap();
        let v = parity_expectation(&mixed, &[O::x(0), O::y(1), O::y(2)]).unwrap();
        assert!((v - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn duplicate_sites_rejected() {
        use DichotomicObservable as O;
        assert!(matches!(
            parity_expectation(&ghz(), &[O::x(0), O::y(0)]),
            Err(Error::DuplicateSite(0))
        ));
    }

    #[test]
    fn x_and_y_anticommute_and_square_to_one() {
        let s = StateVector::qubits(1, vec![c(1.0), c(0.0)]).unwrap();
        let x = DichotomicObservable::x(0).to_operator(&s).unwrap();
        let y = DichotomicObservable::y(0).to_operator(&s).unwrap();
        for v in [[c(1.0), c(0.0)], [c(0.3), Complex64::new(0.1, 0.7)]] {
            let xy = x.apply(&y.apply(&v));
            let yx = y.apply(&x.apply(&v));
            for (a, b) in xy.iter().zip(&yx) {
                assert!((a + b).norm() < EXACT_TOL);
            }
            let xx = x.apply(&x.apply(&v));
            for (a, b) in xx.iter().zip(&v) {
                assert!((a - b).norm() < EXACT_TOL);
            }
        }
    }

    #[test]
    fn robertson_trivial_cases() {
        let s = StateVector::qubits(1, vec![c(1.0), c(0.0)]).unwrap();
        let x = DichotomicObservable::x(0).to_operator(&s).unwrap();
        let y = DichotomicObservable::y(0).to_operator(&s).unwrap();
        // eigenstate of x̃
        let b = robertson_bound(&s, &x, &y).unwrap();
        assert!(b.lhs.abs() < EXACT_TOL && b.rhs.abs() < EXACT_TOL);
        // A = B
        let s2 = StateVector::qubits(1, vec![c(0.6), Complex64::new(0.0, 0.8)]).unwrap();
        let b = robertson_bound(&s2, &y, &y).unwrap();
        assert!(b.rhs.abs() < EXACT_TOL);
        assert!(b.lhs >= 0.0);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = vec![c(0.0), c(1.0), c(0.0), c(0.0)];
        assert!(matches!(
            HermitianOperator::new(2, m),
            Err(Error::NotHermitian(_))
        ));
    }

    /// Independent count: solutions of a consistent GF(2) system number
    /// 2^(vars − rank); an inconsistent one has none.
    fn gf2_count(constraints: &[ParityConstraint]) -> usize {
        // rows: 6 variable bits + rhs bit
        let mut rows: Vec<u8> = constraints
            .iter()
            .map(|c| {
                let mut r = 0u8;
                for &(site, kind) in &c.factors {
                    let bit = match kind {
                        ObservableKind::XTilde => 5 - site,
                        ObservableKind::YTilde => 2 - site,
                    };
                    r ^= 1 << bit;
                }
                r | if c.sign == -1 { 1 << 6 } else { 0 }
            })
            .collect();
        let mut rank = 0;
        for bit in 0..6 {
            if let Some(p) = (rank..rows.len()).find(|&i| rows[i] >> bit & 1 == 1) {
                rows.swap(rank, p);
                for i in 0..rows.len() {
                    if i != rank && rows[i] >> bit & 1 == 1 {
                        rows[i] ^= rows[rank];
                    }
                }
                rank += 1;
            }
        }
        if rows.contains(&(1 << 6)) {
            0
        } else {
            1 << (6 - rank)
        }
    }

    #[test]
    fn hidden_values_contradiction() {
        assert_eq!(hv_search(), 0);
        assert_eq!(gf2_count(&ghz_constraints()), 0);
    }

    #[test]
    fn relaxations_are_satisfiable() {
        let all = ghz_constraints();
        for drop in 0..4 {
            let kept: Vec<_> = all
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, c)| c.clone())
                .collect();
            let n = hv_search_with(&kept);
            assert_eq!(n, gf2_count(&kept));
            // frozen from the two oracles above
            assert_eq!(n, 8, "dropping {}", all[drop].name);
        }
    }

    #[test]
    fn product_of_all_relations_is_plus_one() {
        let cs = ghz_constraints();
        let demanded: i8 = cs.iter().map(|c| c.sign).product();
        assert_eq!(demanded, -1);
        for bits in 0..64 {
            let a = HiddenAssignment::from_bits(bits);
            let p: i8 = cs.iter().map(|c| a.product(c)).product();
            assert_eq!(p, 1);
        }
    }

    #[test]
    fn eigenstate_measurement_is_certain() {
        let s = StateVector::qubits(1, vec![c(0.0), c(1.0)]).unwrap();
        let mut rng = substream(0, "t", 0);
        for _ in 0..20 {
            let (o, post) = projective_measure(&s, DichotomicObservable::x(0), &mut rng).unwrap();
            assert_eq!(o, -1);
            assert_eq!(post, s);
        }
    }

    #[test]
    fn ghz_x_measurement_is_even() {
        let p = outcome_probability(&ghz(), DichotomicObservable::x(0)).unwrap();
        // |−++⟩ and |−−−⟩ carry x̃_A = −1: 1/4 + 1/4
        assert!((p - 0.5).abs() < EXACT_TOL);
    }

    #[test]
    fn measurement_preserves_norm() {
        let mut rng = substream(3, "t", 0);
        for k in 0..3 {
            let (_, post) =
                projective_measure(&ghz(), DichotomicObservable::y(k), &mut rng).unwrap();
            assert!((post.norm_sqr() - 1.0).abs() < EXACT_TOL);
        }
    }

    #[test]
    fn born_frequencies_on_even_superposition() {
        let s = StateVector::qubits(1, vec![c(1.0), c(1.0)]).unwrap();
        let mut rng = substream(11, "born", 0);
        let n = 10_000;
        let plus = (0..n)
            .filter(|_| projective_measure(&s, DichotomicObservable::x(0), &mut rng).unwrap().0 == 1)
            .count();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((plus as f64 / n as f64 - 0.5).abs() < 5.0 * sigma);
    }
}
