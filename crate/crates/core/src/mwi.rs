//! Worlds, measures of existence and their bookkeeping.
//!
//! A world branch is a record label with a complex amplitude; its measure of
//! existence is `|amplitude|²`. Decompositions can carry exact rational
//! measures alongside the floating amplitudes, which keeps splitting,
//! refinement and credence arithmetic exact when amplitudes are `√(p/q)`.

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::qstate::StateVector;
use crate::wavepacket::WaveFunction;

const MEASURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldBranch {
    pub label: String,
    pub amplitude: Complex64,
    /// Exact measure, when the decomposition is in rational mode.
    pub exact: Option<Rational64>,
    /// Normalized state of the non-record sites in this world.
    pub relative_state: Vec<Complex64>,
}

impl WorldBranch {
    pub fn new(label: impl Into<String>, amplitude: Complex64) -> Self {
        Self {
            label: label.into(),
            amplitude,
            exact: None,
            relative_state: vec![Complex64::new(1.0, 0.0)],
        }
    }

    /// Branch with exact measure `measure` and amplitude `√measure·e^{iφ}`.
    pub fn exact(label: impl Into<String>, measure: Rational64, phase: f64) -> Self {
        let m = ratio_f64(measure);
        Self {
            label: label.into(),
            amplitude: Complex64::from_polar(m.sqrt(), phase),
            exact: Some(measure),
            relative_state: vec![Complex64::new(1.0, 0.0)],
        }
    }

    pub fn measure(&self) -> f64 {
        self.exact.map_or(self.amplitude.norm_sqr(), ratio_f64)
    }
}

impl Serialize for WorldBranch {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("WorldBranch", 4)?;
        st.serialize_field("label", &self.label)?;
        st.serialize_field("re", &self.amplitude.re)?;
        st.serialize_field("im", &self.amplitude.im)?;
        st.serialize_field("measure", &self.measure())?;
        st.end()
    }
}

fn ratio_f64(r: Rational64) -> f64 {
    r.to_f64().expect("finite rational")
}

/// Orthonormal basis of one record site.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordBasis {
    pub site: usize,
    pub labels: Vec<String>,
    pub vectors: Vec<Vec<Complex64>>,
}

impl RecordBasis {
    /// The computational basis of `site`, labelled from the state.
    pub fn computational(state: &StateVector, site: usize) -> Result<Self> {
        let dim = *state.dims().get(site).ok_or(Error::SiteOutOfRange {
            site,
            n_sites: state.n_sites(),
        })?;
        let vectors = (0..dim)
            .map(|k| {
                (0..dim)
                    .map(|j| Complex64::new(if j == k { 1.0 } else { 0.0 }, 0.0))
                    .collect()
            })
            .collect();
        Ok(Self {
            site,
            labels: state.basis_labels()[site].clone(),
            vectors,
        })
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.vectors.len() != dim || self.labels.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.vectors.len(),
            });
        }
        let mut worst: f64 = 0.0;
        for (a, va) in self.vectors.iter().enumerate() {
            if va.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: va.len(),
                });
            }
            for (b, vb) in self.vectors.iter().enumerate() {
                let ip: Complex64 = va.iter().zip(vb).map(|(x, y)| x.conj() * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).norm());
            }
        }
        if worst > MEASURE_TOL {
            return Err(Error::NonOrthonormalBasis(worst));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchDecomposition {
    pub branches: Vec<WorldBranch>,
    #[serde(skip)]
    record: Option<(RecordBasis, StateVector)>,
}

impl BranchDecomposition {
    /// Floating-mode decomposition from labelled amplitudes.
    pub fn from_amplitudes(branches: Vec<(&str, Complex64)>) -> Result<Self> {
        Self::from_branches(
            branches
                .into_iter()
                .map(|(l, a)| WorldBranch::new(l, a))
                .collect(),
        )
    }

    /// Rational-mode decomposition from labelled exact measures (zero phase).
    pub fn from_measures(branches: Vec<(&str, Rational64)>) -> Result<Self> {
        Self::from_branches(
            branches
                .into_iter()
                .map(|(l, m)| WorldBranch::exact(l, m, 0.0))
                .collect(),
        )
    }

    pub fn from_branches(branches: Vec<WorldBranch>) -> Result<Self> {
        let d = Self {
            branches,
            record: None,
        };
        d.check_total()?;
        Ok(d)
    }

    fn check_total(&self) -> Result<()> {
        if self.is_exact() {
            let total: Rational64 = self.branches.iter().filter_map(|b| b.exact).sum();
            if total != Rational64::one() {
                return Err(Error::NotNormalized(ratio_f64(total)));
            }
        } else {
            let total = self.total_measure();
            if (total - 1.0).abs() > MEASURE_TOL {
                return Err(Error::NotNormalized(total));
            }
        }
        Ok(())
    }

    pub fn is_exact(&self) -> bool {
        !self.branches.is_empty() && self.branches.iter().all(|b| b.exact.is_some())
    }

    pub fn total_measure(&self) -> f64 {
        self.branches.iter().map(WorldBranch::measure).sum()
    }

    pub fn branch(&self, label: &str) -> Result<&WorldBranch> {
        self.branches
            .iter()
            .find(|b| b.label == label)
            .ok_or_else(|| Error::UnknownBranch(label.into()))
    }

    pub fn measure(&self, label: &str) -> Result<f64> {
        self.branch(label).map(WorldBranch::measure)
    }

    pub fn exact_measure(&self, label: &str) -> Result<Option<Rational64>> {
        self.branch(label).map(|b| b.exact)
    }

    fn position(&self, label: &str) -> Result<usize> {
        self.branches
            .iter()
            .position(|b| b.label == label)
            .ok_or_else(|| Error::UnknownBranch(label.into()))
    }

    /// Rebuilds the full state from the worlds of a [`decompose`] result.
    pub fn recombine(&self) -> Result<StateVector> {
        let (basis, template) = self.record.as_ref().ok_or_else(|| {
            Error::InvalidParameter("decomposition has no record basis".into())
        })?;
        let dims = template.dims();
        let site = basis.site;
        let inner: usize = dims[site + 1..].iter().product();
        let dim = dims[site];
        let mut amps = vec![Complex64::new(0.0, 0.0); template.len()];
        for branch in &self.branches {
            let k = basis
                .labels
                .iter()
                .position(|l| *l == branch.label)
                .ok_or_else(|| Error::UnknownBranch(branch.label.clone()))?;
            for (flat, a) in amps.iter_mut().enumerate() {
                let j = (flat / inner) % dim;
                let rest = (flat / (inner * dim)) * inner + flat % inner;
                *a += basis.vectors[k][j] * branch.amplitude * branch.relative_state[rest];
            }
        }
        StateVector::new(dims.to_vec(), amps, template.basis_labels().to_vec())
    }
}

/// Splits a state into worlds labelled by an orthonormal basis of one site.
///
/// Each branch amplitude is the norm of the projected state (taken real and
/// non-negative); the projected state itself is kept, normalized, as the
/// branch's relative state.
pub fn decompose(state: &StateVector, record: &RecordBasis) -> Result<BranchDecomposition> {
    let dims = state.dims();
    let site = record.site;
    if site >= dims.len() {
        return Err(Error::SiteOutOfRange {
            site,
            n_sites: dims.len(),
        });
    }
    let dim = dims[site];
    record.check(dim)?;
    let inner: usize = dims[site + 1..].iter().product();
    let rest_len = state.len() / dim;
    let mut branches = Vec::new();
    for (label, v) in record.labels.iter().zip(&record.vectors) {
        let mut rel = vec![Complex64::new(0.0, 0.0); rest_len];
        for (flat, a) in state.amplitudes().iter().enumerate() {
            let j = (flat / inner) % dim;
            let rest = (flat / (inner * dim)) * inner + flat % inner;
            rel[rest] += v[j].conj() * a;
        }
        let norm = rel.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm * norm <= MEASURE_TOL * MEASURE_TOL {
            continue;
        }
        rel.iter_mut().for_each(|c| *c /= norm);
        branches.push(WorldBranch {
            label: label.clone(),
            amplitude: Complex64::new(norm, 0.0),
            exact: None,
            relative_state: rel,
        });
    }
    let d = BranchDecomposition {
        branches,
        record: Some((record.clone(), state.clone())),
    };
    d.check_total()?;
    Ok(d)
}

/// `∫_Q |Ψ|² dq` over a union of half-open intervals `[a, b)`.
pub fn measure_region(psi: &WaveFunction, region: &[(f64, f64)]) -> Result<f64> {
    if psi.n_particles() != 1 {
        return Err(Error::InvalidParameter(
            "regions are defined on one-particle grids".into(),
        ));
    }
    let grid = psi.grid();
    let mut covered = false;
    let mut total = 0.0;
    for (x, rho) in grid.points().zip(psi.density()) {
        if region.iter().any(|&(a, b)| x >= a && x < b) {
            covered = true;
            total += rho;
        }
    }
    if !covered {
        return Err(Error::EmptyRegion);
    }
    Ok(total * grid.spacing())
}

/// The local operations of the three-box invariance argument.
#[derive(Debug, Clone, PartialEq)]
pub enum Fig8Transform {
    /// Local phase `e^{iθ}` on one branch.
    Phase { branch: String, theta: f64 },
    /// Local distortion of the branch state; relabels `X` to `X'`.
    Reshape { branch: String },
    /// `k` orthogonal equal-measure sub-branches `X1..Xk`.
    Split { branch: String, k: usize },
    /// Two branches interfered on a splitter into one output branch.
    Interfere {
        first: String,
        second: String,
        output: String,
    },
}

impl Fig8Transform {
    fn touched(&self) -> Vec<&str> {
        match self {
            Self::Phase { branch, .. } | Self::Reshape { branch } | Self::Split { branch, .. } => {
                vec![branch]
            }
            Self::Interfere { first, second, .. } => vec![first, second],
        }
    }
}

/// Applies a local transform that must not touch the `protected` branch.
pub fn fig8_transform(
    decomp: &BranchDecomposition,
    kind: &Fig8Transform,
    protected: &str,
) -> Result<BranchDecomposition> {
    if kind.touched().contains(&protected) {
        return Err(Error::ProtectedBranch(protected.into()));
    }
    let mut branches = decomp.branches.clone();
    match kind {
        Fig8Transform::Phase { branch, theta } => {
            let i = decomp.position(branch)?;
            branches[i].amplitude *= Complex64::from_polar(1.0, *theta);
        }
        Fig8Transform::Reshape { branch } => {
            let i = decomp.position(branch)?;
            branches[i].label = format!("{branch}'");
        }
        Fig8Transform::Split { branch, k } => {
            if *k == 0 {
                return Err(Error::InvalidParameter("split into zero branches".into()));
            }
            let i = decomp.position(branch)?;
            let parent = branches.remove(i);
            let scale = 1.0 / (*k as f64).sqrt();
            let children = (1..=*k).map(|j| WorldBranch {
                label: format!("{branch}{j}"),
                amplitude: parent.amplitude * scale,
                exact: parent.exact.map(|m| m / *k as i64),
                relative_state: parent.relative_state.clone(),
            });
            branches.splice(i..i, children);
        }
        Fig8Transform::Interfere {
            first,
            second,
            output,
        } => {
            if first == second {
                return Err(Error::InvalidParameter("interfering a branch with itself".into()));
            }
            let (i, j) = (decomp.position(first)?, decomp.position(second)?);
            let (a, b) = (branches[i].amplitude, branches[j].amplitude);
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            // unitary with first row (a*, b*)/n sends (a, b) to (n, 0)
            let merged = if n > 0.0 {
                (a.conj() * a + b.conj() * b) / n
            } else {
                Complex64::new(0.0, 0.0)
            };
            let exact = match (branches[i].exact, branches[j].exact) {
                (Some(x), Some(y)) => Some(x + y),
                _ => None,
            };
            let keep = i.min(j);
            branches[keep] = WorldBranch {
                label: output.clone(),
                amplitude: merged,
                exact,
                relative_state: branches[keep].relative_state.clone(),
            };
            branches.remove(i.max(j));
        }
    }
    let out = BranchDecomposition {
        branches,
        record: None,
    };
    let drift = (out.total_measure() - decomp.total_measure()).abs();
    if drift > MEASURE_TOL {
        return Err(Error::NotNormalized(out.total_measure()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinedBranch {
    pub label: String,
    pub ancestor: String,
    pub measure: f64,
    #[serde(skip)]
    pub exact: Option<Rational64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refinement {
    pub branches: Vec<RefinedBranch>,
    /// Measure every refined branch approximates.
    pub common_measure: f64,
}

impl Refinement {
    /// Fraction of refined worlds descending from `ancestor`.
    pub fn count_fraction(&self, ancestor: &str) -> f64 {
        let n = self.branches.iter().filter(|b| b.ancestor == ancestor).count();
        n as f64 / self.branches.len() as f64
    }

    pub fn max_deviation(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| (b.measure - self.common_measure).abs())
            .fold(0.0, f64::max)
    }
}

/// Splits every branch by auxiliary irrelevant measurements until all worlds
/// carry (nearly) the same measure.
///
/// Rational mode is exact: with `K` the lcm of the measure denominators,
/// branch `i` splits into `m_i·K` worlds of measure `1/K`. Floating mode uses
/// `K = ⌈1/ε⌉` and `n_i = max(1, round(m_i·K))`.
pub fn equal_measure_refinement(decomp: &BranchDecomposition, eps: f64) -> Result<Refinement> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("precision {eps} must be > 0")));
    }
    let measures: Vec<f64> = decomp.branches.iter().map(WorldBranch::measure).collect();
    let first = measures[0];
    if measures.iter().all(|m| (m - first).abs() <= eps.min(MEASURE_TOL)) {
        return Ok(Refinement {
            branches: decomp
                .branches
                .iter()
                .map(|b| RefinedBranch {
                    label: b.label.clone(),
                    ancestor: b.label.clone(),
                    measure: b.measure(),
                    exact: b.exact,
                })
                .collect(),
            common_measure: first,
        });
    }
    let (counts, common, exact_unit): (Vec<usize>, f64, Option<Rational64>) = if decomp.is_exact()
    {
        let k = decomp
            .branches
            .iter()
            .filter_map(|b| b.exact)
            .fold(1i64, |acc, m| num_integer_lcm(acc, *m.denom()));
        let counts = decomp
            .branches
            .iter()
            .map(|b| (b.exact.expect("exact mode") * k).to_integer() as usize)
            .collect();
        let unit = Rational64::new(1, k);
        (counts, ratio_f64(unit), Some(unit))
    } else {
        let k = (1.0 / eps).ceil();
        let counts = measures
            .iter()
            .map(|m| ((m * k).round() as usize).max(1))
            .collect();
        (counts, 1.0 / k, None)
    };
    let mut branches = Vec::new();
    for ((b, m), n) in decomp.branches.iter().zip(&measures).zip(counts) {
        for j in 1..=n {
            let label = if n == 1 {
                b.label.clone()
            } else {
                format!("{}#{j}", b.label)
            };
            branches.push(RefinedBranch {
                label,
                ancestor: b.label.clone(),
                measure: m / n as f64,
                exact: exact_unit,
            });
        }
    }
    Ok(Refinement {
        branches,
        common_measure: common,
    })
}

fn num_integer_lcm(a: i64, b: i64) -> i64 {
    fn gcd(mut a: i64, mut b: i64) -> i64 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a.abs()
    }
    a / gcd(a, b) * b
}

/// Awake branches on Monday and Tuesday for a coin with exact Heads measure `p`.
pub fn sleeping_beauty_branches(p: Rational64) -> Result<[BranchDecomposition; 2]> {
    if p < Rational64::zero() || p > Rational64::one() {
        return Err(Error::InvalidParameter(format!("coin bias {p} outside [0, 1]")));
    }
    let q = Rational64::one() - p;
    let monday = BranchDecomposition::from_measures(vec![("H_awake", p), ("T_awake", q)])?;
    let tuesday = BranchDecomposition::from_measures(vec![("H_sleep", p), ("T_awake", q)])?;
    Ok([monday, tuesday])
}

/// Credence in Heads on awakening, from the measures of the awake worlds.
pub fn sleeping_beauty_biased(p: Rational64) -> Result<Rational64> {
    let [monday, tuesday] = sleeping_beauty_branches(p)?;
    let h_mon = monday.exact_measure("H_awake")?.expect("exact");
    let t_mon = monday.exact_measure("T_awake")?.expect("exact");
    let t_tue = tuesday.exact_measure("T_awake")?.expect("exact");
    Ok(h_mon / (h_mon + t_mon + t_tue))
}

/// Fair quantum coin: exactly 1/3.
pub fn sleeping_beauty() -> Rational64 {
    sleeping_beauty_biased(Rational64::new(1, 2)).expect("fair coin is valid")
}

/// Floating form of the biased-coin credence, `p/(2 − p)`.
pub fn sleeping_beauty_closed_form(p: f64) -> f64 {
    p / (2.0 - p)
}

/// The three-box state `(|A⟩ + |B⟩ + |C⟩)/√3` in rational mode.
pub fn three_boxes() -> BranchDecomposition {
    let third = Rational64::new(1, 3);
    BranchDecomposition::from_measures(vec![("A", third), ("B", third), ("C", third)])
        .expect("measures sum to one")
}
