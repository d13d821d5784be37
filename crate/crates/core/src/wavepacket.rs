//! Grid wave functions in natural units (ħ = m = 1).
//!
//! A [`WaveFunction`] holds complex values on a product of 1D [`Grid`]s, one
//! axis per particle (at most three). Values are stored row-major with
//! particle 0 on the slowest axis, and normalization is the Riemann sum
//! `Σ|ψ|²·Π dx = 1`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORM_TOL: f64 = 1e-9;
pub const MIN_POINTS: usize = 64;
/// Mass allowed in the outer edge band before a state counts as aliased.
pub const EDGE_MASS_TOL: f64 = 1e-8;
/// Fraction of the grid, per side, treated as the edge band.
const EDGE_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "{n_points} points, need at least {MIN_POINTS}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!("bad range [{x_min}, {x_max}]")));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    /// 1024 points on [−8, 8].
    pub fn standard() -> Self {
        Self {
            x_min: -8.0,
            x_max: 8.0,
            n_points: 1024,
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Angular wave numbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / (n as f64 * self.spacing());
        (0..n)
            .map(|j| {
                if j < n.div_ceil(2) {
                    j as f64 * dk
                } else {
                    (j as f64 - n as f64) * dk
                }
            })
            .collect()
    }

    fn edge_band(&self) -> usize {
        ((self.n_points as f64 * EDGE_FRACTION).ceil() as usize).max(1)
    }
}

/// Center, width σ and wave number k of a Gaussian packet
/// `exp(−(x−c)²/4σ² + ikx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub center: f64,
    pub width: f64,
    pub momentum: f64,
}

impl PacketSpec {
    pub fn at(center: f64, width: f64) -> Self {
        Self {
            center,
            width,
            momentum: 0.0,
        }
    }

    pub fn moving(center: f64, width: f64, momentum: f64) -> Self {
        Self {
            center,
            width,
            momentum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grids: Vec<Grid>,
    values: Vec<Complex64>,
}

impl WaveFunction {
    /// Wraps values that must already be normalized (within 1e-9).
    pub fn new(grids: Vec<Grid>, values: Vec<Complex64>) -> Result<Self> {
        let psi = Self::unnormalized(grids, values)?;
        let norm = psi.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(psi)
    }

    /// Wraps values without a norm check (conditional slices, raw fields).
    pub fn unnormalized(grids: Vec<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if grids.is_empty() || grids.len() > 3 {
            return Err(Error::InvalidParameter(format!(
                "{} particle axes, supported 1..=3",
                grids.len()
            )));
        }
        let expected: usize = grids.iter().map(|g| g.n_points).product();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self { grids, values })
    }

    /// Normalizes arbitrary nonzero values.
    pub fn normalized(grids: Vec<Grid>, values: Vec<Complex64>) -> Result<Self> {
        let mut psi = Self::unnormalized(grids, values)?;
        psi.normalize()?;
        Ok(psi)
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::normalized(vec![grid], grid.points().map(f).collect())
    }

    /// Product state `ψ₁(r₁)ψ₂(r₂)…` of 1D factors.
    pub fn product(factors: &[&WaveFunction]) -> Result<Self> {
        let mut grids = Vec::new();
        let mut values = vec![Complex64::new(1.0, 0.0)];
        for f in factors {
            if f.n_particles() != 1 {
                return Err(Error::InvalidParameter("product of non-1D factors".into()));
            }
            grids.push(f.grids[0]);
            values = values
                .iter()
                .flat_map(|a| f.values.iter().map(move |b| a * b))
                .collect();
        }
        Self::normalized(grids, values)
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn grid(&self) -> Grid {
        self.grids[0]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn n_particles(&self) -> usize {
        self.grids.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.grids.iter().map(|g| g.n_points).collect()
    }

    /// Volume element Π dx.
    pub fn cell_volume(&self) -> f64 {
        self.grids.iter().map(Grid::spacing).product()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let norm = self.norm_sqr();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        let s = norm.sqrt();
        for v in &mut self.values {
            *v /= s;
        }
        Ok(norm)
    }

    pub fn check_normalized(&self) -> Result<()> {
        let norm = self.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(())
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn max_density(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }

    /// Marginal position density of one particle on its grid (integrates to the norm).
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let shape = self.shape();
        let stride: usize = shape[axis + 1..].iter().product();
        let n = shape[axis];
        let other_volume: f64 = self
            .grids
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != axis)
            .map(|(_, g)| g.spacing())
            .product();
        let mut out = vec![0.0; n];
        for (flat, v) in self.values.iter().enumerate() {
            out[(flat / stride) % n] += v.norm_sqr();
        }
        out.iter_mut().for_each(|m| *m *= other_volume);
        out
    }

    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if self.grids != other.grids {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.cell_volume())
    }

    /// `|⟨self|other⟩|²`; both states assumed normalized.
    pub fn fidelity(&self, other: &WaveFunction) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Largest fraction of the norm sitting in the edge band of any axis.
    pub fn edge_mass(&self) -> f64 {
        let total = self.norm_sqr();
        (0..self.n_particles())
            .map(|axis| {
                let m = self.marginal(axis);
                let band = self.grids[axis].edge_band();
                let n = m.len();
                let edge: f64 = m[..band].iter().chain(&m[n - band..]).sum::<f64>()
                    * self.grids[axis].spacing();
                edge / total
            })
            .fold(0.0, f64::max)
    }

    pub fn check_no_aliasing(&self) -> Result<()> {
        let edge = self.edge_mass();
        if edge > EDGE_MASS_TOL {
            return Err(Error::Aliasing(edge));
        }
        Ok(())
    }

    /// Value at an off-grid configuration by tensor-product cubic interpolation.
    pub fn interpolate(&self, cfg: &[f64]) -> Result<Complex64> {
        interpolate_nd(&self.grids, &self.values, cfg)
    }
}

/// Normalized Gaussian packet on a 1D grid.
pub fn gaussian_packet(spec: PacketSpec, grid: Grid) -> Result<WaveFunction> {
    if !(spec.width > 2.0 * grid.spacing()) {
        return Err(Error::InvalidParameter(format!(
            "packet width {} must exceed two grid spacings ({})",
            spec.width,
            2.0 * grid.spacing()
        )));
    }
    // continuous tail mass of the N(c, σ²) density outside the domain
    let z = |x: f64| (x - spec.center) / (spec.width * std::f64::consts::SQRT_2);
    let tail = 0.5 * statrs::function::erf::erfc(-z(grid.x_min))
        + 0.5 * statrs::function::erf::erfc(z(grid.x_max));
    if tail > EDGE_MASS_TOL {
        return Err(Error::PacketTruncated(tail));
    }
    WaveFunction::from_fn(grid, |x| {
        let d = x - spec.center;
        Complex64::from_polar(
            (-d * d / (4.0 * spec.width * spec.width)).exp(),
            spec.momentum * x,
        )
    })
}

/// Closed-form width of a freely spreading minimum-uncertainty packet.
pub fn free_spreading_width(sigma0: f64, t: f64) -> f64 {
    sigma0 * (1.0 + (t / (2.0 * sigma0 * sigma0)).powi(2)).sqrt()
}

/// 1D FFT plans for one grid, shared by the spectral routines.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n_points),
            inverse: planner.plan_fft_inverse(grid.n_points),
            k: grid.wavenumbers(),
        }
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the 1/n factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let s = 1.0 / self.grid.n_points as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }

    /// Multiplies by `f(k)` in momentum space.
    pub fn apply_multiplier(&self, buf: &mut [Complex64], f: impl Fn(f64) -> Complex64) {
        self.forward(buf);
        for (v, &k) in buf.iter_mut().zip(&self.k) {
            *v *= f(k);
        }
        self.inverse(buf);
    }

    pub fn derivative(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.apply_multiplier(&mut buf, |k| Complex64::new(0.0, k));
        buf
    }

    /// Fraction of spectral weight in the top tenth of |k|.
    pub fn spectral_edge_mass(&self, values: &[Complex64]) -> f64 {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        let k_max = self.k.iter().fold(0.0f64, |m, k| m.max(k.abs()));
        let total: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
        let edge: f64 = buf
            .iter()
            .zip(&self.k)
            .filter(|(_, k)| k.abs() > 0.9 * k_max)
            .map(|(v, _)| v.norm_sqr())
            .sum();
        edge / total
    }
}

/// Applies a 1D routine to every line of an N-D array along `axis`.
pub(crate) fn for_each_line(
    shape: &[usize],
    values: &mut [Complex64],
    axis: usize,
    mut f: impl FnMut(&mut [Complex64]),
) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer = values.len() / (n * stride);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for o in 0..outer {
        for s in 0..stride {
            let base = o * n * stride + s;
            for (j, l) in line.iter_mut().enumerate() {
                *l = values[base + j * stride];
            }
            f(&mut line);
            for (j, l) in line.iter().enumerate() {
                values[base + j * stride] = *l;
            }
        }
    }
}

/// Position and momentum standard deviations of a normalized 1D state.
pub fn uncertainty(psi: &WaveFunction) -> Result<(f64, f64)> {
    if psi.n_particles() != 1 {
        return Err(Error::InvalidParameter(
            "uncertainty needs a single-particle state".into(),
        ));
    }
    psi.check_normalized()?;
    let grid = psi.grid();
    let dx = grid.spacing();
    let (mut m1, mut m2) = (0.0, 0.0);
    for (x, v) in grid.points().zip(psi.values()) {
        let p = v.norm_sqr() * dx;
        m1 += p * x;
        m2 += p * x * x;
    }
    let dx_sd = (m2 - m1 * m1).max(0.0).sqrt();

    let spectral = Spectral::new(grid);
    let mut buf = psi.values().to_vec();
    spectral.forward(&mut buf);
    let total: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
    let (mut k1, mut k2) = (0.0, 0.0);
    for (v, &k) in buf.iter().zip(spectral.wavenumbers()) {
        let p = v.norm_sqr() / total;
        k1 += p * k;
        k2 += p * k * k;
    }
    Ok((dx_sd, (k2 - k1 * k1).max(0.0).sqrt()))
}

/// ⟨p²⟩/2 for a normalized 1D state.
pub fn kinetic_energy(psi: &WaveFunction) -> f64 {
    let spectral = Spectral::new(psi.grid());
    let mut buf = psi.values().to_vec();
    spectral.forward(&mut buf);
    let total: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
    buf.iter()
        .zip(spectral.wavenumbers())
        .map(|(v, k)| v.norm_sqr() * k * k)
        .sum::<f64>()
        / total
        / 2.0
}

/// Exact free evolution `exp(−i t p²/2)` on every particle axis.
pub fn evolve_free(psi: &WaveFunction, t: f64) -> Result<WaveFunction> {
    if t == 0.0 {
        return Ok(psi.clone());
    }
    check_momentum_resolved(psi)?;
    let shape = psi.shape();
    let mut values = psi.values.clone();
    for axis in 0..psi.n_particles() {
        let spectral = Spectral::new(psi.grids[axis]);
        for_each_line(&shape, &mut values, axis, |line| {
            spectral.apply_multiplier(line, |k| Complex64::from_polar(1.0, -0.5 * k * k * t));
        });
    }
    let out = WaveFunction {
        grids: psi.grids.clone(),
        values,
    };
    out.check_no_aliasing()?;
    Ok(out)
}

fn check_momentum_resolved(psi: &WaveFunction) -> Result<()> {
    for axis in 0..psi.n_particles() {
        let spectral = Spectral::new(psi.grids[axis]);
        let marginal_line: Vec<Complex64> = if psi.n_particles() == 1 {
            psi.values.clone()
        } else {
            // the busiest line along this axis is representative enough
            let shape = psi.shape();
            let mut best = (0.0, Vec::new());
            let mut values = psi.values.clone();
            for_each_line(&shape, &mut values, axis, |line| {
                let w: f64 = line.iter().map(|v| v.norm_sqr()).sum();
                if w > best.0 {
                    best = (w, line.to_vec());
                }
            });
            best.1
        };
        if marginal_line.is_empty() {
            continue;
        }
        let edge = spectral.spectral_edge_mass(&marginal_line);
        if edge > EDGE_MASS_TOL {
            return Err(Error::UnresolvedMomentum(edge));
        }
    }
    Ok(())
}

/// Strang split-step propagator for `H = p²/2 + V(x)` on a 1D grid.
#[derive(Debug, Clone)]
pub struct SplitStep {
    spectral: Spectral,
    dt: f64,
    kinetic: Vec<Complex64>,
    half_potential: Option<Vec<Complex64>>,
}

impl SplitStep {
    pub fn new(grid: Grid, dt: f64, potential: Option<&[f64]>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step {dt}")));
        }
        if let Some(v) = potential {
            if v.len() != grid.n_points {
                return Err(Error::DimensionMismatch {
                    expected: grid.n_points,
                    got: v.len(),
                });
            }
        }
        let spectral = Spectral::new(grid);
        let kinetic = spectral
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(1.0, -0.5 * k * k * dt))
            .collect();
        let half_potential =
            potential.map(|v| v.iter().map(|v| Complex64::from_polar(1.0, -0.5 * v * dt)).collect());
        Ok(Self {
            spectral,
            dt,
            kinetic,
            half_potential,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, values: &mut [Complex64]) {
        if let Some(h) = &self.half_potential {
            values.iter_mut().zip(h).for_each(|(v, p)| *v *= p);
        }
        self.spectral.forward(values);
        values.iter_mut().zip(&self.kinetic).for_each(|(v, p)| *v *= p);
        self.spectral.inverse(values);
        if let Some(h) = &self.half_potential {
            values.iter_mut().zip(h).for_each(|(v, p)| *v *= p);
        }
    }

    /// `steps` steps with a final aliasing check.
    pub fn evolve(&self, psi: &WaveFunction, steps: usize) -> Result<WaveFunction> {
        let mut out = psi.clone();
        for _ in 0..steps {
            self.step(out.values_mut());
        }
        out.check_no_aliasing()?;
        Ok(out)
    }
}

/// A unitary 2×2 map on a pair of packet modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeMap(pub [[Complex64; 2]; 2]);

impl TwoModeMap {
    /// Mode map `|+1⟩ → (|+1⟩ + |−1⟩)/√2`, `|−1⟩ → (|+1⟩ − |−1⟩)/√2`.
    pub fn hadamard() -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self([[h, h], [h, -h]])
    }

    /// Lossless splitter with reflection probability `r` and a real
    /// convention: `[[√(1−r), √r], [√r, −√(1−r)]]`.
    pub fn with_reflectivity(r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!("reflectivity {r}")));
        }
        let t = Complex64::new((1.0 - r).sqrt(), 0.0);
        let s = Complex64::new(r.sqrt(), 0.0);
        Ok(Self([[t, s], [s, -t]]))
    }

    pub fn apply(&self, c: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.0;
        [
            m[0][0] * c[0] + m[0][1] * c[1],
            m[1][0] * c[0] + m[1][1] * c[1],
        ]
    }

    pub fn inverse(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }
}

/// Orthonormal packet modes at `±separation/2` used as the x̃ (input) and
/// ỹ (output) registers of a beam splitter.
#[derive(Debug, Clone)]
pub struct PacketModes {
    /// index 0: packet at +1 (x̃ = +1), index 1: packet at −1.
    pub modes: [WaveFunction; 2],
}

pub const MODE_LEAK_TOL: f64 = 1e-8;

impl PacketModes {
    pub fn new(grid: Grid, width: f64, separation: f64) -> Result<Self> {
        let half = separation / 2.0;
        Ok(Self {
            modes: [
                gaussian_packet(PacketSpec::at(half, width), grid)?,
                gaussian_packet(PacketSpec::at(-half, width), grid)?,
            ],
        })
    }

    /// Packets at ±1 with σ = 0.1 on the standard grid.
    pub fn standard() -> Self {
        Self::new(Grid::standard(), 0.1, 2.0).expect("standard grid fits the packets")
    }

    pub fn grid(&self) -> Grid {
        self.modes[0].grid()
    }

    /// Mode coefficients and the weight left outside the two modes.
    pub fn project(&self, psi: &WaveFunction) -> Result<([Complex64; 2], f64)> {
        let c = [self.modes[0].inner(psi)?, self.modes[1].inner(psi)?];
        let captured = c[0].norm_sqr() + c[1].norm_sqr();
        Ok((c, (psi.norm_sqr() - captured).max(0.0)))
    }

    pub fn synthesize(&self, c: [Complex64; 2]) -> WaveFunction {
        let values = self.modes[0]
            .values()
            .iter()
            .zip(self.modes[1].values())
            .map(|(a, b)| c[0] * a + c[1] * b)
            .collect();
        WaveFunction {
            grids: vec![self.grid()],
            values,
        }
    }

    /// Mode-basis unitary: project, map coefficients, resynthesize.
    pub fn apply(&self, psi: &WaveFunction, map: &TwoModeMap) -> Result<WaveFunction> {
        let (c, leak) = self.project(psi)?;
        if leak > MODE_LEAK_TOL {
            return Err(Error::ModeLeakage(leak));
        }
        Ok(self.synthesize(map.apply(c)))
    }
}

/// The x̃ → ỹ beam splitter on the standard packet pair at ±1.
pub fn beam_splitter(psi: &WaveFunction) -> Result<WaveFunction> {
    let modes = PacketModes::new(psi.grid(), 0.1, 2.0)?;
    modes.apply(psi, &TwoModeMap::hadamard())
}

/// Writes a 1D wave function as CSV: `# grid,x_min,x_max,n_points` then `x,re,im` rows.
pub fn write_csv<W: Write>(psi: &WaveFunction, mut out: W) -> Result<()> {
    if psi.n_particles() != 1 {
        return Err(Error::InvalidParameter(
            "CSV export supports single-particle states".into(),
        ));
    }
    let g = psi.grid();
    writeln!(out, "# grid,{:e},{:e},{}", g.x_min, g.x_max, g.n_points)?;
    writeln!(out, "x,re,im")?;
    for (x, v) in g.points().zip(psi.values()) {
        writeln!(out, "{:e},{:e},{:e}", x, v.re, v.im)?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<WaveFunction> {
    let mut lines = input.lines();
    let bad = |m: &str| Error::Config(format!("wave-function CSV: {m}"));
    let header = lines.next().ok_or_else(|| bad("empty"))??;
    let fields: Vec<&str> = header
        .strip_prefix("# grid,")
        .ok_or_else(|| bad("missing grid header"))?
        .split(',')
        .collect();
    if fields.len() != 3 {
        return Err(bad("grid header needs x_min,x_max,n_points"));
    }
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bad number"));
    let grid = Grid::new(
        parse(fields[0])?,
        parse(fields[1])?,
        fields[2].trim().parse().map_err(|_| bad("bad point count"))?,
    )?;
    lines.next().ok_or_else(|| bad("missing column header"))??;
    let mut values = Vec::with_capacity(grid.n_points);
    for line in lines {
        let line = line?;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(bad("row needs x,re,im"));
        }
        values.push(Complex64::new(parse(cols[1])?, parse(cols[2])?));
    }
    WaveFunction::unnormalized(vec![grid], values)
}

/// 4-point Lagrange weights for `x` on a grid: first index and weights.
pub(crate) fn cubic_weights(grid: &Grid, x: f64) -> Result<(usize, [f64; 4])> {
    if !grid.contains(x) {
        return Err(Error::OutsideGrid(x));
    }
    let dx = grid.spacing();
    let n = grid.n_points;
    let u = (x - grid.x_min) / dx;
    let j = (u.floor() as usize).clamp(1, n - 3);
    let s = u - j as f64;
    // nodes at −1, 0, 1, 2 relative to j
    let w = [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ];
    Ok((j - 1, w))
}

pub(crate) fn interpolate_nd(grids: &[Grid], values: &[Complex64], cfg: &[f64]) -> Result<Complex64> {
    if cfg.len() != grids.len() {
        return Err(Error::DimensionMismatch {
            expected: grids.len(),
            got: cfg.len(),
        });
    }
    let weights: Vec<(usize, [f64; 4])> = grids
        .iter()
        .zip(cfg)
        .map(|(g, &x)| cubic_weights(g, x))
        .collect::<Result<_>>()?;
    let shape: Vec<usize> = grids.iter().map(|g| g.n_points).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    let dims = grids.len();
    for combo in 0..4usize.pow(dims as u32) {
        let mut flat = 0;
        let mut w = 1.0;
        let mut c = combo;
        for (axis, (start, ws)) in weights.iter().enumerate() {
            let k = c % 4;
            c /= 4;
            let _ = axis;
            w *= ws[k];
            flat = flat * shape[axis] + start + k;
        }
        acc += values[flat] * w;
    }
    Ok(acc)
}

/// Eighth-order centered first derivative along one axis (lower order near edges).
pub(crate) fn fd_derivative_line(line: &[Complex64], dx: f64) -> Vec<Complex64> {
    const C8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    const C4: [f64; 2] = [2.0 / 3.0, -1.0 / 12.0];
    let n = line.len();
    let at = |i: isize| -> Complex64 {
        if i < 0 || i >= n as isize {
            Complex64::new(0.0, 0.0)
        } else {
            line[i as usize]
        }
    };
    (0..n as isize)
        .map(|i| {
            let d = if i >= 4 && i < n as isize - 4 {
                C8.iter()
                    .enumerate()
                    .map(|(k, c)| (at(i + k as isize + 1) - at(i - k as isize - 1)) * *c)
                    .sum::<Complex64>()
            } else if i >= 2 && i < n as isize - 2 {
                C4.iter()
                    .enumerate()
                    .map(|(k, c)| (at(i + k as isize + 1) - at(i - k as isize - 1)) * *c)
                    .sum::<Complex64>()
            } else {
                (at(i + 1) - at(i - 1)) * 0.5
            };
            d / dx
        })
        .collect()
}

pub(crate) fn fd_second_derivative_line(line: &[f64], dx: f64) -> Vec<f64> {
    const C8: [f64; 4] = [8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    const C0: f64 = -205.0 / 72.0;
    let n = line.len();
    let at = |i: isize| -> f64 {
        if i < 0 || i >= n as isize {
            0.0
        } else {
            line[i as usize]
        }
    };
    (0..n as isize)
        .map(|i| {
            let d = if i >= 4 && i < n as isize - 4 {
                C0 * at(i)
                    + C8
                        .iter()
                        .enumerate()
                        .map(|(k, c)| (at(i + k as isize + 1) + at(i - k as isize - 1)) * c)
                        .sum::<f64>()
            } else {
                at(i + 1) - 2.0 * at(i) + at(i - 1)
            };
            d / (dx * dx)
        })
        .collect()
}

pub(crate) fn fd_derivative_real(line: &[f64], dx: f64) -> Vec<f64> {
    let c: Vec<Complex64> = line.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fd_derivative_line(&c, dx).into_iter().map(|v| v.re).collect()
}
