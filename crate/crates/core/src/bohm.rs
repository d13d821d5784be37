//! Bohmian guidance dynamics.
//!
//! Velocities follow `v_i = Im(Ψ*∂_iΨ)/|Ψ|²` (ħ = m = 1). Off-grid values of
//! Ψ and its gradient come from tensor-product cubic interpolation, so the
//! full-configuration velocity and the conditional-wave-function velocity
//! are the same linear algebra evaluated in two orders.
//!
//! Guidance is undefined at nodes: any evaluation where
//! `|Ψ|² ≤ 1e-12·max|Ψ|²` fails with [`Error::NodeProximity`] instead of
//! extrapolating.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::wavepacket::{
    cubic_weights, fd_derivative_line, fd_derivative_real, fd_second_derivative_line,
    for_each_line, interpolate_nd, Grid, SplitStep, Spectral, WaveFunction,
};

/// Node guard relative to the peak density.
pub const NODE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BohmConfiguration {
    pub positions: Vec<f64>,
}

impl BohmConfiguration {
    pub fn new(positions: Vec<f64>) -> Self {
        Self { positions }
    }

    pub fn single(x: f64) -> Self {
        Self { positions: vec![x] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub configurations: Vec<BohmConfiguration>,
}

impl Trajectory {
    pub fn last(&self) -> &BohmConfiguration {
        self.configurations.last().expect("trajectory is never empty")
    }

    pub fn is_time_ordered(&self) -> bool {
        self.times.windows(2).all(|w| w[1] > w[0])
    }

    /// Largest single-step displacement over all particles.
    pub fn max_step(&self) -> f64 {
        self.configurations
            .windows(2)
            .flat_map(|w| {
                w[0].positions
                    .iter()
                    .zip(&w[1].positions)
                    .map(|(a, b)| (b - a).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BohmEnsemble {
    pub members: Vec<BohmConfiguration>,
    pub seed: u64,
}

impl BohmEnsemble {
    /// Coordinates of one particle across all members.
    pub fn coordinates(&self, axis: usize) -> Vec<f64> {
        self.members.iter().map(|m| m.positions[axis]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMethod {
    /// Eighth-order centered differences.
    #[default]
    CenteredDifference,
    /// FFT derivative; assumes the field is periodic-clean at the box edges.
    Spectral,
}

/// Derivative of the whole array along one particle axis.
pub fn gradient(psi: &WaveFunction, axis: usize, method: GradientMethod) -> Vec<Complex64> {
    let grid = psi.grids()[axis];
    let mut out = psi.values().to_vec();
    let shape = psi.shape();
    match method {
        GradientMethod::CenteredDifference => {
            let dx = grid.spacing();
            for_each_line(&shape, &mut out, axis, |line| {
                let d = fd_derivative_line(line, dx);
                line.copy_from_slice(&d);
            });
        }
        GradientMethod::Spectral => {
            let spectral = Spectral::new(grid);
            for_each_line(&shape, &mut out, axis, |line| {
                let d = spectral.derivative(line);
                line.copy_from_slice(&d);
            });
        }
    }
    out
}

/// Precomputed Ψ and ∇Ψ on the grid for repeated velocity queries.
#[derive(Debug, Clone)]
pub struct GuidanceFrame {
    grids: Vec<Grid>,
    values: Vec<Complex64>,
    gradients: Vec<Vec<Complex64>>,
    threshold: f64,
}

impl GuidanceFrame {
    pub fn new(psi: &WaveFunction, method: GradientMethod) -> Self {
        let gradients = (0..psi.n_particles())
            .map(|axis| gradient(psi, axis, method))
            .collect();
        Self {
            grids: psi.grids().to_vec(),
            values: psi.values().to_vec(),
            gradients,
            threshold: NODE_EPS * psi.max_density(),
        }
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Ψ and ∂_axis Ψ at a configuration.
    pub fn sample(&self, cfg: &[f64], axis: usize) -> Result<(Complex64, Complex64)> {
        Ok((
            interpolate_nd(&self.grids, &self.values, cfg)?,
            interpolate_nd(&self.grids, &self.gradients[axis], cfg)?,
        ))
    }

    pub fn velocity_axis(&self, cfg: &[f64], axis: usize) -> Result<f64> {
        let (psi, grad) = self.sample(cfg, axis)?;
        guidance_ratio(psi, grad, self.threshold)
    }

    pub fn velocity(&self, cfg: &[f64]) -> Result<Vec<f64>> {
        (0..self.grids.len())
            .map(|axis| self.velocity_axis(cfg, axis))
            .collect()
    }
}

fn guidance_ratio(psi: Complex64, grad: Complex64, threshold: f64) -> Result<f64> {
    let density = psi.norm_sqr();
    if density <= threshold {
        return Err(Error::NodeProximity {
            density,
            threshold,
        });
    }
    Ok((psi.conj() * grad).im / density)
}

fn check_particle(psi: &WaveFunction, cfg: &BohmConfiguration, i: usize) -> Result<()> {
    if cfg.positions.len() != psi.n_particles() {
        return Err(Error::DimensionMismatch {
            expected: psi.n_particles(),
            got: cfg.positions.len(),
        });
    }
    if i >= psi.n_particles() {
        return Err(Error::SiteOutOfRange {
            site: i,
            n_sites: psi.n_particles(),
        });
    }
    Ok(())
}

/// Guidance velocity of particle `i` from the full configuration-space wave.
pub fn velocity(psi: &WaveFunction, cfg: &BohmConfiguration, i: usize) -> Result<f64> {
    velocity_with(psi, cfg, i, GradientMethod::default())
}

pub fn velocity_with(
    psi: &WaveFunction,
    cfg: &BohmConfiguration,
    i: usize,
    method: GradientMethod,
) -> Result<f64> {
    check_particle(psi, cfg, i)?;
    let grad = gradient(psi, i, method);
    let value = interpolate_nd(psi.grids(), psi.values(), &cfg.positions)?;
    let dvalue = interpolate_nd(psi.grids(), &grad, &cfg.positions)?;
    guidance_ratio(value, dvalue, NODE_EPS * psi.max_density())
}

/// One-particle wave obtained by freezing every other particle at its
/// Bohmian position. Returned unnormalized together with its squared norm.
pub fn conditional_wavefunction(
    psi: &WaveFunction,
    cfg: &BohmConfiguration,
    i: usize,
) -> Result<(WaveFunction, f64)> {
    check_particle(psi, cfg, i)?;
    if psi.n_particles() < 2 {
        return Err(Error::InvalidParameter(
            "conditional wave function needs at least two particles".into(),
        ));
    }
    let grids = psi.grids();
    let shape = psi.shape();
    let weights: Vec<Option<(usize, [f64; 4])>> = grids
        .iter()
        .zip(&cfg.positions)
        .enumerate()
        .map(|(axis, (g, &x))| {
            if axis == i {
                Ok(None)
            } else {
                cubic_weights(g, x).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let others: Vec<usize> = (0..grids.len()).filter(|&a| a != i).collect();
    let n = shape[i];
    let mut slice = vec![Complex64::new(0.0, 0.0); n];
    for combo in 0..4usize.pow(others.len() as u32) {
        let mut digits = vec![0usize; grids.len()];
        let mut w = 1.0;
        let mut c = combo;
        for &axis in &others {
            let (start, ws) = weights[axis].expect("frozen axis has weights");
            let k = c % 4;
            c /= 4;
            w *= ws[k];
            digits[axis] = start + k;
        }
        for (j, s) in slice.iter_mut().enumerate() {
            digits[i] = j;
            let flat = digits
                .iter()
                .zip(&shape)
                .fold(0, |acc, (&d, &dim)| acc * dim + d);
            *s += psi.values()[flat] * w;
        }
    }
    if slice.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(Error::AllZeroSlice);
    }
    let cond = WaveFunction::unnormalized(vec![grids[i]], slice)?;
    let norm = cond.norm_sqr();
    Ok((cond, norm))
}

/// Single-particle guidance law applied to a conditional wave function.
pub fn velocity_conditional(psi_i: &WaveFunction, r: f64) -> Result<f64> {
    if psi_i.n_particles() != 1 {
        return Err(Error::InvalidParameter(
            "conditional velocity needs a one-particle wave".into(),
        ));
    }
    let grid = psi_i.grid();
    let grad = fd_derivative_line(psi_i.values(), grid.spacing());
    let value = interpolate_nd(&[grid], psi_i.values(), &[r])?;
    let dvalue = interpolate_nd(&[grid], &grad, &[r])?;
    guidance_ratio(value, dvalue, NODE_EPS * psi_i.max_density())
}

/// Draws `n` configurations distributed as |Ψ|².
///
/// Grid cells carry piecewise-constant density; a member picks its cell from
/// the joint cumulative weights (equivalent to sampling axis by axis from
/// marginal then conditional weights) and is placed uniformly inside it.
/// Member `m` uses its own substream, so the ensemble does not depend on
/// thread scheduling.
pub fn sample_born(psi: &WaveFunction, n: usize, seed: u64) -> Result<BohmEnsemble> {
    if n == 0 {
        return Err(Error::InvalidParameter("ensemble size must be ≥ 1".into()));
    }
    let cdf = cumulative(&psi.density());
    let total = *cdf.last().expect("nonempty grid");
    if !(total > 0.0) {
        return Err(Error::NotNormalized(0.0));
    }
    let grids = psi.grids().to_vec();
    let shape = psi.shape();
    let members = (0..n)
        .into_par_iter()
        .map(|m| {
            let mut rng = substream(seed, "born", m as u64);
            let u: f64 = rng.gen::<f64>() * total;
            let flat = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let mut rem = flat;
            let mut digits = vec![0usize; shape.len()];
            for axis in (0..shape.len()).rev() {
                digits[axis] = rem % shape[axis];
                rem /= shape[axis];
            }
            let positions = digits
                .iter()
                .zip(&grids)
                .map(|(&d, g)| {
                    let jitter: f64 = rng.gen::<f64>() - 0.5;
                    (g.x(d) + jitter * g.spacing()).clamp(g.x_min, g.x_max)
                })
                .collect();
            BohmConfiguration { positions }
        })
        .collect();
    Ok(BohmEnsemble { members, seed })
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Cumulative distribution of a 1D grid density under the cell model used by
/// [`sample_born`]: cell `j` spans `x_j ± dx/2` with constant density.
#[derive(Debug, Clone)]
pub struct GridCdf {
    grid: Grid,
    cell_mass: Vec<f64>,
    before: Vec<f64>,
}

impl GridCdf {
    pub fn new(grid: Grid, density: &[f64]) -> Self {
        let total: f64 = density.iter().sum();
        let cell_mass: Vec<f64> = density.iter().map(|d| d / total).collect();
        let mut acc = 0.0;
        let before = cell_mass
            .iter()
            .map(|m| {
                let b = acc;
                acc += m;
                b
            })
            .collect();
        Self {
            grid,
            cell_mass,
            before,
        }
    }

    pub fn from_wave(psi: &WaveFunction) -> Self {
        Self::new(psi.grid(), &psi.density())
    }

    pub fn at(&self, x: f64) -> f64 {
        let dx = self.grid.spacing();
        let u = (x - self.grid.x_min) / dx + 0.5;
        if u <= 0.0 {
            return 0.0;
        }
        let j = u.floor() as usize;
        if j >= self.cell_mass.len() {
            return 1.0;
        }
        self.before[j] + self.cell_mass[j] * (u - j as f64)
    }

    /// Smallest grid-cell position whose cumulative mass reaches `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let j = self
            .before
            .iter()
            .zip(&self.cell_mass)
            .position(|(b, m)| b + m >= q)
            .unwrap_or(self.cell_mass.len() - 1);
        let frac = if self.cell_mass[j] > 0.0 {
            (q - self.before[j]) / self.cell_mass[j]
        } else {
            0.5
        };
        self.grid.x(j) + (frac - 0.5) * self.grid.spacing()
    }
}

/// Two-sided Kolmogorov–Smirnov distance between samples and a CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// A time-dependent guidance field.
pub trait GuidanceField {
    fn n_particles(&self) -> usize;
    fn velocity(&self, t: f64, cfg: &[f64]) -> Result<Vec<f64>>;
    /// Smallest grid spacing, for the CFL bound.
    fn spacing(&self) -> f64;
}

/// Stored frames at uniform times; Ψ and ∇Ψ are linearly interpolated in time.
#[derive(Debug, Clone)]
pub struct FrameSeries {
    t0: f64,
    dt: f64,
    frames: Vec<GuidanceFrame>,
}

impl FrameSeries {
    pub fn new(t0: f64, dt: f64, frames: Vec<GuidanceFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidParameter("no frames".into()));
        }
        if frames.len() > 1 && !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("frame spacing {dt}")));
        }
        Ok(Self { t0, dt, frames })
    }

    /// Frames `0..=n_steps` of a split-step propagation.
    pub fn propagate(psi0: &WaveFunction, prop: &SplitStep, n_steps: usize) -> Result<Self> {
        let mut psi = psi0.clone();
        let mut frames = vec![GuidanceFrame::new(&psi, GradientMethod::default())];
        for _ in 0..n_steps {
            prop.step(psi.values_mut());
            frames.push(GuidanceFrame::new(&psi, GradientMethod::default()));
        }
        psi.check_no_aliasing()?;
        Self::new(0.0, prop.dt(), frames)
    }

    /// A single frame held fixed for all times.
    pub fn stationary(psi: &WaveFunction) -> Self {
        Self {
            t0: 0.0,
            dt: 1.0,
            frames: vec![GuidanceFrame::new(psi, GradientMethod::default())],
        }
    }

    pub fn t_end(&self) -> f64 {
        if self.frames.len() == 1 {
            f64::INFINITY
        } else {
            self.t0 + self.dt * (self.frames.len() - 1) as f64
        }
    }
}

impl GuidanceField for FrameSeries {
    fn n_particles(&self) -> usize {
        self.frames[0].grids.len()
    }

    fn spacing(&self) -> f64 {
        self.frames[0]
            .grids
            .iter()
            .map(Grid::spacing)
            .fold(f64::INFINITY, f64::min)
    }

    fn velocity(&self, t: f64, cfg: &[f64]) -> Result<Vec<f64>> {
        if self.frames.len() == 1 {
            return self.frames[0].velocity(cfg);
        }
        let u = (t - self.t0) / self.dt;
        let last = self.frames.len() - 1;
        if u < -1e-9 || u > last as f64 + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "time {t} outside the stored frames"
            )));
        }
        let k = (u.floor().max(0.0) as usize).min(last - 1);
        let s = (u - k as f64).clamp(0.0, 1.0);
        let (a, b) = (&self.frames[k], &self.frames[k + 1]);
        let threshold = (1.0 - s) * a.threshold + s * b.threshold;
        (0..cfg.len())
            .map(|axis| {
                let (pa, ga) = a.sample(cfg, axis)?;
                let (pb, gb) = b.sample(cfg, axis)?;
                guidance_ratio(pa * (1.0 - s) + pb * s, ga * (1.0 - s) + gb * s, threshold)
            })
            .collect()
    }
}

fn check_cfl(v: &[f64], dt: f64, spacing: f64) -> Result<()> {
    for &vi in v {
        let step = vi.abs() * dt;
        if !(step < spacing) {
            return Err(Error::CflViolation { step, spacing });
        }
    }
    Ok(())
}

fn rk4_step(
    field: &dyn GuidanceField,
    t: f64,
    x: &[f64],
    h: f64,
    spacing: f64,
) -> Result<Vec<f64>> {
    let shifted = |base: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, k)| b + s * k).collect()
    };
    let k1 = field.velocity(t, x)?;
    check_cfl(&k1, h, spacing)?;
    let k2 = field.velocity(t + h / 2.0, &shifted(x, &k1, h / 2.0))?;
    let k3 = field.velocity(t + h / 2.0, &shifted(x, &k2, h / 2.0))?;
    let k4 = field.velocity(t + h, &shifted(x, &k3, h))?;
    for k in [&k2, &k3, &k4] {
        check_cfl(k, h, spacing)?;
    }
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// RK4 integration of the guidance ODE from `t = 0` to `duration`.
pub fn integrate(
    field: &dyn GuidanceField,
    cfg0: &BohmConfiguration,
    dt: f64,
    duration: f64,
) -> Result<Trajectory> {
    if cfg0.positions.len() != field.n_particles() {
        return Err(Error::DimensionMismatch {
            expected: field.n_particles(),
            got: cfg0.positions.len(),
        });
    }
    if !(dt > 0.0) || duration < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "dt {dt}, duration {duration}"
        )));
    }
    let steps = (duration / dt).round() as usize;
    let h = if steps == 0 { 0.0 } else { duration / steps as f64 };
    let spacing = field.spacing();
    let mut times = vec![0.0];
    let mut configurations = vec![cfg0.clone()];
    let mut x = cfg0.positions.clone();
    for s in 0..steps {
        let t = s as f64 * h;
        x = rk4_step(field, t, &x, h, spacing)?;
        times.push(t + h);
        configurations.push(BohmConfiguration::new(x.clone()));
    }
    Ok(Trajectory {
        times,
        configurations,
    })
}

/// Result of transporting a 1D ensemble in lockstep with the wave.
#[derive(Debug, Clone)]
pub struct EnsembleTransport {
    pub initial: Vec<f64>,
    pub final_positions: Vec<f64>,
    /// Wave components at the final time (one entry for a scalar wave).
    pub final_components: Vec<WaveFunction>,
    /// Recorded times and member positions (every `record_every` RK4 steps).
    pub record_times: Vec<f64>,
    pub records: Vec<Vec<f64>>,
    /// Total density Σ_c |ψ_c|² on the grid at the recorded times.
    pub record_densities: Vec<Vec<f64>>,
    /// Largest number of crossed member pairs seen at any recorded time.
    pub crossing_pairs: u64,
}

impl EnsembleTransport {
    pub fn final_density(&self) -> Vec<f64> {
        total_density(&self.final_components)
    }
}

fn total_density(components: &[WaveFunction]) -> Vec<f64> {
    let mut rho = components[0].density();
    for c in &components[1..] {
        rho.iter_mut().zip(c.density()).for_each(|(r, d)| *r += d);
    }
    rho
}

/// Ψ and ∂Ψ of every component of a multi-component 1D wave.
struct ComponentFrame {
    frames: Vec<GuidanceFrame>,
    threshold: f64,
}

impl ComponentFrame {
    fn new(components: &[WaveFunction]) -> Self {
        let max = total_density(components).into_iter().fold(0.0, f64::max);
        Self {
            frames: components
                .iter()
                .map(|c| GuidanceFrame::new(c, GradientMethod::default()))
                .collect(),
            threshold: NODE_EPS * max,
        }
    }

    fn velocity(&self, x: f64) -> Result<f64> {
        let grid = &self.frames[0].grids[0];
        let (start, w) = cubic_weights(grid, x)?;
        let mut current = 0.0;
        let mut density = 0.0;
        for f in &self.frames {
            let (mut psi, mut grad) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for (k, wk) in w.iter().enumerate() {
                psi += f.values[start + k] * wk;
                grad += f.gradients[0][start + k] * wk;
            }
            current += (psi.conj() * grad).im;
            density += psi.norm_sqr();
        }
        if density <= self.threshold {
            return Err(Error::NodeProximity {
                density,
                threshold: self.threshold,
            });
        }
        Ok(current / density)
    }
}

/// Moves a 1D ensemble through a split-step evolution.
///
/// Each RK4 step spans two propagator steps so that the start, midpoint and
/// end stages land exactly on computed frames.
pub fn transport_ensemble(
    psi0: &WaveFunction,
    prop: &SplitStep,
    members: &[f64],
    rk_steps: usize,
    record_every: usize,
) -> Result<EnsembleTransport> {
    transport_components(std::slice::from_ref(psi0), prop, members, rk_steps, record_every)
}

/// Lockstep transport guided by a multi-component wave (e.g. a spinor):
/// `v = Σ_c Im(ψ_c*∂ψ_c) / Σ_c |ψ_c|²`. Components evolve independently
/// under the same propagator.
pub fn transport_components(
    components0: &[WaveFunction],
    prop: &SplitStep,
    members: &[f64],
    rk_steps: usize,
    record_every: usize,
) -> Result<EnsembleTransport> {
    if components0.is_empty() || components0.iter().any(|c| c.n_particles() != 1) {
        return Err(Error::InvalidParameter(
            "lockstep transport needs one-dimensional components".into(),
        ));
    }
    let record_every = record_every.max(1);
    let h = 2.0 * prop.dt();
    let spacing = components0[0].grid().spacing();
    let mut comps = components0.to_vec();
    let mut frame0 = ComponentFrame::new(&comps);
    let mut positions = members.to_vec();
    let order = sort_order(members);

    let mut record_times = vec![0.0];
    let mut records = vec![positions.clone()];
    let mut record_densities = vec![total_density(&comps)];
    let mut crossing_pairs = 0;

    for step in 0..rk_steps {
        comps.iter_mut().for_each(|c| prop.step(c.values_mut()));
        let frame_mid = ComponentFrame::new(&comps);
        comps.iter_mut().for_each(|c| prop.step(c.values_mut()));
        let frame_end = ComponentFrame::new(&comps);
        let frames = [&frame0, &frame_mid, &frame_end];
        positions = positions
            .par_iter()
            .map(|&x| rk4_frames(&frames, x, h, spacing))
            .collect::<Result<_>>()?;
        frame0 = frame_end;
        if (step + 1) % record_every == 0 || step + 1 == rk_steps {
            let ordered: Vec<f64> = order.iter().map(|&i| positions[i]).collect();
            crossing_pairs = crossing_pairs.max(count_inversions(&ordered));
            record_times.push((step + 1) as f64 * h);
            records.push(positions.clone());
            record_densities.push(total_density(&comps));
        }
    }
    for c in &comps {
        c.check_no_aliasing()?;
    }
    Ok(EnsembleTransport {
        initial: members.to_vec(),
        final_positions: positions,
        final_components: comps,
        record_times,
        records,
        record_densities,
        crossing_pairs,
    })
}

fn rk4_frames(frames: &[&ComponentFrame; 3], x: f64, h: f64, spacing: f64) -> Result<f64> {
    let k1 = frames[0].velocity(x)?;
    let k2 = frames[1].velocity(x + h / 2.0 * k1)?;
    let k3 = frames[1].velocity(x + h / 2.0 * k2)?;
    let k4 = frames[2].velocity(x + h * k3)?;
    if check_cfl(&[k1, k2, k3, k4], h, spacing).is_ok() {
        return Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    }
    // Near a node the velocity outruns the frame spacing: substep, with the
    // field between frames interpolated quadratically in time.
    let mut m = 2;
    loop {
        match rk4_substeps(frames, x, h, spacing, m) {
            Err(Error::CflViolation { .. }) if m < MAX_SUBSTEPS => m *= 2,
            other => return other,
        }
    }
}

const MAX_SUBSTEPS: usize = 4096;

fn rk4_substeps(
    frames: &[&ComponentFrame; 3],
    mut x: f64,
    h: f64,
    spacing: f64,
    m: usize,
) -> Result<f64> {
    let v = |tau: f64, x: f64| -> Result<f64> {
        let l0 = 2.0 * (tau - 0.5) * (tau - 1.0);
        let l1 = -4.0 * tau * (tau - 1.0);
        let l2 = 2.0 * tau * (tau - 0.5);
        let mut out = 0.0;
        for (f, l) in frames.iter().zip([l0, l1, l2]) {
            if l != 0.0 {
                out += l * f.velocity(x)?;
            }
        }
        Ok(out)
    };
    let hs = h / m as f64;
    let dtau = 1.0 / m as f64;
    for j in 0..m {
        let tau = j as f64 * dtau;
        let k1 = v(tau, x)?;
        let k2 = v(tau + dtau / 2.0, x + hs / 2.0 * k1)?;
        let k3 = v(tau + dtau / 2.0, x + hs / 2.0 * k2)?;
        let k4 = v(tau + dtau, x + hs * k3)?;
        check_cfl(&[k1, k2, k3, k4], hs, spacing)?;
        x += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(x)
}

pub(crate) fn sort_order(xs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    idx
}

/// Number of pairs `i < j` with `xs[i] > xs[j]` (merge sort).
pub fn count_inversions(xs: &[f64]) -> u64 {
    fn go(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
        let n = v.len();
        if n < 2 {
            return 0;
        }
        let mid = n / 2;
        let mut count = go(&mut v[..mid], buf) + go(&mut v[mid..], buf);
        buf.clear();
        let (mut i, mut j) = (0, mid);
        while i < mid && j < n {
            if v[i] <= v[j] {
                buf.push(v[i]);
                i += 1;
            } else {
                buf.push(v[j]);
                count += (mid - i) as u64;
                j += 1;
            }
        }
        buf.extend_from_slice(&v[i..mid]);
        buf.extend_from_slice(&v[j..n]);
        v.copy_from_slice(buf);
        count
    }
    let mut v = xs.to_vec();
    go(&mut v, &mut Vec::with_capacity(xs.len()))
}

/// Acceleration from the quantum-potential form of the dynamics:
/// `a_j = −∂_j [ Σ_k −½ ∇_k²√ρ/√ρ + V ]` with unit masses.
///
/// `rho` and the optional potential live on the product of `grids`.
pub fn newtonian_acceleration(
    grids: &[Grid],
    rho: &[f64],
    potential: Option<&[f64]>,
    cfg: &BohmConfiguration,
) -> Result<Vec<f64>> {
    let shape: Vec<usize> = grids.iter().map(|g| g.n_points).collect();
    let expected: usize = shape.iter().product();
    if rho.len() != expected || potential.is_some_and(|v| v.len() != expected) {
        return Err(Error::DimensionMismatch {
            expected,
            got: rho.len(),
        });
    }
    if cfg.positions.len() != grids.len() {
        return Err(Error::DimensionMismatch {
            expected: grids.len(),
            got: cfg.positions.len(),
        });
    }
    let as_complex = |v: &[f64]| -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    };
    let max_rho = rho.iter().cloned().fold(0.0, f64::max);
    let threshold = NODE_EPS * max_rho;
    let rho_here = interpolate_nd(grids, &as_complex(rho), &cfg.positions)?.re;
    if rho_here <= threshold {
        return Err(Error::NodeProximity {
            density: rho_here,
            threshold,
        });
    }

    let amp: Vec<f64> = rho.iter().map(|r| r.max(0.0).sqrt()).collect();
    let mut laplacian = vec![0.0; expected];
    for (axis, g) in grids.iter().enumerate() {
        let mut field = as_complex(&amp);
        let dx = g.spacing();
        for_each_line(&shape, &mut field, axis, |line| {
            let re: Vec<f64> = line.iter().map(|v| v.re).collect();
            let d2 = fd_second_derivative_line(&re, dx);
            for (l, d) in line.iter_mut().zip(d2) {
                *l = Complex64::new(d, 0.0);
            }
        });
        laplacian
            .iter_mut()
            .zip(&field)
            .for_each(|(acc, f)| *acc += f.re);
    }
    let total_potential: Vec<f64> = laplacian
        .iter()
        .zip(&amp)
        .enumerate()
        .map(|(idx, (lap, a))| {
            let q = if *a > 0.0 { -0.5 * lap / a } else { 0.0 };
            let q = if q.is_finite() { q } else { 0.0 };
            q + potential.map_or(0.0, |v| v[idx])
        })
        .collect();
    (0..grids.len())
        .map(|axis| {
            let mut field = as_complex(&total_potential);
            let dx = grids[axis].spacing();
            for_each_line(&shape, &mut field, axis, |line| {
                let re: Vec<f64> = line.iter().map(|v| v.re).collect();
                let d = fd_derivative_real(&re, dx);
                for (l, d) in line.iter_mut().zip(d) {
                    *l = Complex64::new(d, 0.0);
                }
            });
            Ok(-interpolate_nd(grids, &field, &cfg.positions)?.re)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavepacket::{evolve_free, gaussian_packet, PacketSpec};

    fn grid() -> Grid {
        Grid::standard()
    }

    #[test]
    fn plane_wave_velocity_is_k() {
        let g = Grid::new(-4.0, 4.0, 512).unwrap();
        let psi = WaveFunction::from_fn(g, |x| Complex64::from_polar(1.0, 3.0 * x)).unwrap();
        let v = velocity(&psi, &BohmConfiguration::single(0.123), 0).unwrap();
        assert!((v - 3.0).abs() < 1e-10);
    }

    #[test]
    fn real_wave_has_zero_velocity() {
        let psi = gaussian_packet(PacketSpec::at(0.0, 0.5), grid()).unwrap();
        let v = velocity(&psi, &BohmConfiguration::single(0.3), 0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn packet_center_rides_at_group_velocity() {
        let psi = gaussian_packet(PacketSpec::moving(0.0, 0.5, 1.7), grid()).unwrap();
        let v = velocity(&psi, &BohmConfiguration::single(0.0), 0).unwrap();
        assert!((v - 1.7).abs() < 1e-3);
    }

    #[test]
    fn node_is_rejected() {
        let g = grid();
        let psi = WaveFunction::from_fn(g, |x| Complex64::new(x * (-x * x).exp(), 0.0)).unwrap();
        let r = velocity(&psi, &BohmConfiguration::single(0.0), 0);
        assert!(matches!(r, Err(Error::NodeProximity { .. })));
    }

    #[test]
    fn spectral_and_difference_velocities_agree() {
        let psi = gaussian_packet(PacketSpec::moving(0.2, 0.6, -1.3), grid()).unwrap();
        let cfg = BohmConfiguration::single(0.55);
        let a = velocity_with(&psi, &cfg, 0, GradientMethod::CenteredDifference).unwrap();
        let b = velocity_with(&psi, &cfg, 0, GradientMethod::Spectral).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    fn small_grid() -> Grid {
        Grid::new(-8.0, 8.0, 128).unwrap()
    }

    fn packet(c: f64, s: f64, k: f64) -> WaveFunction {
        gaussian_packet(PacketSpec::moving(c, s, k), small_grid()).unwrap()
    }

    #[test]
    fn product_state_conditional_is_factor() {
        let a = packet(-1.0, 0.7, 0.5);
        let b = packet(1.0, 0.9, -0.3);
        let psi = WaveFunction::product(&[&a, &b]).unwrap();
        for x2 in [0.4, 1.3, 2.0] {
            let (cond, norm) =
                conditional_wavefunction(&psi, &BohmConfiguration::new(vec![0.0, x2]), 0)
                    .unwrap();
            assert!(norm > 0.0);
            let scaled = WaveFunction::normalized(vec![cond.grid()], cond.into_values()).unwrap();
            assert!(scaled.fidelity(&a).unwrap() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn entangled_conditional_follows_partner_packet() {
        let l = packet(-2.5, 0.4, 0.0);
        let r = packet(2.5, 0.4, 0.0);
        let ll = WaveFunction::product(&[&l, &l]).unwrap();
        let rr = WaveFunction::product(&[&r, &r]).unwrap();
        let values = ll
            .values()
            .iter()
            .zip(rr.values())
            .map(|(a, b)| a + b)
            .collect();
        let psi = WaveFunction::normalized(ll.grids().to_vec(), values).unwrap();
        let (cond, _) =
            conditional_wavefunction(&psi, &BohmConfiguration::new(vec![0.0, -2.4]), 0).unwrap();
        let cond = WaveFunction::normalized(vec![cond.grid()], cond.into_values()).unwrap();
        assert!(cond.fidelity(&l).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn conditional_needs_two_particles() {
        let psi = packet(0.0, 0.5, 0.0);
        assert!(conditional_wavefunction(&psi, &BohmConfiguration::single(0.0), 0).is_err());
    }

    #[test]
    fn conditional_velocity_matches_full_velocity() {
        let a = packet(-1.0, 0.8, 1.0);
        let b = packet(0.5, 0.7, -0.5);
        let c = packet(1.0, 0.6, 0.3);
        let ab = WaveFunction::product(&[&a, &b]).unwrap();
        let ca = WaveFunction::product(&[&c, &a]).unwrap();
        let values = ab
            .values()
            .iter()
            .zip(ca.values())
            .map(|(x, y)| x + y * Complex64::new(0.0, 0.8))
            .collect();
        let psi = WaveFunction::normalized(ab.grids().to_vec(), values).unwrap();
        let cfg = BohmConfiguration::new(vec![-0.37, 0.81]);
        for i in 0..2 {
            let full = velocity(&psi, &cfg, i).unwrap();
            let (cond, _) = conditional_wavefunction(&psi, &cfg, i).unwrap();
            let via_cond = velocity_conditional(&cond, cfg.positions[i]).unwrap();
            assert!((full - via_cond).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_density_samples_pass_ks() {
        let g = Grid::new(0.0, 1.0, 1024).unwrap();
        let psi = WaveFunction::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        let n = 10_000;
        let ens = sample_born(&psi, n, 5).unwrap();
        let d = ks_distance(&ens.coordinates(0), |x| x.clamp(0.0, 1.0));
        assert!(d < 1.63 / (n as f64).sqrt(), "KS {d}");
    }

    #[test]
    fn narrow_packet_samples_stay_close() {
        let psi = gaussian_packet(PacketSpec::at(0.7, 0.05), grid()).unwrap();
        let ens = sample_born(&psi, 2000, 1).unwrap();
        assert!(ens.coordinates(0).iter().all(|x| (x - 0.7).abs() < 6.0 * 0.05));
    }

    #[test]
    fn two_packets_split_evenly() {
        let g = grid();
        let psi = WaveFunction::from_fn(g, |x| {
            Complex64::new(
                (-(x - 2.0).powi(2) / 0.16).exp() + (-(x + 2.0).powi(2) / 0.16).exp(),
                0.0,
            )
        })
        .unwrap();
        let n = 10_000;
        let right = sample_born(&psi, n, 9)
            .unwrap()
            .coordinates(0)
            .iter()
            .filter(|&&x| x > 0.0)
            .count();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((right as f64 / n as f64 - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn sampling_is_deterministic() {
        let psi = packet(0.0, 0.5, 1.0);
        assert_eq!(sample_born(&psi, 50, 3).unwrap(), sample_born(&psi, 50, 3).unwrap());
        assert_ne!(sample_born(&psi, 50, 3).unwrap(), sample_born(&psi, 50, 4).unwrap());
    }

    #[test]
    fn stationary_real_state_does_not_move() {
        let psi = gaussian_packet(PacketSpec::at(0.0, 0.5), grid()).unwrap();
        let field = FrameSeries::stationary(&psi);
        let traj = integrate(&field, &BohmConfiguration::single(0.4), 0.01, 1.0).unwrap();
        assert!(traj.configurations.iter().all(|c| c.positions[0] == 0.4));
        assert!(traj.is_time_ordered());
    }

    fn moving_packet_frames(dt: f64) -> FrameSeries {
        let psi = gaussian_packet(PacketSpec::moving(-2.0, 0.8, 2.0), grid()).unwrap();
        let prop = SplitStep::new(psi.grid(), dt, None).unwrap();
        FrameSeries::propagate(&psi, &prop, (1.0 / dt).round() as usize).unwrap()
    }

    #[test]
    fn packet_center_trajectory_moves_two_units() {
        let frames = moving_packet_frames(0.005);
        let traj = integrate(&frames, &BohmConfiguration::single(-2.0), 0.005, 1.0).unwrap();
        let end = traj.last().positions[0];
        assert!((end - 0.0).abs() < 1e-3, "end {end}");
        assert!(traj.max_step() < 10.0 * grid().spacing());
    }

    #[test]
    fn halving_dt_converges() {
        let start = BohmConfiguration::single(-1.6);
        let a = integrate(&moving_packet_frames(0.005), &start, 0.005, 1.0).unwrap();
        let b = integrate(&moving_packet_frames(0.0025), &start, 0.0025, 1.0).unwrap();
        let d = (a.last().positions[0] - b.last().positions[0]).abs();
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn cfl_violation_detected() {
        let psi = gaussian_packet(PacketSpec::moving(0.0, 0.8, 5.0), grid()).unwrap();
        let field = FrameSeries::stationary(&psi);
        let r = integrate(&field, &BohmConfiguration::single(0.0), 0.01, 0.1);
        assert!(matches!(r, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn trajectories_are_bitwise_reproducible() {
        let frames = moving_packet_frames(0.005);
        let a = integrate(&frames, &BohmConfiguration::single(-2.3), 0.005, 0.5).unwrap();
        let b = integrate(&frames, &BohmConfiguration::single(-2.3), 0.005, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spreading_gaussian_stays_born_distributed() {
        let psi = gaussian_packet(PacketSpec::moving(-1.0, 0.4, 1.0), grid()).unwrap();
        let prop = SplitStep::new(psi.grid(), 0.001, None).unwrap();
        let ens = sample_born(&psi, 4000, 2).unwrap();
        let out = transport_ensemble(&psi, &prop, &ens.coordinates(0), 500, 100).unwrap();
        let cdf = GridCdf::new(psi.grid(), &out.final_density());
        let d = ks_distance(&out.final_positions, |x| cdf.at(x));
        assert!(d < 0.03, "KS {d}");
        assert_eq!(out.crossing_pairs, 0);
    }

    #[test]
    fn inversion_count() {
        assert_eq!(count_inversions(&[1.0, 2.0, 3.0]), 0);
        assert_eq!(count_inversions(&[3.0, 2.0, 1.0]), 3);
        assert_eq!(count_inversions(&[1.0, 3.0, 2.0, 4.0]), 1);
    }

    #[test]
    fn quantum_potential_vanishes_for_constant_density() {
        let g = Grid::new(-4.0, 4.0, 256).unwrap();
        let rho = vec![0.125; 256];
        let v: Vec<f64> = g.points().map(|x| 0.5 * x * x).collect();
        let a = newtonian_acceleration(&[g], &rho, Some(&v), &BohmConfiguration::single(0.7))
            .unwrap();
        assert!((a[0] + 0.7).abs() < 1e-9);
        let free = newtonian_acceleration(&[g], &rho, None, &BohmConfiguration::single(0.7))
            .unwrap();
        assert!(free[0].abs() < 1e-9);
    }

    #[test]
    fn gaussian_center_has_zero_acceleration() {
        let psi = gaussian_packet(PacketSpec::at(0.0, 0.5), grid()).unwrap();
        let a = newtonian_acceleration(&[psi.grid()], &psi.density(), None, &BohmConfiguration::single(0.0))
            .unwrap();
        assert!(a[0].abs() < 1e-8);
    }

    #[test]
    fn trajectory_acceleration_matches_quantum_force() {
        let sigma = 0.5;
        let psi0 = gaussian_packet(PacketSpec::at(0.0, sigma), grid()).unwrap();
        let dt = 0.002;
        let prop = SplitStep::new(psi0.grid(), dt, None).unwrap();
        let frames = FrameSeries::propagate(&psi0, &prop, 500).unwrap();
        let traj = integrate(&frames, &BohmConfiguration::single(0.6), dt, 1.0).unwrap();
        // second difference around t = 0.5
        let k = 250;
        let x: Vec<f64> = traj.configurations.iter().map(|c| c.positions[0]).collect();
        let fd_acc = (x[k + 1] - 2.0 * x[k] + x[k - 1]) / (dt * dt);
        let psi_t = evolve_free(&psi0, 0.5).unwrap();
        let q_acc = newtonian_acceleration(
            &[psi_t.grid()],
            &psi_t.density(),
            None,
            &BohmConfiguration::single(x[k]),
        )
        .unwrap()[0];
        assert!(((fd_acc - q_acc) / q_acc).abs() < 0.01, "{fd_acc} vs {q_acc}");
        // closed form: x(t) = x0 σ(t)/σ0
        let sig = |t: f64| sigma * (1.0 + (t / (2.0 * sigma * sigma)).powi(2)).sqrt();
        assert!((x[k] - 0.6 * sig(0.5) / sigma).abs() < 1e-5, "{} vs {}", x[k], 0.6 * sig(0.5) / sigma);
    }
}
