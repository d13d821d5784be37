//! Spontaneous-localization ("hit") dynamics.
//!
//! A hit multiplies the wave function along one particle coordinate by
//! `exp(−(r−c)²/2d²)` and renormalizes. With this amplitude convention a hit
//! centred on one branch of a two-branch superposition separated by `l`
//! multiplies the other branch's amplitude by exactly `exp(−l²/2d²)`.
//!
//! Macroscopic pointers are handled in a compressed form: two branch
//! amplitudes plus per-particle branch offsets. Ratios are kept in log space
//! because realistic parameters underflow double precision.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavepacket::{kinetic_energy, Grid, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrwParams {
    /// Mean time between hits of a single particle.
    pub tau: f64,
    /// Localization width.
    pub d: f64,
}

impl GrwParams {
    pub fn new(tau: f64, d: f64) -> Result<Self> {
        if !(tau > 0.0) || !(d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need tau > 0 and d > 0, got tau={tau}, d={d}"
            )));
        }
        Ok(Self { tau, d })
    }

    /// Laboratory values in cgs: τ = 10⁸ yr, d = 10⁻⁵ cm.
    pub fn physical() -> Self {
        Self {
            tau: 1e8 * 365.25 * 86400.0,
            d: 1e-5,
        }
    }
}

/// A scheduled hit before its centre is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduledHit {
    pub time: f64,
    pub particle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitEvent {
    pub time: f64,
    pub particle: usize,
    pub center: f64,
}

/// Independent Poisson clocks of rate 1/τ per particle, merged by time.
pub fn sample_hit_schedule(
    n_particles: usize,
    duration: f64,
    params: &GrwParams,
    rng: &mut impl Rng,
) -> Vec<ScheduledHit> {
    let mut hits = Vec::new();
    if !(duration > 0.0) {
        return hits;
    }
    let gap = Exp::new(1.0 / params.tau).expect("tau validated positive");
    for particle in 0..n_particles {
        let mut t = gap.sample(rng);
        while t <= duration {
            hits.push(ScheduledHit { time: t, particle });
            t += gap.sample(rng);
        }
    }
    hits.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.particle.cmp(&b.particle)));
    hits
}

/// The first `n_hits` events of the merged process: total rate n/τ, each hit
/// landing on a uniformly chosen particle. Empty when τ is infinite.
pub fn sample_first_hits(
    n_particles: usize,
    n_hits: usize,
    params: &GrwParams,
    rng: &mut impl Rng,
) -> Vec<ScheduledHit> {
    let rate = n_particles as f64 / params.tau;
    if n_particles == 0 || !(rate > 0.0) {
        return Vec::new();
    }
    let gap = Exp::new(rate).expect("rate positive");
    let mut t = 0.0;
    (0..n_hits)
        .map(|_| {
            t += gap.sample(rng);
            ScheduledHit {
                time: t,
                particle: rng.gen_range(0..n_particles),
            }
        })
        .collect()
}

/// Draws a hit centre from the marginal |Ψ|² of particle `i`.
pub fn sample_hit_center(psi: &WaveFunction, i: usize, rng: &mut impl Rng) -> Result<f64> {
    if i >= psi.n_particles() {
        return Err(Error::SiteOutOfRange {
            site: i,
            n_sites: psi.n_particles(),
        });
    }
    let marginal = psi.marginal(i);
    let total: f64 = marginal.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut cell = marginal.len() - 1;
    for (j, m) in marginal.iter().enumerate() {
        acc += m;
        if acc > u {
            cell = j;
            break;
        }
    }
    let grid = psi.grids()[i];
    let jitter: f64 = rng.gen::<f64>() - 0.5;
    Ok((grid.x(cell) + jitter * grid.spacing()).clamp(grid.x_min, grid.x_max))
}

/// Hit multiplier `exp(−(r−c)²/2d²)`.
pub fn hit_profile(r: f64, center: f64, d: f64) -> f64 {
    (-(r - center).powi(2) / (2.0 * d * d)).exp()
}

/// Multiplies Ψ by the hit Gaussian along coordinate `i` and renormalizes.
pub fn apply_hit(psi: &WaveFunction, i: usize, center: f64, d: f64) -> Result<WaveFunction> {
    if i >= psi.n_particles() {
        return Err(Error::SiteOutOfRange {
            site: i,
            n_sites: psi.n_particles(),
        });
    }
    let grid = psi.grids()[i];
    if !(d > grid.spacing()) {
        return Err(Error::InvalidParameter(format!(
            "hit width {d} must exceed the grid spacing {}",
            grid.spacing()
        )));
    }
    let profile: Vec<f64> = grid.points().map(|x| hit_profile(x, center, d)).collect();
    let shape = psi.shape();
    let stride: usize = shape[i + 1..].iter().product();
    let n = shape[i];
    let values: Vec<Complex64> = psi
        .values()
        .iter()
        .enumerate()
        .map(|(flat, v)| v * profile[(flat / stride) % n])
        .collect();
    let out = WaveFunction::unnormalized(psi.grids().to_vec(), values)?;
    let norm = out.norm_sqr().sqrt();
    if !(norm >= 1e-300) {
        return Err(Error::DegenerateHit(norm));
    }
    WaveFunction::normalized(out.grids().to_vec(), out.into_values())
}

/// Amplitude factor on a branch a distance `l` from the hit centre.
pub fn tail_ratio(l: f64, d: f64) -> f64 {
    log_tail_ratio(l, d).exp()
}

pub fn log_tail_ratio(l: f64, d: f64) -> f64 {
    -(l * l) / (2.0 * d * d)
}

/// Relative suppression across an electron cloud of size `cloud` in the tail
/// branch, to first order in `cloud/l`.
pub fn tail_disturbance(l: f64, cloud: f64, d: f64) -> f64 {
    log_tail_disturbance(l, cloud, d).exp()
}

pub fn log_tail_disturbance(l: f64, cloud: f64, d: f64) -> f64 {
    -(l * cloud) / (d * d)
}

/// The same ratio without dropping the `cloud²` term.
pub fn log_tail_disturbance_exact(l: f64, cloud: f64, d: f64) -> f64 {
    log_tail_ratio(l + cloud, d) - log_tail_ratio(l, d)
}

/// Geometry of a macroscopic two-branch record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointerModel {
    pub n_particles: usize,
    /// Displacement of each particle between the two branches.
    pub separation: f64,
    /// Electron-cloud size inside each atom.
    pub internal_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Display {
    /// Branches differ by `l ≫ d`.
    Pointer,
    /// Branches differ by much less than `d`.
    Screen,
}

impl PointerModel {
    pub fn display(&self, d: f64) -> Display {
        if self.separation > d {
            Display::Pointer
        } else {
            Display::Screen
        }
    }
}

/// Compressed two-branch state: `Σ_b a_b Π_j φ(r_j − q_j − δ_b)`.
///
/// Each particle sits at a branch-dependent offset (0 or `separation`), with
/// Gaussian position spread `spread` (0 for a rigid pointer). Only the log
/// branch amplitudes change under hits; common factors drop out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointerState {
    pub model: PointerModel,
    pub log_amplitudes: [f64; 2],
    /// Accumulated internal-disturbance log factor of each branch.
    pub log_disturbance: [f64; 2],
    pub spread: f64,
}

impl PointerState {
    /// Superposition with branch weights `(w, 1 − w)`.
    pub fn superposition(model: PointerModel, weight0: f64) -> Result<Self> {
        if !(weight0 > 0.0 && weight0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "branch weight {weight0} outside (0, 1)"
            )));
        }
        Ok(Self {
            model,
            log_amplitudes: [0.5 * weight0.ln(), 0.5 * (1.0 - weight0).ln()],
            log_disturbance: [0.0; 2],
            spread: 0.0,
        })
    }

    fn offset(&self, branch: usize) -> f64 {
        if branch == 0 {
            0.0
        } else {
            self.model.separation
        }
    }

    /// Normalized branch weights.
    pub fn weights(&self) -> [f64; 2] {
        let m = self.log_amplitudes[0].max(self.log_amplitudes[1]);
        let w0 = (2.0 * (self.log_amplitudes[0] - m)).exp();
        let w1 = (2.0 * (self.log_amplitudes[1] - m)).exp();
        [w0 / (w0 + w1), w1 / (w0 + w1)]
    }

    /// ln(|a_minor| / |a_major|), always ≤ 0.
    pub fn log_branch_ratio(&self) -> f64 {
        -(self.log_amplitudes[0] - self.log_amplitudes[1]).abs()
    }

    /// Hit centre relative to the particle's branch-0 site: pick a branch by
    /// weight, then draw from that branch's position spread.
    pub fn sample_center(&self, rng: &mut impl Rng) -> f64 {
        let branch = if rng.gen::<f64>() < self.weights()[0] { 0 } else { 1 };
        let z: f64 = StandardNormal.sample(rng);
        self.offset(branch) + self.spread * z
    }

    /// Applies a hit at offset `center` (relative to the particle's branch-0
    /// site) with width `d`. Each branch amplitude is scaled by the norm of
    /// its hit particle's Gaussian after multiplication.
    pub fn apply_hit(&mut self, center: f64, d: f64) {
        let width2 = d * d + 2.0 * self.spread * self.spread;
        for b in 0..2 {
            let dist = self.offset(b) - center;
            self.log_amplitudes[b] += -(dist * dist) / (2.0 * width2);
            self.log_disturbance[b] += log_tail_disturbance(dist.abs(), self.model.internal_width, d);
        }
        let m = self.log_amplitudes[0].max(self.log_amplitudes[1]);
        self.log_amplitudes[0] -= m;
        self.log_amplitudes[1] -= m;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSample {
    pub time: f64,
    pub weights: [f64; 2],
    pub log_branch_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseRun {
    pub final_state: PointerState,
    pub hits: Vec<HitEvent>,
    /// Branch weights at t = 0 and after every hit.
    pub trajectory: Vec<WeightSample>,
}

impl CollapseRun {
    pub fn first_hit_time(&self) -> Option<f64> {
        self.hits.first().map(|h| h.time)
    }

    /// CSV with columns `t,hit_particle,hit_center,log_branch_ratio`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,hit_particle,hit_center,log_branch_ratio")?;
        for (hit, sample) in self.hits.iter().zip(&self.trajectory[1..]) {
            writeln!(
                w,
                "{},{},{},{}",
                hit.time, hit.particle, hit.center, sample.log_branch_ratio
            )?;
        }
        Ok(())
    }
}

/// Runs a pointer superposition through a given hit schedule.
pub fn run_schedule(
    initial: &PointerState,
    schedule: &[ScheduledHit],
    params: &GrwParams,
    rng: &mut impl Rng,
) -> CollapseRun {
    let mut state = initial.clone();
    let mut trajectory = vec![WeightSample {
        time: 0.0,
        weights: state.weights(),
        log_branch_ratio: state.log_branch_ratio(),
    }];
    let mut hits = Vec::with_capacity(schedule.len());
    for s in schedule {
        let center = state.sample_center(rng);
        state.apply_hit(center, params.d);
        hits.push(HitEvent {
            time: s.time,
            particle: s.particle,
            center,
        });
        trajectory.push(WeightSample {
            time: s.time,
            weights: state.weights(),
            log_branch_ratio: state.log_branch_ratio(),
        });
    }
    CollapseRun {
        final_state: state,
        hits,
        trajectory,
    }
}

/// Samples a schedule for the pointer's particles and applies it.
pub fn run_collapse(
    initial: &PointerState,
    params: &GrwParams,
    duration: f64,
    rng: &mut impl Rng,
) -> CollapseRun {
    let schedule = sample_hit_schedule(initial.model.n_particles, duration, params, rng);
    run_schedule(initial, &schedule, params, rng)
}

/// Mean kinetic-energy change per hit on a grid state. Hits are centred by
/// Born sampling and applied in order. There is no reference bound, so this is
/// reported only.
pub fn energy_drift_per_hit(
    psi: &WaveFunction,
    n_hits: usize,
    d: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    if n_hits == 0 {
        return Ok(0.0);
    }
    let mut state = psi.clone();
    let start = kinetic_energy(&state);
    for k in 0..n_hits {
        let i = k % state.n_particles();
        let c = sample_hit_center(&state, i, rng)?;
        state = apply_hit(&state, i, c, d)?;
    }
    Ok((kinetic_energy(&state) - start) / n_hits as f64)
}

/// Grid check that a width `d` hit is resolvable.
pub fn check_resolvable(grid: &Grid, d: f64) -> Result<()> {
    if d > grid.spacing() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "hit width {d} must exceed the grid spacing {}",
            grid.spacing()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::wavepacket::{gaussian_packet, PacketSpec};

    #[test]
    fn schedule_mean_count() {
        let p = GrwParams::new(1.0, 0.5).unwrap();
        let mut rng = substream(1, "sched", 0);
        let hits = sample_hit_schedule(1000, 1.0, &p, &mut rng);
        assert!((hits.len() as f64 - 1000.0).abs() < 3.0 * 1000f64.sqrt());
        assert!(hits.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn zero_duration_is_empty() {
        let p = GrwParams::new(1.0, 0.5).unwrap();
        assert!(sample_hit_schedule(10, 0.0, &p, &mut substream(1, "s", 0)).is_empty());
    }

    #[test]
    fn poisson_dispersion() {
        // counts per particle over a window of 1τ, 10⁴ particles
        let p = GrwParams::new(1.0, 0.5).unwrap();
        let hits = sample_hit_schedule(10_000, 1.0, &p, &mut substream(2, "disp", 0));
        let mut counts = vec![0f64; 10_000];
        for h in &hits {
            counts[h.particle] += 1.0;
        }
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
        let ratio = var / mean;
        assert!((0.9..=1.1).contains(&ratio), "{ratio}");
    }

    #[test]
    fn inter_arrival_times_are_exponential() {
        let tau = 2.0;
        let p = GrwParams::new(tau, 0.5).unwrap();
        let hits = sample_hit_schedule(1, 2.0e4, &p, &mut substream(3, "gaps", 0));
        let gaps: Vec<f64> = std::iter::once(hits[0].time)
            .chain(hits.windows(2).map(|w| w[1].time - w[0].time))
            .collect();
        assert!(gaps.len() > 9000);
        // 20 equiprobable bins of Exp(τ)
        let bins = 20;
        let mut observed = vec![0f64; bins];
        for g in &gaps {
            let u = 1.0 - (-g / tau).exp();
            observed[((u * bins as f64) as usize).min(bins - 1)] += 1.0;
        }
        let expected = gaps.len() as f64 / bins as f64;
        let chi2: f64 = observed.iter().map(|o| (o - expected).powi(2) / expected).sum();
        // 1% critical value, 19 degrees of freedom
        assert!(chi2 < 36.19, "chi2 {chi2}");
    }

    fn two_packets(a0: f64, a1: f64, c0: f64, c1: f64, s: f64) -> WaveFunction {
        let g = Grid::standard();
        let p0 = gaussian_packet(PacketSpec::at(c0, s), g).unwrap();
        let p1 = gaussian_packet(PacketSpec::at(c1, s), g).unwrap();
        let v = p0
            .values()
            .iter()
            .zip(p1.values())
            .map(|(x, y)| x * a0 + y * a1)
            .collect();
        WaveFunction::normalized(vec![g], v).unwrap()
    }

    #[test]
    fn centers_follow_branch_weights() {
        for (w, seed) in [(0.5f64, 4), (0.9, 5)] {
            let psi = two_packets(w.sqrt(), (1.0 - w).sqrt(), -3.0, 3.0, 0.2);
            let mut rng = substream(seed, "centers", 0);
            let n = 10_000;
            let left = (0..n)
                .filter(|_| sample_hit_center(&psi, 0, &mut rng).unwrap() < 0.0)
                .count() as f64
                / n as f64;
            let sigma = (w * (1.0 - w) / n as f64).sqrt();
            assert!((left - w).abs() < 3.0 * sigma, "{left} vs {w}");
        }
    }

    #[test]
    fn single_packet_centers_are_local() {
        let psi = gaussian_packet(PacketSpec::at(1.0, 0.3), Grid::standard()).unwrap();
        let mut rng = substream(6, "c", 0);
        // 4σ excursions are not rare over 2000 draws (p ≈ 0.12); 5σ is
        for _ in 0..2000 {
            let c = sample_hit_center(&psi, 0, &mut rng).unwrap();
            assert!((c - 1.0).abs() < 5.0 * 0.3, "{c}");
        }
    }

    #[test]
    fn wide_hit_barely_disturbs_narrow_packet() {
        let psi = gaussian_packet(PacketSpec::at(0.0, 0.05), Grid::standard()).unwrap();
        let out = apply_hit(&psi, 0, 0.0, 2.0).unwrap();
        assert!(out.fidelity(&psi).unwrap() > 0.999);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hit_on_uniform_state_is_the_gaussian() {
        let g = Grid::standard();
        let flat = WaveFunction::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        let out = apply_hit(&flat, 0, 0.5, 1.0).unwrap();
        let gauss =
            WaveFunction::from_fn(g, |x| Complex64::new(hit_profile(x, 0.5, 1.0), 0.0)).unwrap();
        assert!(out.fidelity(&gauss).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn pointwise_branch_ratio_matches_tail_ratio() {
        let g = Grid::standard();
        let d = 0.5;
        for ratio in [1.0, 3.0, 10.0] {
            let l = ratio * d;
            let (i0, i1) = (512 - (l / 2.0 / g.spacing()).round() as usize, 0usize);
            let i1 = i1 + i0 + (l / g.spacing()).round() as usize;
            let (c0, c1) = (g.x(i0), g.x(i1));
            let psi = two_packets(0.6, 0.8, c0, c1, 0.05);
            let out = apply_hit(&psi, 0, c0, d).unwrap();
            let before = psi.values()[i1] / psi.values()[i0];
            let after = out.values()[i1] / out.values()[i0];
            let change = (after / before).re;
            let expected = tail_ratio(c1 - c0, d);
            assert!((change - expected).abs() < 1e-10);
            assert!(((change - expected) / expected).abs() < 1e-9);
        }
    }

    #[test]
    fn integrated_branch_ratio_matches_smeared_closed_form() {
        let g = Grid::standard();
        let (d, s, l) = (0.5, 0.1, 1.0);
        let psi = two_packets(1.0, 1.0, -0.5, 0.5, s);
        let out = apply_hit(&psi, 0, -0.5, d).unwrap();
        let half = |w: &WaveFunction, left: bool| -> f64 {
            w.density()
                .iter()
                .zip(g.points())
                .filter(|(_, x)| (*x < 0.0) == left)
                .map(|(p, _)| p)
                .sum::<f64>()
        };
        let ratio = (half(&out, false) / half(&out, true)).sqrt();
        let expected = (-l * l / (2.0 * (d * d + 2.0 * s * s))).exp();
        // packets are 5σ apart so cross terms are negligible
        assert!((ratio - expected).abs() < 1e-4, "{ratio} vs {expected}");
    }

    #[test]
    fn degenerate_hit_is_rejected() {
        let psi = gaussian_packet(PacketSpec::at(-6.0, 0.1), Grid::standard()).unwrap();
        assert!(matches!(apply_hit(&psi, 0, 7.9, 0.05), Err(Error::DegenerateHit(_))));
    }

    #[test]
    fn hit_width_must_be_resolved() {
        let psi = gaussian_packet(PacketSpec::at(0.0, 0.5), Grid::standard()).unwrap();
        assert!(apply_hit(&psi, 0, 0.0, 0.001).is_err());
    }

    #[test]
    fn tail_factors() {
        assert!((tail_ratio(1.0, 1.0) - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(log_tail_ratio(10.0, 1.0), -50.0);
        assert!((log_tail_ratio(5.0, 1e-5) / -1.25e11 - 1.0).abs() < 1e-15);
        assert_eq!(tail_ratio(5.0, 1e-5), 0.0);
        assert_eq!(tail_disturbance(1.0, 0.0, 1.0), 1.0);
        assert!((log_tail_disturbance(5.0, 1e-8, 1e-5) + 500.0).abs() < 1e-9);
        let l = 10f64.powi(4).ln();
        assert_eq!(log_tail_disturbance(l, 1.0, 1.0), -l);
    }

    #[test]
    fn tail_factors_decrease_with_distance() {
        let ls = [0.1, 0.5, 1.0, 2.0, 4.0];
        for w in ls.windows(2) {
            assert!(tail_ratio(w[1], 1.0) < tail_ratio(w[0], 1.0));
            assert!(tail_disturbance(w[1], 0.3, 1.0) < tail_disturbance(w[0], 0.3, 1.0));
        }
    }

    #[test]
    fn exact_disturbance_approaches_linear_form() {
        let exact = log_tail_disturbance_exact(5.0, 1e-3, 1.0);
        let approx = log_tail_disturbance(5.0, 1e-3, 1.0);
        assert!((exact - approx).abs() < 1e-6);
    }

    fn pointer(l: f64) -> PointerState {
        PointerState::superposition(
            PointerModel {
                n_particles: 1000,
                separation: l,
                internal_width: 1e-3,
            },
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn pointer_collapses_on_first_hit() {
        let params = GrwParams::new(1.0, 1.0).unwrap();
        let mut rng = substream(7, "pointer", 0);
        let state = pointer(100.0);
        let run = run_schedule(
            &state,
            &[ScheduledHit { time: 0.1, particle: 3 }],
            &params,
            &mut rng,
        );
        let ratio = run.final_state.log_branch_ratio();
        assert!(ratio <= log_tail_ratio(100.0, 1.0));
        let w = run.final_state.weights();
        assert!(w[0].max(w[1]) >= 1.0 - (-(100.0f64).powi(2)).exp());
    }

    #[test]
    fn screen_keeps_superposition() {
        let params = GrwParams::new(1.0, 1.0).unwrap();
        let mut rng = substream(8, "screen", 0);
        let state = pointer(1e-3);
        let schedule: Vec<ScheduledHit> = (0..10)
            .map(|k| ScheduledHit {
                time: k as f64,
                particle: k,
            })
            .collect();
        let run = run_schedule(&state, &schedule, &params, &mut rng);
        let w = run.final_state.weights();
        assert!((w[0] - 0.5).abs() < 1e-4 && (w[1] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn first_hit_time_is_poisson_minimum() {
        let params = GrwParams::new(1.0, 1.0).unwrap();
        let state = pointer(100.0);
        let runs = 1000;
        let times: Vec<f64> = (0..runs)
            .map(|k| {
                let mut rng = substream(9, "first", k);
                run_collapse(&state, &params, 0.05, &mut rng)
                    .first_hit_time()
                    .expect("1000 clocks over 50 mean gaps")
            })
            .collect();
        let mean = times.iter().sum::<f64>() / runs as f64;
        // minimum of 1000 Exp(1) clocks is Exp(1000): mean and sd 1e-3
        let sem = 1e-3 / (runs as f64).sqrt();
        assert!((mean - 1e-3).abs() < 3.0 * sem, "{mean}");
    }

    #[test]
    fn zero_duration_run_is_unchanged() {
        let params = GrwParams::new(1.0, 1.0).unwrap();
        let state = pointer(100.0);
        let run = run_collapse(&state, &params, 0.0, &mut substream(1, "z", 0));
        assert_eq!(run.final_state, state);
        assert!(run.hits.is_empty());
    }

    #[test]
    fn hit_on_real_gaussian_adds_known_energy() {
        let psi = gaussian_packet(PacketSpec::at(0.0, 0.4), Grid::standard()).unwrap();
        let d = 0.6;
        let out = apply_hit(&psi, 0, 0.0, d).unwrap();
        let drift = kinetic_energy(&out) - kinetic_energy(&psi);
        assert!((drift - 1.0 / (4.0 * d * d)).abs() < 1e-8, "{drift}");
        let mean = energy_drift_per_hit(&psi, 5, d, &mut substream(1, "e", 0)).unwrap();
        assert!(mean > 0.0);
    }

    #[test]
    fn collapse_csv_has_one_row_per_hit() {
        let params = GrwParams::new(1.0, 1.0).unwrap();
        let run = run_collapse(&pointer(100.0), &params, 0.01, &mut substream(2, "csv", 0));
        let mut buf = Vec::new();
        run.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), run.hits.len() + 1);
    }
}
