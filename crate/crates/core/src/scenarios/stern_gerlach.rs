//! Stern-Gerlach measurements seen by Bohmian mechanics and by GRW.
//!
//! Bohmian side: the two spin components are the two components of a
//! spinor wave sharing one vertical coordinate `z`. The magnet kicks them
//! apart with opposite momenta; `magnet_sign` decides which component goes
//! up. The particle starts at a given quantile of the packet and its final
//! half decides the spot; the outcome label depends on the magnet.
//!
//! GRW side: the measurement leaves a two-branch record, either a
//! macroscopic pointer (branches far apart) or a screen (branches barely
//! displaced), which is then exposed to spontaneous hits.

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bohm::{sample_born, transport_components};
use crate::error::{Error, Result};
use crate::grw::{
    log_tail_ratio, run_schedule, sample_first_hits, CollapseRun, Display, GrwParams,
    PointerModel, PointerState,
};
use crate::rng::substream;
use crate::wavepacket::{gaussian_packet, Grid, PacketSpec, SplitStep, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SternGerlachConfig {
    /// +1: spin up is deflected upward; −1: the gradient is reversed.
    pub magnet_sign: i8,
    pub display: Display,
    pub pointer_model: PointerModel,
}

impl SternGerlachConfig {
    pub fn pointer(magnet_sign: i8) -> Self {
        Self {
            magnet_sign,
            display: Display::Pointer,
            pointer_model: PointerModel {
                n_particles: 1000,
                separation: 100.0,
                internal_width: 0.0,
            },
        }
    }

    pub fn screen(magnet_sign: i8) -> Self {
        Self {
            magnet_sign,
            display: Display::Screen,
            pointer_model: PointerModel {
                n_particles: 1000,
                separation: 1e-3,
                internal_width: 0.0,
            },
        }
    }

    fn validate(&self, d: Option<f64>) -> Result<()> {
        if self.magnet_sign.abs() != 1 {
            return Err(Error::InvalidParameter(format!(
                "magnet_sign {} is not ±1",
                self.magnet_sign
            )));
        }
        if let Some(d) = d {
            let actual = self.pointer_model.display(d);
            if actual != self.display {
                return Err(Error::InvalidParameter(format!(
                    "pointer model behaves as {actual:?} for d = {d}, configured {:?}",
                    self.display
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Spot {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SpinLabel {
    Up,
    Down,
}

/// Outcome label for a given spot and magnet orientation.
pub fn spin_label(spot: Spot, magnet_sign: i8) -> SpinLabel {
    match (spot == Spot::Upper) == (magnet_sign > 0) {
        true => SpinLabel::Up,
        false => SpinLabel::Down,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SternGerlachOutcome {
    pub final_spot: Spot,
    pub outcome_label: SpinLabel,
    pub initial_z: f64,
    pub final_z: f64,
    /// (t, z) samples along the path.
    #[serde(skip)]
    pub trajectory: Vec<(f64, f64)>,
}

/// Magnet geometry: packet width, kick, flight time and grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Magnet {
    pub width: f64,
    pub kick: f64,
    pub duration: f64,
    pub grid: Grid,
}

impl Default for Magnet {
    fn default() -> Self {
        Self {
            width: 0.5,
            kick: 3.0,
            duration: 1.0,
            grid: Grid {
                x_min: -12.0,
                x_max: 12.0,
                n_points: 1024,
            },
        }
    }
}

const RECORDS: usize = 50;

impl Magnet {
    /// Spinor `(φ e^{+iskz}, φ e^{−iskz}) / √2` right after the magnet;
    /// component 0 is spin up.
    fn components(&self, magnet_sign: i8) -> Result<[WaveFunction; 2]> {
        let k = self.kick * f64::from(magnet_sign);
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let up = gaussian_packet(PacketSpec::moving(0.0, self.width, k), self.grid)?;
        let down = gaussian_packet(PacketSpec::moving(0.0, self.width, -k), self.grid)?;
        let shrink = |w: WaveFunction| {
            let v = w.values().iter().map(|c| c * scale).collect();
            WaveFunction::unnormalized(vec![self.grid], v)
        };
        Ok([shrink(up)?, shrink(down)?])
    }

    fn steps(&self) -> (usize, f64) {
        let v_max = self.kick + 4.0 / (2.0 * self.width);
        let h_max = 0.5 * self.grid.spacing() / v_max;
        let rk = ((self.duration / h_max).ceil() as usize).div_ceil(RECORDS) * RECORDS;
        (rk, self.duration / (2 * rk) as f64)
    }

    fn transport(&self, magnet_sign: i8, members: &[f64]) -> Result<crate::bohm::EnsembleTransport> {
        let comps = self.components(magnet_sign)?;
        let (rk, dt) = self.steps();
        let prop = SplitStep::new(self.grid, dt, None)?;
        transport_components(&comps, &prop, members, rk, rk / RECORDS)
    }

    /// Initial height at density quantile `fraction` of the packet.
    pub fn initial_z(&self, fraction: f64) -> Result<f64> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "initial fraction {fraction} outside (0, 1)"
            )));
        }
        if fraction == 0.5 {
            return Err(Error::SymmetryLine);
        }
        let normal = Normal::new(0.0, self.width).expect("positive width");
        Ok(normal.inverse_cdf(fraction))
    }
}

fn spot_of(z: f64) -> Spot {
    if z > 0.0 {
        Spot::Upper
    } else {
        Spot::Lower
    }
}

/// Bohmian run from the given quantile of the packet (fraction < ½ is the
/// lower half).
pub fn stern_gerlach_bohm(cfg: &SternGerlachConfig, initial_fraction: f64) -> Result<SternGerlachOutcome> {
    cfg.validate(None)?;
    let magnet = Magnet::default();
    let z0 = magnet.initial_z(initial_fraction)?;
    let out = magnet.transport(cfg.magnet_sign, &[z0])?;
    let z = out.final_positions[0];
    let spot = spot_of(z);
    Ok(SternGerlachOutcome {
        final_spot: spot,
        outcome_label: spin_label(spot, cfg.magnet_sign),
        initial_z: z0,
        final_z: z,
        trajectory: out
            .record_times
            .iter()
            .zip(&out.records)
            .map(|(&t, r)| (t, r[0]))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SternGerlachEnsemble {
    pub n: usize,
    pub up: usize,
    pub up_fraction: f64,
    pub binomial_sigma: f64,
    /// Members whose spot differs from the side they started on.
    pub side_changes: usize,
}

/// Born-sampled ensemble through the magnet.
pub fn stern_gerlach_ensemble(magnet_sign: i8, n: usize, seed: u64) -> Result<SternGerlachEnsemble> {
    SternGerlachConfig::pointer(magnet_sign).validate(None)?;
    if n == 0 {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    let magnet = Magnet::default();
    let packet = gaussian_packet(PacketSpec::at(0.0, magnet.width), magnet.grid)?;
    let members = sample_born(&packet, n, seed)?.coordinates(0);
    let out = magnet.transport(magnet_sign, &members)?;
    let up = out
        .final_positions
        .iter()
        .filter(|&&z| spin_label(spot_of(z), magnet_sign) == SpinLabel::Up)
        .count();
    let side_changes = members
        .iter()
        .zip(&out.final_positions)
        .filter(|(a, b)| (**a > 0.0) != (**b > 0.0))
        .count();
    Ok(SternGerlachEnsemble {
        n,
        up,
        up_fraction: up as f64 / n as f64,
        binomial_sigma: (0.25 / n as f64).sqrt(),
        side_changes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseReport {
    pub display: Display,
    pub n_hits: usize,
    pub first_hit_time: Option<f64>,
    /// Mean waiting time for the first hit, τ/n.
    pub expected_first_hit: f64,
    pub initial_weights: [f64; 2],
    pub final_weights: [f64; 2],
    pub log_ratio_after_first_hit: Option<f64>,
    /// −l²/2d² for the configured separation.
    pub log_ratio_bound: f64,
    pub max_weight_deviation: f64,
    #[serde(skip)]
    pub run: CollapseRun,
}

impl CollapseReport {
    fn new(display: Display, params: &GrwParams, initial: &PointerState, run: CollapseRun) -> Self {
        let initial_weights = initial.weights();
        let max_weight_deviation = run
            .trajectory
            .iter()
            .map(|s| (s.weights[0] - initial_weights[0]).abs())
            .fold(0.0, f64::max);
        Self {
            display,
            n_hits: run.hits.len(),
            first_hit_time: run.first_hit_time(),
            expected_first_hit: params.tau / initial.model.n_particles as f64,
            initial_weights,
            final_weights: run.final_state.weights(),
            log_ratio_after_first_hit: run.trajectory.get(1).map(|s| s.log_branch_ratio),
            log_ratio_bound: log_tail_ratio(initial.model.separation, params.d),
            max_weight_deviation,
            run,
        }
    }

    pub fn collapsed(&self) -> bool {
        self.log_ratio_after_first_hit
            .is_some_and(|r| r <= self.log_ratio_bound)
    }
}

/// Record of a spin prepared along x (equal branches) exposed to the first
/// `n_hits` hits of its particles.
pub fn stern_gerlach_grw(
    cfg: &SternGerlachConfig,
    params: &GrwParams,
    n_hits: usize,
    rng: &mut impl Rng,
) -> Result<CollapseReport> {
    cfg.validate(Some(params.d))?;
    let initial = PointerState::superposition(cfg.pointer_model, 0.5)?;
    let schedule = sample_first_hits(cfg.pointer_model.n_particles, n_hits, params, rng);
    let run = run_schedule(&initial, &schedule, params, rng);
    Ok(CollapseReport::new(cfg.display, params, &initial, run))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointerVsScreen {
    pub pointer: CollapseReport,
    pub screen: CollapseReport,
}

/// Pointer and screen records driven by one shared hit schedule.
pub fn pointer_vs_screen(params: &GrwParams, n_hits: usize, seed: u64) -> Result<PointerVsScreen> {
    let pointer = SternGerlachConfig::pointer(1);
    let screen = SternGerlachConfig::screen(1);
    let pointer_model = PointerModel {
        separation: 100.0 * params.d,
        ..pointer.pointer_model
    };
    let screen_model = PointerModel {
        separation: 1e-3 * params.d,
        ..screen.pointer_model
    };
    let pointer = SternGerlachConfig {
        pointer_model,
        ..pointer
    };
    let screen = SternGerlachConfig {
        pointer_model: screen_model,
        ..screen
    };
    pointer.validate(Some(params.d))?;
    screen.validate(Some(params.d))?;
    let schedule = sample_first_hits(
        pointer_model.n_particles,
        n_hits,
        params,
        &mut substream(seed, "grw_schedule", 0),
    );
    let run = |cfg: SternGerlachConfig, name: &str| -> Result<CollapseReport> {
        let initial = PointerState::superposition(cfg.pointer_model, 0.5)?;
        let run = run_schedule(&initial, &schedule, params, &mut substream(seed, name, 0));
        Ok(CollapseReport::new(cfg.display, params, &initial, run))
    };
    let pointer = run(pointer, "grw_pointer")?;
    let screen = run(screen, "grw_screen")?;
    Ok(PointerVsScreen { pointer, screen })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_half_lands_low_for_either_magnet() {
        let a = stern_gerlach_bohm(&SternGerlachConfig::pointer(1), 0.25).unwrap();
        assert_eq!((a.final_spot, a.outcome_label), (Spot::Lower, SpinLabel::Down));
        let b = stern_gerlach_bohm(&SternGerlachConfig::pointer(-1), 0.25).unwrap();
        assert_eq!((b.final_spot, b.outcome_label), (Spot::Lower, SpinLabel::Up));
        assert!((a.final_z - b.final_z).abs() < 1e-9);
    }

    #[test]
    fn upper_half_lands_high() {
        let a = stern_gerlach_bohm(&SternGerlachConfig::pointer(1), 0.9).unwrap();
        assert_eq!((a.final_spot, a.outcome_label), (Spot::Upper, SpinLabel::Up));
    }

    #[test]
    fn symmetry_line_is_rejected() {
        assert!(matches!(
            stern_gerlach_bohm(&SternGerlachConfig::pointer(1), 0.5),
            Err(Error::SymmetryLine)
        ));
        assert!(stern_gerlach_bohm(&SternGerlachConfig::pointer(1), 1.0).is_err());
    }

    #[test]
    fn ensemble_splits_evenly() {
        let e = stern_gerlach_ensemble(1, 2000, 5).unwrap();
        assert!((e.up_fraction - 0.5).abs() < 3.0 * e.binomial_sigma);
        assert_eq!(e.side_changes, 0);
    }

    #[test]
    fn pointer_collapses_screen_does_not() {
        let params = GrwParams::new(1.0, 1.0).unwrap();
        let r = pointer_vs_screen(&params, 10, 3).unwrap();
        assert!(r.pointer.collapsed());
        assert!(r.screen.max_weight_deviation < 1e-4);
        assert_eq!(r.pointer.run.hits.len(), 10);
        let times: Vec<f64> = r.pointer.run.hits.iter().map(|h| h.time).collect();
        let screen_times: Vec<f64> = r.screen.run.hits.iter().map(|h| h.time).collect();
        assert_eq!(times, screen_times);
    }

    #[test]
    fn infinite_tau_is_unitary() {
        let params = GrwParams::new(f64::INFINITY, 1.0).unwrap();
        let mut rng = substream(0, "t", 0);
        let r = stern_gerlach_grw(&SternGerlachConfig::pointer(1), &params, 10, &mut rng).unwrap();
        assert_eq!(r.n_hits, 0);
        assert_eq!(r.final_weights, r.initial_weights);
    }

    #[test]
    fn display_mismatch_is_rejected() {
        let params = GrwParams::new(1.0, 1.0).unwrap();
        let mut rng = substream(0, "t", 0);
        let mut cfg = SternGerlachConfig::screen(1);
        cfg.pointer_model.separation = 10.0;
        assert!(stern_gerlach_grw(&cfg, &params, 1, &mut rng).is_err());
    }
}
