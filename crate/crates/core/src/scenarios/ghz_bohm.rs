//! Bohmian account of the GHZ correlations.
//!
//! Each site holds one particle in the span of two packets at rest: `x+` at
//! +1 and `x−` at −1. A ỹ measurement is a device acting on one site only: a
//! kick sends the packets toward each other, a phase plate on the right arm
//! sets the splitter orientation, and a calibrated barrier at the origin
//! makes them interfere. With orientation +1 the ỹ = +1 combination leaves
//! to the right and ỹ = −1 to the left; orientation −1 swaps the exits. The
//! outcome is read from the side the Bohmian particle ends on.
//!
//! Sites not being measured are frozen, so the measured particle is guided by
//! its conditional wave function: the joint wave evaluated at the actual
//! positions of the others. An x̃ outcome is just the sign of the position.

use num_complex::Complex64;
use serde::Serialize;

use crate::bohm::transport_ensemble;
use crate::error::{Error, Result};
use crate::qstate::ghz;
use crate::scenarios::barrier::Barrier;
use crate::wavepacket::{gaussian_packet, Grid, PacketSpec, SplitStep, WaveFunction};

const N_SITES: usize = 3;
/// Records kept along the measured particle's path.
const RECORDS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GhzBohmConfig {
    /// Splitter orientation (±1) per site; irrelevant for x̃-measured sites.
    pub orientations: [i8; 3],
    /// Sites measured in ỹ, in time order. The rest are read out in x̃.
    pub order: Vec<usize>,
    pub initial_positions: [f64; 3],
}

impl Default for GhzBohmConfig {
    fn default() -> Self {
        Self {
            orientations: [1, 1, 1],
            order: vec![1, 2],
            // trailing half of the x̃ = −1 packets
            initial_positions: [-1.05; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteOutcome {
    pub readout: Readout,
    pub value: i8,
    pub final_position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GhzBohmReport {
    pub orientations: [i8; 3],
    pub order: Vec<usize>,
    pub outcomes: [SiteOutcome; 3],
    /// x̃ values fixed by the initial positions.
    pub initial_x: [i8; 3],
    /// Product of all three outcomes.
    pub product: i8,
    /// Path of each ỹ-measured particle: (time, position) pairs.
    #[serde(skip)]
    pub paths: Vec<(usize, Vec<(f64, f64)>)>,
}

impl GhzBohmReport {
    /// Value the GHZ state demands for this product: −1 for x̃x̃x̃, +1 when
    /// exactly two sites are read in ỹ; `None` for other contexts.
    pub fn required_product(&self) -> Option<i8> {
        match self.order.len() {
            0 => Some(-1),
            2 => Some(1),
            _ => None,
        }
    }

    pub fn satisfies_ghz(&self) -> bool {
        self.required_product().is_none_or(|p| p == self.product)
    }
}

/// Device geometry and the cached response of each packet to each
/// orientation. Building it dominates the cost, so sweeps share one.
#[derive(Debug, Clone)]
pub struct GhzDevice {
    grid: Grid,
    prop: SplitStep,
    rk_steps: usize,
    momentum: f64,
    plate: Complex64,
    barrier: Barrier,
    /// `modes[b]`: packet `x+` (b = 0) and `x−` (b = 1) at rest.
    modes: [WaveFunction; 2],
    /// `evolved[o][b]`: packet `b` after the device with orientation index
    /// `o` (0 for +1, 1 for −1).
    evolved: [[WaveFunction; 2]; 2],
    peak: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviceSummary {
    pub barrier_height: f64,
    pub momentum: f64,
    pub duration: f64,
    pub steps: usize,
    /// Largest mass leaving through the wrong exit for a ỹ eigenstate.
    pub leakage: f64,
}

impl GhzDevice {
    pub fn new() -> Result<Self> {
        let grid = Grid::new(-4.0, 4.0, 1024)?;
        let width = 0.1;
        let momentum = 30.0;
        let sigma_k = 1.0 / (2.0 * width);
        let barrier = Barrier::calibrate(0.02, momentum, sigma_k, 0.5)?;
        let s = barrier.scattering(momentum);
        let plate = {
            let p = -s.r / s.t;
            p / p.norm()
        };
        // packets meet at the origin at t = 1/k and are back at ±1 by 2/k
        let duration = 2.0 / momentum;
        let rho = 0.5f64.sqrt();
        let v_bound = (momentum + 4.0 * sigma_k) * (1.0 + rho) / (1.0 - rho);
        let h_max = 0.5 * grid.spacing() / v_bound;
        let rk_steps = ((duration / h_max).ceil() as usize).div_ceil(RECORDS) * RECORDS;
        let dt = duration / (2 * rk_steps) as f64;
        let prop = SplitStep::new(grid, dt, Some(&barrier.on_grid(&grid)))?;
        let modes = [
            gaussian_packet(PacketSpec::at(1.0, width), grid)?,
            gaussian_packet(PacketSpec::at(-1.0, width), grid)?,
        ];
        let peak = modes[0].max_density();
        let mut dev = Self {
            grid,
            prop,
            rk_steps,
            momentum,
            plate,
            barrier,
            evolved: [
                [modes[0].clone(), modes[1].clone()],
                [modes[0].clone(), modes[1].clone()],
            ],
            modes,
            peak,
        };
        for o in 0..2 {
            for b in 0..2 {
                let mut psi = dev.prepare(&dev.modes[b], orientation_sign(o));
                for _ in 0..2 * rk_steps {
                    dev.prop.step(psi.values_mut());
                }
                psi.check_no_aliasing()?;
                dev.evolved[o][b] = psi;
            }
        }
        Ok(dev)
    }

    /// Kick toward the origin plus the orientation phase plate on the right.
    fn prepare(&self, psi: &WaveFunction, orientation: i8) -> WaveFunction {
        let k = self.momentum;
        let plate = self.plate * f64::from(orientation);
        let values = psi
            .values()
            .iter()
            .zip(self.grid.points())
            .map(|(v, x)| {
                if x < 0.0 {
                    v * Complex64::from_polar(1.0, k * x)
                } else {
                    v * plate * Complex64::from_polar(1.0, -k * x)
                }
            })
            .collect();
        WaveFunction::unnormalized(vec![self.grid], values).expect("grid shape preserved")
    }

    pub fn summary(&self) -> DeviceSummary {
        let mut leakage = 0.0f64;
        for o in 0..2 {
            for sign in [1.0, -1.0] {
                // ỹ = ±1 combination; which exit is "wrong" depends on both signs
                let combo: Vec<Complex64> = self.evolved[o][0]
                    .values()
                    .iter()
                    .zip(self.evolved[o][1].values())
                    .map(|(a, b)| (a + b * sign) * std::f64::consts::FRAC_1_SQRT_2)
                    .collect();
                let goes_right = sign * f64::from(orientation_sign(o)) > 0.0;
                let wrong: f64 = combo
                    .iter()
                    .zip(self.grid.points())
                    .filter(|(_, x)| (*x < 0.0) == goes_right)
                    .map(|(v, _)| v.norm_sqr())
                    .sum::<f64>()
                    * self.grid.spacing();
                leakage = leakage.max(wrong);
            }
        }
        DeviceSummary {
            barrier_height: self.barrier.height,
            momentum: self.momentum,
            duration: 2.0 * self.rk_steps as f64 * self.prop.dt(),
            steps: 2 * self.rk_steps,
            leakage,
        }
    }

    /// Per-site packet amplitudes at the current position: `[x+, x−]`.
    fn site_amplitudes(&self, state: SiteState, x: f64) -> Result<[Complex64; 2]> {
        let pair = match state {
            SiteState::Idle => &self.modes,
            SiteState::Measured(o) => &self.evolved[o],
        };
        Ok([pair[0].interpolate(&[x])?, pair[1].interpolate(&[x])?])
    }

    pub fn run(&self, cfg: &GhzBohmConfig) -> Result<GhzBohmReport> {
        validate(cfg)?;
        let amps = ghz().amplitudes().to_vec();
        let mut positions = cfg.initial_positions;
        let mut states = [SiteState::Idle; N_SITES];

        let joint = |states: &[SiteState; 3], positions: &[f64; 3]| -> Result<Complex64> {
            let site: Vec<[Complex64; 2]> = (0..N_SITES)
                .map(|s| self.site_amplitudes(states[s], positions[s]))
                .collect::<Result<_>>()?;
            Ok((0..8)
                .map(|i| amps[i] * site[0][i >> 2] * site[1][(i >> 1) & 1] * site[2][i & 1])
                .sum())
        };
        let density = joint(&states, &positions)?.norm_sqr();
        let reference = 0.25 * self.peak.powi(3);
        if density < 1e-12 * reference {
            return Err(Error::InconsistentPositions(format!(
                "|Ψ|² = {density:.3e} at {positions:?}"
            )));
        }

        let mut paths = Vec::new();
        for &s in &cfg.order {
            // g_b: joint amplitude with site s replaced by packet b
            let mut g = [Complex64::new(0.0, 0.0); 2];
            let others: Vec<[Complex64; 2]> = (0..N_SITES)
                .map(|t| self.site_amplitudes(states[t], positions[t]))
                .collect::<Result<_>>()?;
            for (i, a) in amps.iter().enumerate() {
                let digits = [i >> 2, (i >> 1) & 1, i & 1];
                let mut term = *a;
                for t in (0..N_SITES).filter(|&t| t != s) {
                    term *= others[t][digits[t]];
                }
                g[digits[s]] += term;
            }
            let values: Vec<Complex64> = self.modes[0]
                .values()
                .iter()
                .zip(self.modes[1].values())
                .map(|(r, l)| g[0] * r + g[1] * l)
                .collect();
            let cond = WaveFunction::normalized(vec![self.grid], values)?;
            let o = orientation_index(cfg.orientations[s]);
            let start = self.prepare(&cond, cfg.orientations[s]);
            let out = transport_ensemble(
                &start,
                &self.prop,
                &[positions[s]],
                self.rk_steps,
                self.rk_steps / RECORDS,
            )?;
            paths.push((
                s,
                out.record_times
                    .iter()
                    .zip(&out.records)
                    .map(|(&t, r)| (t, r[0]))
                    .collect(),
            ));
            positions[s] = out.final_positions[0];
            states[s] = SiteState::Measured(o);
        }

        let initial_x = cfg.initial_positions.map(sign);
        let mut outcomes = [SiteOutcome {
            readout: Readout::X,
            value: 0,
            final_position: 0.0,
        }; 3];
        for s in 0..N_SITES {
            outcomes[s] = if cfg.order.contains(&s) {
                SiteOutcome {
                    readout: Readout::Y,
                    value: cfg.orientations[s] * sign(positions[s]),
                    final_position: positions[s],
                }
            } else {
                SiteOutcome {
                    readout: Readout::X,
                    value: sign(positions[s]),
                    final_position: positions[s],
                }
            };
        }
        Ok(GhzBohmReport {
            orientations: cfg.orientations,
            order: cfg.order.clone(),
            product: outcomes.iter().map(|o| o.value).product(),
            outcomes,
            initial_x,
            paths,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SiteState {
    Idle,
    Measured(usize),
}

fn orientation_index(o: i8) -> usize {
    usize::from(o < 0)
}

fn orientation_sign(index: usize) -> i8 {
    if index == 0 {
        1
    } else {
        -1
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else {
        -1
    }
}

fn validate(cfg: &GhzBohmConfig) -> Result<()> {
    if let Some(o) = cfg.orientations.iter().find(|o| o.abs() != 1) {
        return Err(Error::InvalidParameter(format!("orientation {o} is not ±1")));
    }
    let mut seen = [false; N_SITES];
    for &s in &cfg.order {
        if s >= N_SITES {
            return Err(Error::SiteOutOfRange {
                site: s,
                n_sites: N_SITES,
            });
        }
        if std::mem::replace(&mut seen[s], true) {
            return Err(Error::DuplicateSite(s));
        }
    }
    if let Some(x) = cfg.initial_positions.iter().find(|x| !(x.abs() < 3.0)) {
        return Err(Error::InconsistentPositions(format!(
            "position {x} outside the packets' region"
        )));
    }
    Ok(())
}

/// One run with a freshly built device.
pub fn ghz_bohm(cfg: &GhzBohmConfig) -> Result<GhzBohmReport> {
    GhzDevice::new()?.run(cfg)
}

/// All orientation triples × both orders of the (B, C) ỹ measurements.
pub fn ghz_bohm_sweep(device: &GhzDevice, initial_positions: [f64; 3]) -> Result<Vec<GhzBohmReport>> {
    let mut out = Vec::with_capacity(16);
    for bits in 0..8u8 {
        let orientations = [0, 1, 2].map(|s| if bits >> (2 - s) & 1 == 0 { 1 } else { -1 });
        for order in [vec![1, 2], vec![2, 1]] {
            out.push(device.run(&GhzBohmConfig {
                orientations,
                order,
                initial_positions,
            })?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn device() -> &'static GhzDevice {
        static DEV: OnceLock<GhzDevice> = OnceLock::new();
        DEV.get_or_init(|| GhzDevice::new().unwrap())
    }

    fn values(r: &GhzBohmReport) -> [i8; 3] {
        r.outcomes.map(|o| o.value)
    }

    #[test]
    fn device_separates_y_eigenstates() {
        let s = device().summary();
        assert!(s.leakage < 0.05, "leakage {}", s.leakage);
    }

    #[test]
    fn default_run_matches_the_story() {
        let r = device().run(&GhzBohmConfig::default()).unwrap();
        assert_eq!(values(&r), [-1, -1, 1]);
        assert_eq!(r.product, 1);
        assert_eq!(r.initial_x, [-1, -1, -1]);
    }

    #[test]
    fn flipping_b_flips_c() {
        let cfg = GhzBohmConfig {
            orientations: [1, -1, 1],
            ..GhzBohmConfig::default()
        };
        let r = device().run(&cfg).unwrap();
        assert_eq!(values(&r), [-1, 1, -1]);
        // B's particle still goes left
        assert!(r.outcomes[1].final_position < 0.0);
    }

    #[test]
    fn first_measurement_goes_left_either_way() {
        for o in [1, -1] {
            let cfg = GhzBohmConfig {
                orientations: [1, 1, o],
                order: vec![2],
                ..GhzBohmConfig::default()
            };
            let r = device().run(&cfg).unwrap();
            assert!(r.outcomes[2].final_position < 0.0);
            assert_eq!(r.outcomes[2].value, -o);
        }
    }

    #[test]
    fn other_contexts_hold_too() {
        for order in [vec![0, 2], vec![0, 1], vec![]] {
            let r = device()
                .run(&GhzBohmConfig {
                    order,
                    ..GhzBohmConfig::default()
                })
                .unwrap();
            assert!(r.satisfies_ghz(), "{:?}", r.outcomes);
        }
    }

    #[test]
    fn all_right_positions_are_rejected() {
        let cfg = GhzBohmConfig {
            initial_positions: [1.0; 3],
            ..GhzBohmConfig::default()
        };
        assert!(matches!(
            device().run(&cfg),
            Err(Error::InconsistentPositions(_))
        ));
    }

    #[test]
    fn bad_order_is_rejected() {
        let cfg = GhzBohmConfig {
            order: vec![1, 1],
            ..GhzBohmConfig::default()
        };
        assert!(device().run(&cfg).is_err());
    }
}
