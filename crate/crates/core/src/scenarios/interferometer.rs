//! Mach-Zehnder interferometers: interaction-free measurement, the betting
//! variant, and the weak trace left in a nested interferometer.
//!
//! Splitters use the real self-inverse map `[[√(1−r), √r], [√r, −√(1−r)]]`,
//! so two identical splitters in a row return the photon to the input port:
//! port 0 is bright and port 1 is dark.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mwi::measure_region;
use crate::wavepacket::{Grid, PacketModes, TwoModeMap, WaveFunction};

const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MziConfig {
    pub reflectivity: f64,
    /// Extra phase on arm 1, in radians. Zero tunes the dark port.
    pub phase: f64,
    /// Absorbing object blocking arm 0.
    pub object_present: bool,
    /// 0 for the plain interferometer, 1 for the nested one.
    pub n_nested: u8,
}

impl Default for MziConfig {
    fn default() -> Self {
        Self {
            reflectivity: 0.5,
            phase: 0.0,
            object_present: false,
            n_nested: 0,
        }
    }
}

impl MziConfig {
    fn validate(&self) -> Result<()> {
        if !(self.reflectivity > 0.0 && self.reflectivity < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "reflectivity {} outside (0, 1)",
                self.reflectivity
            )));
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidParameter("phase must be finite".into()));
        }
        if self.n_nested != 0 {
            return Err(Error::InvalidParameter(
                "the nested interferometer is run through nested_mzi_trace".into(),
            ));
        }
        Ok(())
    }
}

/// Detector probabilities of one photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IfmReport {
    pub bright: f64,
    pub dark: f64,
    pub absorbed: f64,
    /// Dark-port probability without the object for this phase; nonzero
    /// means the interferometer is mistuned.
    pub dark_leak: f64,
}

impl IfmReport {
    pub fn total(&self) -> f64 {
        self.bright + self.dark + self.absorbed
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.bright, self.dark, self.absorbed]
    }
}

fn arms(cfg: &MziConfig) -> Result<(TwoModeMap, [Complex64; 2], f64)> {
    let bs = TwoModeMap::with_reflectivity(cfg.reflectivity)?;
    let mut c = bs.apply([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    let mut absorbed = 0.0;
    if cfg.object_present {
        // absorption moves arm 0 into a flagged mode outside the interferometer
        absorbed = c[0].norm_sqr();
        c[0] = Complex64::new(0.0, 0.0);
    }
    c[1] *= Complex64::from_polar(1.0, cfg.phase);
    Ok((bs, c, absorbed))
}

/// Exact two-mode calculation.
pub fn ifm(cfg: &MziConfig) -> Result<IfmReport> {
    cfg.validate()?;
    let (bs, c, absorbed) = arms(cfg)?;
    let out = bs.apply(c);
    let r = cfg.reflectivity;
    Ok(IfmReport {
        bright: out[0].norm_sqr(),
        dark: out[1].norm_sqr(),
        absorbed,
        dark_leak: 2.0 * r * (1.0 - r) * (1.0 - cfg.phase.cos()),
    })
}

/// Same interferometer on a position grid: the arms are two packets, the
/// splitters act on their mode coefficients, and the ports are read as the
/// mass on each half-line.
pub fn ifm_grid(cfg: &MziConfig) -> Result<IfmReport> {
    cfg.validate()?;
    let grid = Grid::new(-4.0, 4.0, 512)?;
    let modes = PacketModes::new(grid, 0.1, 2.0)?;
    let bs = TwoModeMap::with_reflectivity(cfg.reflectivity)?;
    let input = modes.synthesize([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    let mut psi = modes.apply(&input, &bs)?;
    let mut absorbed = 0.0;
    if cfg.object_present {
        let (c, _) = modes.project(&psi)?;
        absorbed = c[0].norm_sqr();
        psi = modes.synthesize([Complex64::new(0.0, 0.0), c[1]]);
    }
    // phase plate over the arm-1 half-line
    let plate = Complex64::from_polar(1.0, cfg.phase);
    let values = psi
        .values()
        .iter()
        .zip(grid.points())
        .map(|(v, x)| if x < 0.0 { v * plate } else { *v })
        .collect();
    psi = WaveFunction::unnormalized(vec![grid], values)?;
    let out = modes.apply(&psi, &bs)?;
    let r = cfg.reflectivity;
    Ok(IfmReport {
        bright: measure_region(&out, &[(0.0, grid.x_max + 1.0)])?,
        dark: measure_region(&out, &[(grid.x_min, 0.0)])?,
        absorbed,
        dark_leak: 2.0 * r * (1.0 - r) * (1.0 - cfg.phase.cos()),
    })
}

/// Detector counts for `shots` photons.
pub fn ifm_shots(cfg: &MziConfig, shots: usize, rng: &mut impl Rng) -> Result<[usize; 3]> {
    let p = ifm(cfg)?;
    let mut counts = [0; 3];
    for _ in 0..shots {
        let u: f64 = rng.gen();
        let k = if u < p.bright {
            0
        } else if u < p.bright + p.dark {
            1
        } else {
            2
        };
        counts[k] += 1;
    }
    Ok(counts)
}

/// Odds an outsider can force on the dark port once the branch weights are
/// fixed, by choosing the phase after the fact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BettingBounds {
    pub reflectivity: f64,
    pub min_dark: f64,
    pub min_phase: f64,
    pub max_dark: f64,
    pub max_phase: f64,
}

pub fn alien_betting(reflectivity: f64) -> Result<BettingBounds> {
    let at = |phase: f64| {
        ifm(&MziConfig {
            reflectivity,
            phase,
            ..MziConfig::default()
        })
        .map(|r| r.dark)
    };
    Ok(BettingBounds {
        reflectivity,
        min_dark: at(0.0)?,
        min_phase: 0.0,
        max_dark: at(PI)?,
        max_phase: PI,
    })
}

/// Path segments of the nested interferometer.
///
/// The outer splitter sends the photon into the lead `E` or the bypass `C`.
/// `E` feeds an inner interferometer with arms `A` and `B` whose second
/// splitter sends everything to `D3` and nothing into the exit continuation
/// `F`. `C` and `F` recombine on the last splitter toward `D1` and `D2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Arm {
    C,
    E,
    A,
    B,
    F,
}

impl Arm {
    pub const ALL: [Arm; 5] = [Arm::C, Arm::E, Arm::A, Arm::B, Arm::F];

    pub fn name(self) -> &'static str {
        match self {
            Arm::C => "C",
            Arm::E => "E",
            Arm::A => "A",
            Arm::B => "B",
            Arm::F => "F",
        }
    }

    fn marker(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PostSelection {
    D1,
    D2,
    D3,
    Universe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NestedConfig {
    /// Reflectivity of the first and last splitters.
    pub outer_reflectivity: f64,
    /// Reflectivity of the two inner splitters.
    pub inner_reflectivity: f64,
}

impl Default for NestedConfig {
    fn default() -> Self {
        Self {
            outer_reflectivity: 0.5,
            inner_reflectivity: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub epsilon: f64,
    pub post_selection: PostSelection,
    /// Probability of the post-selected event.
    pub probability: f64,
    /// Marker excitation probability per arm, in `Arm::ALL` order.
    pub traces: Vec<(Arm, f64)>,
}

impl TraceReport {
    pub fn trace(&self, arm: Arm) -> f64 {
        self.traces[arm.marker()].1
    }
}

// photon modes
const S: usize = 0;
const E: usize = 1;
const C: usize = 2;
const A: usize = 3;
const B: usize = 4;
const F: usize = 5;
const D3: usize = 6;
const D1: usize = 7;
const D2: usize = 8;
const N_MODES: usize = 9;
const N_MARKERS: usize = 5;

/// Photon mode ⊗ five two-level markers, one per arm.
struct PhotonMarkers {
    amps: Vec<Complex64>,
}

impl PhotonMarkers {
    fn new() -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); N_MODES << N_MARKERS];
        amps[S << N_MARKERS] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    fn splitter(&mut self, input: [usize; 2], output: [usize; 2], map: &TwoModeMap) {
        for m in 0..1 << N_MARKERS {
            let c = [self.amps[input[0] << N_MARKERS | m], self.amps[input[1] << N_MARKERS | m]];
            for i in input {
                self.amps[i << N_MARKERS | m] = Complex64::new(0.0, 0.0);
            }
            let out = map.apply(c);
            for (o, v) in output.iter().zip(out) {
                self.amps[o << N_MARKERS | m] += v;
            }
        }
    }

    /// Rotates the arm's marker by ε when the photon is in `mode`.
    fn couple(&mut self, mode: usize, arm: Arm, eps: f64) {
        let bit = 1 << arm.marker();
        let (c, s) = (eps.cos(), eps.sin());
        for m in (0..1 << N_MARKERS).filter(|m| m & bit == 0) {
            let lo = mode << N_MARKERS | m;
            let hi = mode << N_MARKERS | m | bit;
            let (a0, a1) = (self.amps[lo], self.amps[hi]);
            self.amps[lo] = a0 * c - a1 * s;
            self.amps[hi] = a0 * s + a1 * c;
        }
    }
}

fn nested_final_state(cfg: &NestedConfig, eps: f64) -> Result<PhotonMarkers> {
    let outer = TwoModeMap::with_reflectivity(cfg.outer_reflectivity)?;
    let inner = TwoModeMap::with_reflectivity(cfg.inner_reflectivity)?;
    let mut st = PhotonMarkers::new();
    // the unused input port of each splitter is the empty mode S after BS1
    st.splitter([S, D1], [E, C], &outer);
    st.couple(C, Arm::C, eps);
    st.couple(E, Arm::E, eps);
    st.splitter([E, S], [A, B], &inner);
    st.couple(A, Arm::A, eps);
    st.couple(B, Arm::B, eps);
    st.splitter([A, B], [D3, F], &inner);
    st.couple(F, Arm::F, eps);
    st.splitter([C, F], [D1, D2], &outer);
    Ok(st)
}

/// Marker excitation probabilities after one photon, conditioned on a
/// detector or over all outcomes.
pub fn nested_mzi_trace(
    eps: f64,
    post_selection: PostSelection,
    cfg: &NestedConfig,
) -> Result<TraceReport> {
    if !(0.0..0.3).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "coupling {eps} outside [0, 0.3)"
        )));
    }
    for r in [cfg.outer_reflectivity, cfg.inner_reflectivity] {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParameter(format!("reflectivity {r} outside (0, 1)")));
        }
    }
    let st = nested_final_state(cfg, eps)?;
    let modes: Vec<usize> = match post_selection {
        PostSelection::D1 => vec![D1],
        PostSelection::D2 => vec![D2],
        PostSelection::D3 => vec![D3],
        PostSelection::Universe => (0..N_MODES).collect(),
    };
    let mut probability = 0.0;
    let mut excited = [0.0; N_MARKERS];
    for &mode in &modes {
        for m in 0..1 << N_MARKERS {
            let p = st.amps[mode << N_MARKERS | m].norm_sqr();
            probability += p;
            for (k, e) in excited.iter_mut().enumerate() {
                if m >> k & 1 == 1 {
                    *e += p;
                }
            }
        }
    }
    if probability < EXACT_TOL {
        return Err(Error::ZeroProbabilityBranch);
    }
    Ok(TraceReport {
        epsilon: eps,
        post_selection,
        probability,
        traces: Arm::ALL
            .iter()
            .map(|&a| (a, excited[a.marker()] / probability))
            .collect(),
    })
}
