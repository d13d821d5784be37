//! Scenarios that check algebraic and numerical identities directly:
//! GHZ parities, the hidden-variable search, uncertainty relations,
//! guidance-law consistency, the quantum force, GRW tails, branch-measure
//! invariance and refinement, and Sleeping Beauty.

use num_complex::Complex64;
use num_rational::Rational64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bohm::{
    conditional_wavefunction, newtonian_acceleration, sample_born, velocity, velocity_conditional,
    BohmConfiguration,
};
use crate::error::{Error, Result};
use crate::grw::{
    log_tail_disturbance, log_tail_disturbance_exact, log_tail_ratio, PointerModel, PointerState,
};
use crate::mwi::{
    equal_measure_refinement, fig8_transform, sleeping_beauty, sleeping_beauty_biased,
    sleeping_beauty_closed_form, three_boxes, BranchDecomposition, Fig8Transform,
};
use crate::qstate::{
    ghz, ghz_constraints, hv_search, hv_search_with, parity_expectation, robertson_bound,
    DichotomicObservable, HermitianOperator, StateVector,
};
use crate::rng::substream;
use crate::wavepacket::{gaussian_packet, uncertainty, Grid, PacketSpec, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GhzParity {
    pub xxx: f64,
    pub xyy: f64,
    pub yxy: f64,
    pub yyx: f64,
}

pub fn ghz_parity() -> Result<GhzParity> {
    use DichotomicObservable as O;
    let s = ghz();
    Ok(GhzParity {
        xxx: parity_expectation(&s, &[O::x(0), O::x(1), O::x(2)])?,
        xyy: parity_expectation(&s, &[O::x(0), O::y(1), O::y(2)])?,
        yxy: parity_expectation(&s, &[O::y(0), O::x(1), O::y(2)])?,
        yyx: parity_expectation(&s, &[O::y(0), O::y(1), O::x(2)])?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HvSearch {
    pub assignments: usize,
    pub satisfying: usize,
    /// Satisfying count with one relation dropped, keyed by the dropped one.
    pub relaxations: Vec<(String, usize)>,
}

pub fn hv_search_report() -> HvSearch {
    let all = ghz_constraints();
    let relaxations = (0..all.len())
        .map(|skip| {
            let kept: Vec<_> = (0..all.len())
                .filter(|&i| i != skip)
                .map(|i| all[i].clone())
                .collect();
            (all[skip].name.to_string(), hv_search_with(&kept))
        })
        .collect();
    HvSearch {
        assignments: 64,
        satisfying: hv_search(),
        relaxations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub gaussian_dx: f64,
    pub gaussian_dp: f64,
    pub gaussian_product: f64,
    pub random_states: usize,
    pub violations: usize,
    /// Smallest `lhs − rhs` seen over the random states.
    pub min_margin: f64,
}

fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / norm).collect()
}

fn random_hermitian(rng: &mut impl Rng, n: usize) -> Result<HermitianOperator> {
    let g: Vec<Complex64> = (0..n * n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            m[r * n + c] = (g[r * n + c] + g[c * n + r].conj()) * 0.5;
        }
    }
    HermitianOperator::new(n, m)
}

/// Minimum-uncertainty packet plus Robertson's bound on random 1–3 qubit
/// states and random observables.
pub fn uncertainty_report(n_states: usize, seed: u64) -> Result<UncertaintyReport> {
    let grid = Grid::new(-20.0, 20.0, 1024)?;
    let packet = gaussian_packet(PacketSpec::at(0.0, 1.0), grid)?;
    let (dx, dp) = uncertainty(&packet)?;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for j in 0..n_states {
        let mut rng = substream(seed, "robertson", j as u64);
        let qubits = rng.gen_range(1..=3);
        let dim = 1 << qubits;
        let state = StateVector::qubits(qubits, random_unit(&mut rng, dim))?;
        let a = random_hermitian(&mut rng, dim)?;
        let b = random_hermitian(&mut rng, dim)?;
        let bound = robertson_bound(&state, &a, &b)?;
        if !bound.holds() {
            violations += 1;
        }
        min_margin = min_margin.min(bound.lhs - bound.rhs);
    }
    Ok(UncertaintyReport {
        gaussian_dx: dx,
        gaussian_dp: dp,
        gaussian_product: dx * dp,
        random_states: n_states,
        violations,
        min_margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub states: usize,
    pub comparisons: usize,
    pub max_abs_diff: f64,
}

/// Random two-particle superposition of three product packets.
fn random_entangled(rng: &mut impl Rng, grid: Grid) -> Result<WaveFunction> {
    let mut values = vec![Complex64::new(0.0, 0.0); grid.n_points * grid.n_points];
    for _ in 0..3 {
        let coef = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let mut factor = || {
            let spec = PacketSpec::moving(
                rng.gen_range(-2.5..2.5),
                rng.gen_range(0.6..1.2),
                rng.gen_range(-2.0..2.0),
            );
            gaussian_packet(spec, grid)
        };
        let (f, g) = (factor()?, factor()?);
        for (i, a) in f.values().iter().enumerate() {
            for (j, b) in g.values().iter().enumerate() {
                values[i * grid.n_points + j] += coef * a * b;
            }
        }
    }
    WaveFunction::normalized(vec![grid, grid], values)
}

/// Full-configuration guidance versus the conditional-wave route, for both
/// particles at a Born-sampled configuration of each random state.
pub fn bohm_consistency(n_states: usize, seed: u64) -> Result<ConsistencyReport> {
    let grid = Grid::new(-10.0, 10.0, 80)?;
    let mut max_abs_diff: f64 = 0.0;
    let mut comparisons = 0;
    for j in 0..n_states {
        let mut rng = substream(seed, "consistency", j as u64);
        let psi = random_entangled(&mut rng, grid)?;
        let member = sample_born(&psi, 1, rng.gen())?;
        let cfg = BohmConfiguration::new(member.members[0].positions.clone());
        for i in 0..2 {
            let full = velocity(&psi, &cfg, i)?;
            let (cond, _) = conditional_wavefunction(&psi, &cfg, i)?;
            let via = velocity_conditional(&cond, cfg.positions[i])?;
            max_abs_diff = max_abs_diff.max((full - via).abs());
            comparisons += 1;
        }
    }
    Ok(ConsistencyReport {
        states: n_states,
        comparisons,
        max_abs_diff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForceSample {
    pub x: f64,
    pub numeric: f64,
    pub analytic: f64,
}

/// Acceleration of a free Gaussian's trajectories from the quantum
/// potential at t = 0, against `x/(4σ⁴)` from the known trajectories
/// `x(t) = x0·σ(t)/σ`.
pub fn quantum_force(width: f64) -> Result<Vec<ForceSample>> {
    if !(width > 0.2 && width < 3.0) {
        return Err(Error::InvalidParameter(format!("width {width} outside (0.2, 3)")));
    }
    let grid = Grid::new(-20.0, 20.0, 2048)?;
    let psi = gaussian_packet(PacketSpec::at(0.0, width), grid)?;
    let rho = psi.density();
    [-1.0, -0.5, 0.25, 0.5, 1.0]
        .iter()
        .map(|&f| {
            let x = f * width;
            let a = newtonian_acceleration(&[grid], &rho, None, &BohmConfiguration::single(x))?;
            Ok(ForceSample {
                x,
                numeric: a[0],
                analytic: x / (4.0 * width.powi(4)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSample {
    pub l_over_d: f64,
    /// Change of ln|a_minor/a_major| after one hit on the major branch.
    pub numeric_log_change: f64,
    pub expected_log_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub samples: Vec<TailSample>,
    /// ln of the disturbance factor at lD/d² = ln 10⁴, and its exponential.
    pub disturbance_log: f64,
    pub disturbance_factor: f64,
    /// The same factor for l = 5 cm, D = 10⁻⁸ cm, d = 10⁻⁵ cm (cgs).
    pub lab_disturbance_log: f64,
    pub lab_disturbance_log_exact: f64,
    /// Amplitude ratio exponent for l = 5 cm, d = 10⁻⁵ cm.
    pub lab_tail_log: f64,
}

pub fn grw_tail() -> Result<TailReport> {
    let d = 1.0;
    let samples = [1.0, 3.0, 10.0]
        .iter()
        .map(|&ratio| {
            let l = ratio * d;
            let model = PointerModel {
                n_particles: 1,
                separation: l,
                internal_width: 0.0,
            };
            let mut state = PointerState::superposition(model, 0.5)?;
            let before = state.log_amplitudes[1] - state.log_amplitudes[0];
            state.apply_hit(0.0, d);
            let after = state.log_amplitudes[1] - state.log_amplitudes[0];
            Ok(TailSample {
                l_over_d: ratio,
                numeric_log_change: after - before,
                expected_log_change: log_tail_ratio(l, d),
            })
        })
        .collect::<Result<_>>()?;
    // lD/d² = ln 10⁴ with l = d = 1
    let cloud = 1e4f64.ln();
    let disturbance_log = log_tail_disturbance(1.0, cloud, 1.0);
    let (l, cloud_lab, d_lab) = (5.0, 1e-8, 1e-5);
    Ok(TailReport {
        samples,
        disturbance_log,
        disturbance_factor: disturbance_log.exp(),
        lab_disturbance_log: log_tail_disturbance(l, cloud_lab, d_lab),
        lab_disturbance_log_exact: log_tail_disturbance_exact(l, cloud_lab, d_lab),
        lab_tail_log: log_tail_ratio(l, d_lab),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// μ(A) before and after each transform on the other branches.
    pub mu_a: Vec<(String, f64)>,
    /// Exact measures of the split state, as "p/q" strings.
    pub split_measures: Vec<(String, String)>,
}

fn ratio_string(r: Rational64) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn measure_invariance() -> Result<InvarianceReport> {
    let start = three_boxes();
    let steps = [
        (
            "phase",
            Fig8Transform::Phase {
                branch: "B".into(),
                theta: 1.1,
            },
        ),
        ("reshape", Fig8Transform::Reshape { branch: "C".into() }),
        (
            "split",
            Fig8Transform::Split {
                branch: "B".into(),
                k: 2,
            },
        ),
        (
            "interfere",
            Fig8Transform::Interfere {
                first: "B1".into(),
                second: "C'".into(),
                output: "D".into(),
            },
        ),
    ];
    let mut mu_a = vec![("initial".to_string(), start.measure("A")?)];
    let mut current = start.clone();
    for (name, t) in &steps {
        current = fig8_transform(&current, t, "A")?;
        mu_a.push((name.to_string(), current.measure("A")?));
    }
    let split = fig8_transform(
        &fig8_transform(
            &start,
            &Fig8Transform::Split {
                branch: "B".into(),
                k: 2,
            },
            "A",
        )?,
        &Fig8Transform::Split {
            branch: "C".into(),
            k: 3,
        },
        "A",
    )?;
    let split_measures = split
        .branches
        .iter()
        .map(|b| {
            let m = b.exact.ok_or_else(|| Error::InvalidParameter("inexact".into()))?;
            Ok((b.label.clone(), ratio_string(m)))
        })
        .collect::<Result<_>>()?;
    Ok(InvarianceReport {
        mu_a,
        split_measures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub worlds: usize,
    pub common_measure: f64,
    pub max_deviation: f64,
    /// Born measure and world-count fraction per original branch.
    pub branches: Vec<(String, f64, f64)>,
}

/// Refines a two-outcome decomposition with measures `(p, 1 − p)`; exact
/// when `p` is given as a fraction.
pub fn refinement_report(p: f64, eps: f64) -> Result<RefinementReport> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("measure {p} outside (0, 1)")));
    }
    let decomp = match Rational64::approximate_float(p) {
        Some(r) if *r.denom() <= 1000 && (*r.numer() as f64 / *r.denom() as f64 - p).abs() < 1e-15 => {
            BranchDecomposition::from_measures(vec![("up", r), ("down", Rational64::from(1) - r)])?
        }
        _ => BranchDecomposition::from_amplitudes(vec![
            ("up", Complex64::new(p.sqrt(), 0.0)),
            ("down", Complex64::new((1.0 - p).sqrt(), 0.0)),
        ])?,
    };
    let refined = equal_measure_refinement(&decomp, eps)?;
    Ok(RefinementReport {
        worlds: refined.branches.len(),
        common_measure: refined.common_measure,
        max_deviation: refined.max_deviation(),
        branches: decomp
            .branches
            .iter()
            .map(|b| (b.label.clone(), b.measure(), refined.count_fraction(&b.label)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SleepingBeautyReport {
    pub credence_heads: String,
    /// (p, exact credence, closed form p/(2 − p)).
    pub biased: Vec<(String, String, f64)>,
}

pub fn sleeping_beauty_report() -> Result<SleepingBeautyReport> {
    let biased = [(1, 4), (1, 3), (1, 2), (2, 3), (9, 10)]
        .iter()
        .map(|&(n, d)| {
            let p = Rational64::new(n, d);
            let c = sleeping_beauty_biased(p)?;
            Ok((
                ratio_string(p),
                ratio_string(c),
                sleeping_beauty_closed_form(n as f64 / d as f64),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(SleepingBeautyReport {
        credence_heads: ratio_string(sleeping_beauty()),
        biased,
    })
}
