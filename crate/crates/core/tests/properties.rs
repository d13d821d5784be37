use num_complex::Complex64;
use num_rational::Rational64;
use proptest::prelude::*;

use qfound_core::bohm::{count_inversions, ks_distance};
use qfound_core::grw::{self, GrwParams};
use qfound_core::mwi::{
    self, fig8_transform, sleeping_beauty_biased, three_boxes, BranchDecomposition, Fig8Transform,
    RecordBasis,
};
use qfound_core::qstate::{
    basis_change_xy, projective_measure, robertson_bound, DichotomicObservable,
    HermitianOperator, StateVector,
};
use qfound_core::rng::substream;
use qfound_core::scenarios::interferometer::{ifm, MziConfig};
use qfound_core::scenarios::stern_gerlach::{stern_gerlach_bohm, SternGerlachConfig};
use qfound_core::wavepacket::{evolve_free, gaussian_packet, uncertainty, Grid, PacketSpec, WaveFunction};

fn amplitudes(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn qubit_state() -> impl Strategy<Value = StateVector> {
    (1usize..=3)
        .prop_flat_map(|n| (Just(n), amplitudes(1 << n)))
        .prop_map(|(n, a)| StateVector::qubits(n, a).unwrap())
}

fn hermitian(dim: usize) -> impl Strategy<Value = HermitianOperator> {
    amplitudes(dim * dim).prop_map(move |g| {
        let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                m[r * dim + c] = (g[r * dim + c] + g[c * dim + r].conj()) * 0.5;
            }
        }
        HermitianOperator::new(dim, m).unwrap()
    })
}

proptest! {
    #[test]
    fn basis_change_preserves_norm(state in qubit_state(), site in 0usize..3) {
        prop_assume!(site < state.n_sites());
        let changed = basis_change_xy(&state, site).unwrap();
        prop_assert!((changed.norm_sqr() - 1.0).abs() <= 1e-12);
        let back = basis_change_xy(&changed, site).unwrap();
        let overlap = back.inner(&state).unwrap();
        prop_assert!((overlap.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn measurement_leaves_normalized_state(state in qubit_state(), site in 0usize..3, x in any::<bool>(), seed in any::<u64>()) {
        prop_assume!(site < state.n_sites());
        let obs = if x { DichotomicObservable::x(site) } else { DichotomicObservable::y(site) };
        let mut rng = substream(seed, "measure", 0);
        let (outcome, post) = projective_measure(&state, obs, &mut rng).unwrap();
        prop_assert!(outcome == 1 || outcome == -1);
        prop_assert!((post.norm_sqr() - 1.0).abs() <= 1e-12);
        // a repeated measurement reproduces the outcome
        let value = qfound_core::qstate::parity_expectation(&post, &[obs]).unwrap();
        prop_assert!((value - outcome as f64).abs() <= 1e-10);
    }

    #[test]
    fn observables_are_involutive_and_anticommute(state in qubit_state(), site in 0usize..3) {
        prop_assume!(site < state.n_sites());
        let basis = state.site_basis(site);
        let x = DichotomicObservable::x(site).site_matrix(basis).unwrap();
        let y = DichotomicObservable::y(site).site_matrix(basis).unwrap();
        let mul = |a: &[Complex64; 4], b: &[Complex64; 4]| {
            [
                a[0] * b[0] + a[1] * b[2],
                a[0] * b[1] + a[1] * b[3],
                a[2] * b[0] + a[3] * b[2],
                a[2] * b[1] + a[3] * b[3],
            ]
        };
        let id = [1.0, 0.0, 0.0, 1.0];
        for m in [&x, &y] {
            let sq = mul(m, m);
            for i in 0..4 {
                prop_assert!((sq[i] - id[i]).norm() <= 1e-12);
            }
            prop_assert!((m[1] - m[2].conj()).norm() <= 1e-12);
        }
        let (xy, yx) = (mul(&x, &y), mul(&y, &x));
        for i in 0..4 {
            prop_assert!((xy[i] + yx[i]).norm() <= 1e-12);
        }
    }

    #[test]
    fn robertson_holds(
        (state, a, b) in (1usize..=3).prop_flat_map(|n| {
            let dim = 1 << n;
            (amplitudes(dim).prop_map(move |v| StateVector::qubits(n, v).unwrap()), hermitian(dim), hermitian(dim))
        })
    ) {
        let bound = robertson_bound(&state, &a, &b).unwrap();
        prop_assert!(bound.lhs >= bound.rhs - 1e-10, "{} < {}", bound.lhs, bound.rhs);
    }

    #[test]
    fn decomposition_round_trips(state in qubit_state(), site in 0usize..3) {
        prop_assume!(site < state.n_sites());
        let record = RecordBasis::computational(&state, site).unwrap();
        let decomp = mwi::decompose(&state, &record).unwrap();
        prop_assert!((decomp.total_measure() - 1.0).abs() <= 1e-12);
        let back = decomp.recombine().unwrap();
        for (a, b) in back.amplitudes().iter().zip(state.amplitudes()) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }
}

fn transform() -> impl Strategy<Value = Fig8Transform> {
    prop_oneof![
        (prop::sample::select(vec!["B", "C"]), -3.0f64..3.0).prop_map(|(b, theta)| Fig8Transform::Phase {
            branch: b.into(),
            theta
        }),
        prop::sample::select(vec!["B", "C"]).prop_map(|b| Fig8Transform::Reshape { branch: b.into() }),
        (prop::sample::select(vec!["B", "C"]), 1usize..4).prop_map(|(b, k)| Fig8Transform::Split {
            branch: b.into(),
            k
        }),
        Just(Fig8Transform::Interfere {
            first: "B".into(),
            second: "C".into(),
            output: "D".into()
        }),
    ]
}

/// Applies transforms in order, skipping any whose branches no longer exist.
fn apply_all(start: &BranchDecomposition, ts: &[Fig8Transform]) -> Vec<BranchDecomposition> {
    let mut out = vec![start.clone()];
    for t in ts {
        if let Ok(next) = fig8_transform(out.last().unwrap(), t, "A") {
            out.push(next);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn measure_of_untouched_branch_is_local(ts in prop::collection::vec(transform(), 1..6)) {
        for d in apply_all(&three_boxes(), &ts) {
            prop_assert!((d.total_measure() - 1.0).abs() <= 1e-12);
            prop_assert!((d.measure("A").unwrap() - 1.0 / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn protected_branch_cannot_be_touched(theta in -3.0f64..3.0) {
        let t = Fig8Transform::Phase { branch: "A".into(), theta };
        prop_assert!(fig8_transform(&three_boxes(), &t, "A").is_err());
    }
}

proptest! {
    #[test]
    fn biased_sleeping_beauty_matches_closed_form(num in 0i64..=50, den in 1i64..=50) {
        prop_assume!(num <= den);
        let p = Rational64::new(num, den);
        let c = sleeping_beauty_biased(p).unwrap();
        prop_assert_eq!(c, p / (Rational64::from_integer(2) - p));
    }

    #[test]
    fn tail_factors_decrease_with_distance(l in 0.0f64..10.0, dl in 1e-3f64..5.0, d in 0.5f64..3.0) {
        prop_assert!(grw::tail_ratio(l + dl, d) < grw::tail_ratio(l, d));
        prop_assert!(grw::log_tail_ratio(l + dl, d) < grw::log_tail_ratio(l, d));
        prop_assert!(grw::log_tail_disturbance(l + dl, 0.1, d) < grw::log_tail_disturbance(l, 0.1, d));
    }

    #[test]
    fn hits_renormalize(center in -4.0f64..4.0, d in 0.2f64..2.0, x0 in -2.0f64..2.0) {
        let grid = Grid::new(-8.0, 8.0, 256).unwrap();
        let psi = gaussian_packet(PacketSpec::at(x0, 0.5), grid).unwrap();
        let hit = grw::apply_hit(&psi, 0, center, d).unwrap();
        prop_assert!((hit.norm_sqr() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn free_evolution_is_unitary_and_minimum_uncertainty_holds(
        x0 in -1.0f64..1.0, width in 0.3f64..1.0, k in -2.0f64..2.0, t in 0.0f64..2.0,
    ) {
        let grid = Grid::new(-40.0, 40.0, 1024).unwrap();
        let psi = gaussian_packet(PacketSpec::moving(x0, width, k), grid).unwrap();
        let out = evolve_free(&psi, t).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-9);
        let (dx, dp) = uncertainty(&out).unwrap();
        prop_assert!(dx * dp >= 0.5 - 1e-6);
        // closed-form spreading of the free Gaussian
        let expected = width * (1.0 + (t / (2.0 * width * width)).powi(2)).sqrt();
        prop_assert!((dx - expected).abs() / expected <= 1e-3);
    }

    #[test]
    fn superpositions_obey_heisenberg(a in amplitudes(2), c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
        let grid = Grid::new(-20.0, 20.0, 512).unwrap();
        let p1 = gaussian_packet(PacketSpec::at(c1, 0.7), grid).unwrap();
        let p2 = gaussian_packet(PacketSpec::moving(c2, 1.0, 1.0), grid).unwrap();
        let values = p1.values().iter().zip(p2.values()).map(|(u, v)| a[0] * u + a[1] * v).collect();
        let Ok(psi) = WaveFunction::normalized(vec![grid], values) else {
            return Ok(());
        };
        let (dx, dp) = uncertainty(&psi).unwrap();
        prop_assert!(dx * dp >= 0.5 - 1e-6);
    }

    #[test]
    fn inversion_count_matches_pairwise(xs in prop::collection::vec(-100.0f64..100.0, 0..60)) {
        let mut naive = 0u64;
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                if xs[i] > xs[j] {
                    naive += 1;
                }
            }
        }
        prop_assert_eq!(count_inversions(&xs), naive);
    }

    #[test]
    fn ks_distance_is_a_probability(xs in prop::collection::vec(-3.0f64..3.0, 1..100)) {
        let d = ks_distance(&xs, |x| ((x + 3.0) / 6.0).clamp(0.0, 1.0));
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn ifm_probabilities_sum_to_one(r in 0.01f64..0.99, phase in -3.2f64..3.2, object in any::<bool>()) {
        let cfg = MziConfig { reflectivity: r, phase, object_present: object, ..MziConfig::default() };
        let p = ifm(&cfg).unwrap();
        prop_assert!((p.total() - 1.0).abs() <= 1e-12);
        prop_assert!(p.as_array().iter().all(|v| (-1e-15..=1.0 + 1e-12).contains(v)));
    }

    #[test]
    fn substreams_are_reproducible(seed in any::<u64>(), index in any::<u64>()) {
        use rand::Rng;
        let a: [u64; 4] = substream(seed, "stream", index).gen();
        let b: [u64; 4] = substream(seed, "stream", index).gen();
        let c: [u64; 4] = substream(seed, "other", index).gen();
        prop_assert_eq!(a, b);
        prop_assert_ne!(a, c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    // The final spot is fixed by the initial position; only the spin label
    // attached to it depends on the magnet orientation.
    #[test]
    fn stern_gerlach_spot_is_contextual(fraction in 0.02f64..0.98) {
        prop_assume!((fraction - 0.5).abs() > 0.02);
        let up = SternGerlachConfig { magnet_sign: 1, ..SternGerlachConfig::pointer(1) };
        let down = SternGerlachConfig { magnet_sign: -1, ..up };
        let a = stern_gerlach_bohm(&up, fraction).unwrap();
        let b = stern_gerlach_bohm(&down, fraction).unwrap();
        prop_assert_eq!(a.final_spot, b.final_spot);
        prop_assert_ne!(a.outcome_label, b.outcome_label);
    }
}

#[test]
fn hit_schedule_is_poissonian() {
    let params = GrwParams::new(2.0, 1.0).unwrap();
    let mut rng = substream(5, "poisson", 0);
    // counts per unit window over 10⁴ windows
    let windows = 10_000;
    let hits = grw::sample_hit_schedule(1, windows as f64, &params, &mut rng);
    let mut counts = vec![0u32; windows];
    for h in &hits {
        counts[(h.time as usize).min(windows - 1)] += 1;
    }
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / windows as f64;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (windows - 1) as f64;
    assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    assert!((0.9..=1.1).contains(&(var / mean)), "dispersion {}", var / mean);
}
