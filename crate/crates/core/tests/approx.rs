use fbmlab::approx::{
    apply_weights, approx_fbm_at, brownian_path, brownian_path_with, convergence_report, decay_bounds,
    dyadic_variation_bound, exact_l2_difference, interpolate, ladder_step_direct, ladder_step_second_difference,
    ladder_weights, DecayConstants, DyadicGrid, PathSample,
};
use fbmlab::kernel::KernelSpec;
use fbmlab::rng::SeededStream;
use proptest::prelude::*;

fn sample_second_moment<F: Fn(&SeededStream) -> f64>(n: u64, f: F) -> f64 {
    (0..n).map(|i| f(&SeededStream::new(i, 77)).powi(2)).sum::<f64>() / n as f64
}

#[test]
fn terminal_variance_over_seeds() {
    let g = DyadicGrid::new(0).unwrap();
    let v = sample_second_moment(100_000, |s| brownian_path(g, 1.0, s).values[1]);
    assert!((v - 1.0).abs() <= 0.02, "{v}");
}

#[test]
fn refinement_consistency() {
    for seed in 0..20 {
        let s = SeededStream::new(seed, 1);
        let p4 = brownian_path(DyadicGrid::new(4).unwrap(), 1.0, &s);
        let p5 = brownian_path(DyadicGrid::new(5).unwrap(), 1.0, &s);
        let diff =
            p5.restrict(4).unwrap().values.iter().zip(&p4.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert_eq!(diff, 0.0);
    }
}

#[test]
fn ladder_variance_identity() {
    let spec = KernelSpec::new(0.75).unwrap();
    let w = ladder_weights(&spec, 1.0, 6).unwrap();
    let exact: f64 = w.iter().map(|x| x * x).sum::<f64>() / 64.0;
    let n = 100_000;
    let g = DyadicGrid::new(6).unwrap();
    let one = brownian_path(g, 1.0, &SeededStream::new(0, 77));
    assert_eq!(approx_fbm_at(&spec, 1.0, 6, &one).unwrap(), apply_weights(&w, &one).unwrap());
    let v = sample_second_moment(n, |s| apply_weights(&w, &brownian_path(g, 1.0, s)).unwrap());
    let se = exact * (2.0 / n as f64).sqrt();
    assert!((v - exact).abs() <= 4.0 * se, "{v} vs {exact}");
}

#[test]
fn l2_difference_monte_carlo() {
    let spec = KernelSpec::new(0.75).unwrap();
    for m in [1u32, 3] {
        let exact = exact_l2_difference(&spec, 1.0, m).unwrap();
        let g = DyadicGrid::new(m + 1).unwrap();
        let weights = (ladder_weights(&spec, 1.0, m).unwrap(), ladder_weights(&spec, 1.0, m + 1).unwrap());
        let n = 100_000;
        let v = sample_second_moment(n, |s| {
            let omega = brownian_path(g, 1.0, s);
            apply_weights(&weights.1, &omega).unwrap() - apply_weights(&weights.0, &omega).unwrap()
        });
        let se = exact * (2.0 / n as f64).sqrt();
        assert!((v - exact).abs() <= 4.0 * se, "m={m}: {v} vs {exact}");
    }
}

#[test]
fn convergence_report_bounds_and_slope() {
    let spec = KernelSpec::new(0.75).unwrap();
    let levels: Vec<u32> = (1..=8).collect();
    let rep = convergence_report(&spec, 1.0, &levels, &DecayConstants::for_kernel(&spec)).unwrap();
    assert!(rep.bound_violations(0.0).is_empty());
    let (_, up) = decay_bounds(&spec, 1.0, 3, &DecayConstants::for_kernel(&spec)).unwrap();
    assert_eq!(up, 0.0078125);
    let json = serde_json::to_value(&rep).unwrap();
    for key in ["hurst", "t", "levels", "exact_l2", "lower", "upper", "slope"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn interpolation_examples() {
    let z = interpolate(&[0.0; 9], 3).unwrap();
    assert!([0.0, 0.3, 0.77, 1.0].iter().all(|&t| z.eval(t) == 0.0));
    assert_eq!(interpolate(&[0.0, 1.0], 0).unwrap().eval(0.5), 0.5);
    assert!(interpolate(&[0.0, 1.0, 2.0], 0).is_err());
}

#[test]
fn variation_bound_dominates_partition_supremum() {
    let g = DyadicGrid::new(6).unwrap();
    let trials = 1000;
    let mut misses = 0;
    for k in 0..trials {
        let s = SeededStream::new(k, 5);
        let u = brownian_path(g, 1.0, &s.child(0));
        let w = brownian_path(g, 1.0, &s.child(1));
        let b = dyadic_variation_bound(&u, &w, 2.0, 1.5, 1.0).unwrap();
        if b.brute_force.unwrap() > b.bound {
            misses += 1;
        }
    }
    assert!(misses * 100 <= trials, "{misses} of {trials} trials above the bound");
}

#[test]
fn single_cell_difference() {
    let mut v = vec![0.0; 65];
    for x in v.iter_mut().skip(20) {
        *x = 0.3;
    }
    let u = PathSample::new(6, 1.0, v).unwrap();
    let w = PathSample::new(6, 1.0, vec![0.0; 65]).unwrap();
    let b = dyadic_variation_bound(&u, &w, 2.0, 1.5, 1.0).unwrap();
    assert!((b.brute_force.unwrap() - 0.09).abs() < 1e-15);
    assert!(b.brute_force.unwrap() <= b.bound);
}

/// Upper bound on (1 + ζ(γ/(q-1)))^{q-1}: d(t) is a sum of at most one dyadic increment
/// per level, plus a second level-1 increment at t = 1, and Hölder with weights n^γ
/// bounds |d(t)|^q by this constant times the dyadic sum.
fn chain_constant(q: f64, gamma: f64) -> f64 {
    let s = gamma / (q - 1.0);
    let n = 10_000;
    let zeta: f64 = (1..=n).map(|k| (k as f64).powf(-s)).sum::<f64>() + (n as f64).powf(1.0 - s) / (s - 1.0);
    (1.0 + zeta).powf(q - 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn second_difference_identity(h in 0.55f64..0.95, m in 0u32..5, seed in any::<u64>(), t in 0.2f64..=1.0) {
        let spec = KernelSpec::new(h).unwrap();
        let omega = brownian_path(DyadicGrid::new(m + 1).unwrap(), t, &SeededStream::new(seed, 0));
        let direct = ladder_step_direct(&spec, t, m, &omega).unwrap();
        let second = ladder_step_second_difference(&spec, t, m, &omega).unwrap();
        prop_assert!((direct - second).abs() < 1e-8, "{} vs {}", direct, second);
    }

    #[test]
    fn linearity(h in 0.5f64..0.95, m in 0u32..5, seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let spec = KernelSpec::new(h).unwrap();
        let omega = brownian_path(DyadicGrid::new(m).unwrap(), 1.0, &SeededStream::new(seed, 0));
        let base = approx_fbm_at(&spec, 1.0, m, &omega).unwrap();
        let scaled = approx_fbm_at(&spec, 1.0, m, &omega.scaled(alpha)).unwrap();
        prop_assert!((scaled - alpha * base).abs() <= 1e-12 * (1.0 + (alpha * base).abs()));
    }

    #[test]
    fn brownian_telescoping(m in 0u32..8, seed in any::<u64>(), t in 0.1f64..=1.0) {
        let spec = KernelSpec::new(0.5).unwrap();
        let omega = brownian_path(DyadicGrid::new(m).unwrap(), t, &SeededStream::new(seed, 0));
        let b = approx_fbm_at(&spec, t, m, &omega).unwrap();
        prop_assert!((b - omega.values[omega.values.len() - 1]).abs() < 1e-12);
    }

    #[test]
    fn interpolation_fixes_knots(m in 0u32..8, seed in any::<u64>()) {
        let p = brownian_path(DyadicGrid::new(m).unwrap(), 1.0, &SeededStream::new(seed, 0));
        let f = interpolate(&p.values, m).unwrap();
        prop_assert_eq!(f.resample(m).unwrap(), p.values.clone());
        let fine = f.resample(m + 2).unwrap();
        prop_assert_eq!(interpolate(&fine, m + 2).unwrap().resample(m).unwrap().len(), p.values.len());
    }

    #[test]
    fn sup_norm_below_variation_bound(seed in any::<u64>(), level in 1u32..8, q in 1.5f64..4.0, extra in 0.05f64..2.0) {
        let g = DyadicGrid::new(level).unwrap();
        let mut rng = SeededStream::new(seed, 9).rng();
        let u = brownian_path_with(g, 1.0, &mut rng);
        let w = brownian_path_with(g, 1.0, &mut rng);
        let gamma = q - 1.0 + extra;
        let b = dyadic_variation_bound(&u, &w, q, gamma, chain_constant(q, gamma)).unwrap();
        let sup = u.values.iter().zip(&w.values).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        prop_assert!(sup.powf(q) <= b.bound * (1.0 + 1e-12), "{} > {}", sup.powf(q), b.bound);
        prop_assert!(sup.powf(q) <= b.brute_force.unwrap() + 1e-12);
    }
}
