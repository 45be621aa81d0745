use fbmlab::gauss::{build_covariance, CovarianceSpec};
use fbmlab::rate::{
    ball_argmin, evaluate, rate_ball_inf, rate_exceedance_inf, rate_fd, rate_pl_path, sigma_norm, RateQuery,
};
use fbmlab::rng::SeededStream;
use proptest::prelude::*;

mod common;
use common::{ball_grid_search, random_spd};
use rand::Rng;
use std::f64::consts::PI;

#[test]
fn ball_matches_grid_search() {
    let mut rng = SeededStream::new(31, 0).rng();
    for k in 0..20 {
        let d = 2 + k % 2;
        let sigma = random_spd(d, &mut rng);
        let center: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let radius = rng.random_range(0.0..1.5);
        let cov = CovarianceSpec::from_matrix(sigma.clone()).unwrap();
        let got = rate_ball_inf(&cov, &center, radius).unwrap();
        let oracle = ball_grid_search(&sigma, &center, radius);
        assert!((got - oracle).abs() <= 1e-3, "instance {k}: {got} vs {oracle}");
    }
}

#[test]
fn brownian_energy() {
    let mut rng = SeededStream::new(32, 0).rng();
    for m in 1..=7u32 {
        let n = 1usize << m;
        let dt = 1.0 / n as f64;
        let mut knots = vec![0.0];
        for _ in 0..n {
            let last = *knots.last().unwrap();
            knots.push(last + rng.random_range(-1.0..1.0) * dt.sqrt());
        }
        let energy: f64 = knots.windows(2).map(|w| (w[1] - w[0]).powi(2) / dt).sum::<f64>() * 0.5;
        let got = rate_pl_path(0.5, m, &knots).unwrap();
        assert!((got - energy).abs() <= 1e-9 * energy.max(1.0), "m={m}: {got} vs {energy}");
    }
}

#[test]
fn exceedance_half_for_grids_containing_one() {
    let mut rng = SeededStream::new(33, 0).rng();
    for _ in 0..20 {
        let h = rng.random_range(0.5..0.99);
        let mut times: Vec<f64> = (0..rng.random_range(0..8)).map(|_| rng.random_range(0.01..1.0)).collect();
        times.push(1.0);
        times.sort_by(f64::total_cmp);
        times.dedup();
        let cov = build_covariance(h, &times).unwrap();
        assert_eq!(rate_exceedance_inf(&cov, 1.0, true).unwrap().value, 0.5);
    }
}

fn smooth_target(seed: u64) -> impl Fn(f64) -> f64 {
    let mut rng = SeededStream::new(seed, 34).rng();
    let coef: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    move |t| coef.iter().enumerate().map(|(k, c)| c * ((k as f64 + 0.5) * PI * t).sin()).sum()
}

#[test]
fn path_rate_nondecreasing_under_refinement() {
    for seed in 0..10 {
        let f = smooth_target(seed);
        let mut prev = 0.0;
        for m in 0..=6u32 {
            let n = 1usize << m;
            let knots: Vec<f64> = (0..=n).map(|k| f(k as f64 / n as f64)).collect();
            let j = rate_pl_path(0.75, m, &knots).unwrap();
            assert!(j >= prev * (1.0 - 1e-9), "seed {seed} m={m}: {j} < {prev}");
            prev = j;
        }
    }
}

fn instance() -> impl Strategy<Value = (CovarianceSpec, Vec<f64>)> {
    (0.5f64..0.95, prop::collection::btree_set(1u32..=64, 1..6), any::<u64>()).prop_map(|(h, set, seed)| {
        let times: Vec<f64> = set.into_iter().map(|k| k as f64 / 64.0).collect();
        let mut rng = SeededStream::new(seed, 35).rng();
        let x = times.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        (build_covariance(h, &times).unwrap(), x)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_scaling((cov, x) in instance(), c in -4.0f64..4.0) {
        let base = rate_fd(&cov, &x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let got = rate_fd(&cov, &scaled).unwrap();
        prop_assert!((got - c * c * base).abs() <= 1e-12 * (1.0 + c * c * base));
    }

    #[test]
    fn zero_radius_is_point_rate((cov, x) in instance()) {
        let ball = rate_ball_inf(&cov, &x, 0.0).unwrap();
        let point = rate_fd(&cov, &x).unwrap();
        prop_assert!((ball - point).abs() <= 1e-12 * (1.0 + point));
    }

    #[test]
    fn ball_argmin_attains_value((cov, x) in instance(), r in 0.0f64..3.0) {
        let v = rate_ball_inf(&cov, &x, r).unwrap();
        let arg = ball_argmin(&cov, &x, r).unwrap();
        prop_assert!((rate_fd(&cov, &arg).unwrap() - v).abs() <= 1e-9 * (1.0 + v));
        let d: Vec<f64> = arg.iter().zip(&x).map(|(a, b)| a - b).collect();
        prop_assert!(sigma_norm(&cov, &d).unwrap() <= r * (1.0 + 1e-9) + 1e-12);
        let q = evaluate(&cov, &RateQuery::Ball { center: x.clone(), radius: r }).unwrap();
        prop_assert_eq!(q.value, v);
    }

    #[test]
    fn exceedance_symmetric_and_attained((cov, _x) in instance(), a in 0.0f64..3.0) {
        let one = rate_exceedance_inf(&cov, a, true).unwrap();
        let two = rate_exceedance_inf(&cov, a, false).unwrap();
        prop_assert_eq!(one.value, two.value);
        let arg = one.argmin.unwrap();
        prop_assert!(arg.iter().cloned().fold(f64::NEG_INFINITY, f64::max) >= a * (1.0 - 1e-12));
        prop_assert!((rate_fd(&cov, &arg).unwrap() - one.value).abs() <= 1e-9 * (1.0 + one.value));
    }

    #[test]
    fn lipschitz_on_compacts((cov, x) in instance(), seed in any::<u64>(), scale in 1e-6f64..1e-1) {
        let mut rng = SeededStream::new(seed, 36).rng();
        let dx: Vec<f64> = x.iter().map(|_| rng.random_range(-scale..scale)).collect();
        let y: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        // |∇I| = |Σ⁻¹x| <= |x| / λ_min on the segment.
        let lam_min = cov.sigma.clone().symmetric_eigen().eigenvalues.min();
        let lip = (norm(&x) + norm(&dx)) / lam_min;
        let diff = (rate_fd(&cov, &y).unwrap() - rate_fd(&cov, &x).unwrap()).abs();
        prop_assert!(diff <= lip * norm(&dx) * (1.0 + 1e-6) + 1e-12, "{} > {}", diff, lip * norm(&dx));
    }

    #[test]
    fn level_sets_bounded((cov, x) in instance()) {
        let alpha = rate_fd(&cov, &x).unwrap();
        prop_assert!(sigma_norm(&cov, &x).unwrap() <= (2.0 * alpha).sqrt() * (1.0 + 1e-12));
    }
}
