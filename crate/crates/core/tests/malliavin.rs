use fbmlab::approx::DyadicGrid;
use fbmlab::gauss::{fbm_covariance, hypercontractivity_bound};
use fbmlab::kernel::{cell_integral, cross_covariance_quadrature, KernelSpec};
use fbmlab::malliavin::{
    c_alpha, c_n_h, capacity_tail_bound, capacity_tail_sum, chebyshev_capacity_bound, derivative_inner_product,
    malliavin_kernel, optimize_tail_bound, quadratic_sobolev_bound, step_derivative, step_derivative_norm_sq,
    validate_tail_params, CapacityIndex, TailCandidate, TailMesh,
};
use fbmlab::Error;
use proptest::prelude::*;

#[test]
fn kernel_support() {
    let spec = KernelSpec::new(0.75).unwrap();
    let g = DyadicGrid::new(4).unwrap();
    let k = malliavin_kernel(&spec, 0.5, g).unwrap();
    assert!(k[..8].iter().all(|&v| v > 0.0));
    assert!(k[8..].iter().all(|&v| v == 0.0));
}

#[test]
fn midpoint_variance_converges_at_half_rate() {
    // The s^{1/2-H} singularity limits the midpoint rule to an h^{1/2} error at H = 3/4.
    let spec = KernelSpec::new(0.75).unwrap();
    let err: Vec<f64> =
        [10u32, 12, 14].iter().map(|&l| derivative_inner_product(&spec, 1.0, 1.0, l).unwrap() - 1.0).collect();
    assert!(err[1].abs() <= 3e-3, "{err:?}");
    for w in err.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 2.0).abs() < 0.05, "{err:?}");
    }
}

#[test]
fn derivative_inner_products_match_covariance() {
    let probes = [0.1, 0.25, 0.4, 0.6, 0.8, 1.0];
    for h in [0.6, 0.75, 0.9] {
        let spec = KernelSpec::new(h).unwrap();
        for (j, &t) in probes.iter().enumerate() {
            for &s in &probes[..=j] {
                let q = cross_covariance_quadrature(&spec, s, t).unwrap();
                assert!((q - fbm_covariance(h, s, t).unwrap()).abs() <= 1e-4);
            }
        }
    }
}

#[test]
fn step_derivative_examples() {
    let bm = KernelSpec::new(0.5).unwrap();
    assert!(step_derivative(&bm, 0.7, 3).unwrap().iter().all(|&v| v == 1.0));
    let spec = KernelSpec::new(0.75).unwrap();
    for (t, m) in [(1.0, 3u32), (0.6, 5)] {
        let u = step_derivative(&spec, t, m).unwrap();
        let h = t / u.len() as f64;
        let total: f64 = u.iter().map(|v| h * v).sum();
        assert!((total - cell_integral(&spec, t, 0.0, t).unwrap()).abs() < 1e-9);
        // Isometry: independent increments with variance h give Var B_t^(m) = Σ (h u_i)² / h.
        let variance: f64 = u.iter().map(|v| (h * v).powi(2) / h).sum();
        assert!((step_derivative_norm_sq(&u, t) - variance).abs() < 1e-14);
        assert!(variance <= t.powf(1.5));
    }
}

#[test]
fn sobolev_constant_rederived() {
    for r in 0..=5u32 {
        for p in [2.5, 3.0, 4.0] {
            // r+1 derivative orders, hypercontractivity on the second chaos, the fourth-moment
            // factor (2√3)², and n^{l/2} <= 2^{r/2} for the derivatives.
            let chain = (r as f64 + 1.0)
                * hypercontractivity_bound(2, p).unwrap()
                * (2.0 * 3f64.sqrt()).powi(2)
                * 2f64.powf(r as f64 / 2.0);
            let got = quadratic_sobolev_bound(1.0, &CapacityIndex::new(p, r).unwrap()).unwrap();
            assert!((got - chain).abs() <= 1e-12 * chain, "r={r} p={p}: {got} vs {chain}");
        }
    }
    assert!(quadratic_sobolev_bound(1.0, &CapacityIndex::new(2.0, 0).unwrap()).is_err());
    assert_eq!(quadratic_sobolev_bound(1.0, &CapacityIndex::new(3.0, 0).unwrap()).unwrap(), 72.0);
    assert!((quadratic_sobolev_bound(0.5, &CapacityIndex::new(3.0, 2).unwrap()).unwrap() - 108.0).abs() < 1e-12);
}

#[test]
fn worked_tuple_and_constants() {
    let cand = TailCandidate {
        n: 2,
        q: 5.0,
        theta: 0.1,
        gamma: 4.5,
        alpha: 0.01,
        idx: CapacityIndex { p: 3.0, r: 2 },
        hurst: 0.75,
        c_q_gamma: 1.0,
    };
    let p = validate_tail_params(&cand).unwrap();
    assert!((p.derived.beta - 1.08).abs() <= 1e-12);
    let e = validate_tail_params(&TailCandidate { q: 4.0, ..cand }).unwrap_err();
    assert!(matches!(&e, Error::Infeasible(c) if c == "q > (H-1/2)^{-1}"), "{e}");
    assert!((c_n_h(1, 0.75) - 24.0 * (1.0 + 2f64.sqrt())).abs() <= 1e-9);
    // Σ_{k>=0} C_α 2^{-kα} = 1 splits λ exactly across levels.
    let ca = c_alpha(0.3);
    let total: f64 = (0..2000).map(|k| ca * 2f64.powf(-0.3 * k as f64)).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn h_09_region_nonempty() {
    let mesh = TailMesh::default();
    for r in 0..=4u32 {
        let opt = optimize_tail_bound(5, 0.5, &CapacityIndex::new(3.0, r).unwrap(), 0.9, &mesh, 1.0).unwrap();
        assert!(opt.bound.is_finite() && opt.bound > 0.0);
        assert!(opt.params.q > 2.5);
    }
}

#[test]
fn optimum_below_every_mesh_point() {
    let mesh = TailMesh { q_divisions: 6, theta_divisions: 7, alpha_divisions: 5, ..TailMesh::default() };
    let idx = CapacityIndex::new(3.0, 2).unwrap();
    let (h, m, lambda) = (0.75, 6, 0.3);
    let opt = optimize_tail_bound(m, lambda, &idx, h, &mesh, 1.0).unwrap();
    let q_min = 1.0 / (h - 0.5);
    let mut probed = 0;
    for n in 1..=mesh.n_max {
        for j in 1..=mesh.q_divisions {
            let q = q_min + (mesh.q_max - q_min) * j as f64 / mesh.q_divisions as f64;
            for i in 1..mesh.theta_divisions {
                for &off in &mesh.gamma_offsets {
                    for k in 1..mesh.alpha_divisions {
                        let nf = n as f64;
                        let theta_hi = (q * h - q / (2.0 * nf) - 1.0).min(q / 2.0 - 1.0);
                        let theta = theta_hi * i as f64 / mesh.theta_divisions as f64;
                        let alpha = (h - (1.0 + theta) / q - 1.0 / (2.0 * nf)) * k as f64 / mesh.alpha_divisions as f64;
                        let cand =
                            TailCandidate { n, q, theta, gamma: q - 1.0 + off, alpha, idx, hurst: h, c_q_gamma: 1.0 };
                        if let Ok(p) = validate_tail_params(&cand) {
                            probed += 1;
                            assert!(opt.bound <= capacity_tail_bound(m, lambda, &p).unwrap());
                        }
                    }
                }
            }
        }
    }
    assert!(probed > 100);
}

#[test]
fn refinement_never_increases_bound() {
    let idx = CapacityIndex::new(3.0, 2).unwrap();
    let coarse = TailMesh::default();
    for (h, m, lambda) in [(0.75, 10, 0.1), (0.9, 4, 1.0), (0.6, 8, 0.5)] {
        let a = optimize_tail_bound(m, lambda, &idx, h, &coarse, 1.0).unwrap();
        let b = optimize_tail_bound(m, lambda, &idx, h, &coarse.refined(), 1.0).unwrap();
        assert!(b.bound <= a.bound, "H={h}: {} > {}", b.bound, a.bound);
        let wider = optimize_tail_bound(m, 2.0 * lambda, &idx, h, &coarse, 1.0).unwrap();
        assert!(wider.bound < a.bound);
    }
}

fn feasible() -> impl Strategy<Value = TailCandidate> {
    (0.55f64..0.95, 1u32..6, 0.05f64..0.95, 0.05f64..0.95, 0.01f64..2.0, 0.05f64..0.95, 1.1f64..6.0, 0u32..4)
        .prop_filter_map("infeasible", |(h, n, qf, tf, goff, af, p, r)| {
            let nf = n as f64;
            let q = 1.0 / (h - 0.5) + 1.0 + 15.0 * qf;
            let theta = tf * (q * h - q / (2.0 * nf) - 1.0).min(q / 2.0 - 1.0);
            let alpha = af * (h - (1.0 + theta) / q - 1.0 / (2.0 * nf));
            let c = TailCandidate {
                n,
                q,
                theta,
                gamma: q - 1.0 + goff,
                alpha,
                idx: CapacityIndex { p, r },
                hurst: h,
                c_q_gamma: 1.0,
            };
            validate_tail_params(&c).ok().map(|_| c)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn derived_constants_positive(c in feasible()) {
        let p = validate_tail_params(&c).unwrap();
        let d = p.derived;
        for v in [d.beta, d.kappa, d.c_theta_gamma, d.c_q_theta, d.c_n_h, d.c_rpnh, d.c_alpha, p.prefactor()] {
            prop_assert!(v > 0.0 && v.is_finite());
        }
    }

    #[test]
    fn geometric_sums(c in feasible(), lambda in 0.05f64..5.0, from in 1u32..6, len in 0u32..30) {
        let p = validate_tail_params(&c).unwrap();
        let to = from + len;
        let direct: f64 = (from..=to).map(|m| capacity_tail_bound(m, lambda, &p).unwrap()).sum();
        let closed = capacity_tail_sum(from, Some(to), lambda, &p).unwrap();
        prop_assert!((direct - closed).abs() <= 1e-12 * closed);
        prop_assert!(capacity_tail_sum(from, None, lambda, &p).unwrap().is_finite());
    }

    #[test]
    fn tail_bound_scaling(c in feasible(), lambda in 0.05f64..5.0, m in 1u32..20) {
        let p = validate_tail_params(&c).unwrap();
        let b = capacity_tail_bound(m, lambda, &p).unwrap();
        let doubled = capacity_tail_bound(2 * m, lambda, &p).unwrap();
        let expect = b * 2f64.powf(-(m as f64) * p.derived.kappa);
        prop_assert!((doubled - expect).abs() <= 1e-12 * expect);
        prop_assert!(capacity_tail_bound(m, 2.0 * lambda, &p).unwrap() < b);
    }

    #[test]
    fn chebyshev_monotone(norm in 0.0f64..10.0, l1 in 0.01f64..10.0, dl in 0.01f64..10.0) {
        let a = chebyshev_capacity_bound(norm, l1).unwrap();
        let b = chebyshev_capacity_bound(norm, l1 + dl).unwrap();
        prop_assert!(b <= a);
        if norm > 0.0 {
            prop_assert!(b < a);
        }
    }
}
