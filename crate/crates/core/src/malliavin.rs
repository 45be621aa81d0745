//! Malliavin derivative kernels of B_t and of the ladder, Sobolev and Chebyshev
//! capacity bounds, and the tail-bound constants for the ladder increments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ui;

use crate::approx::{ladder_weights, DyadicGrid};
use crate::error::{Error, Result};
use crate::kernel::{eval_kernel, KernelSpec};

/// Capacity index (p, r): integrability p > 1, differentiability r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityIndex {
    pub p: f64,
    pub r: u32,
}

impl CapacityIndex {
    pub fn new(p: f64, r: u32) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::domain(format!("capacity index needs p > 1, got {p}")));
        }
        Ok(CapacityIndex { p, r })
    }
}

/// DB_t(s) = K(t,s) 1_{s<t} at the midpoints of the grid cells.
pub fn malliavin_kernel(spec: &KernelSpec, t: f64, grid: DyadicGrid) -> Result<Vec<f64>> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::domain(format!("time {t} outside (0, 1]")));
    }
    grid.midpoints().into_iter().map(|s| if s < t { eval_kernel(spec, t, s) } else { Ok(0.0) }).collect()
}

/// ⟨DB_s, DB_t⟩ by the midpoint rule on the level-m grid.
pub fn derivative_inner_product(spec: &KernelSpec, s: f64, t: f64, level: u32) -> Result<f64> {
    let grid = DyadicGrid::new(level)?;
    let ks = malliavin_kernel(spec, s, grid)?;
    let kt = malliavin_kernel(spec, t, grid)?;
    let h = 1.0 / grid.cells() as f64;
    Ok(h * ks.iter().zip(&kt).map(|(a, b)| a * b).sum::<f64>())
}

/// Cell values (2^m/t) ∫_{cell i} K(t,r) dr of the step kernel u_t^(m) = D B_t^(m).
pub fn step_derivative(spec: &KernelSpec, t: f64, m: u32) -> Result<Vec<f64>> {
    ladder_weights(spec, t, m)
}

/// ‖u_t^(m)‖² = (t/2^m) Σ_i value_i².
pub fn step_derivative_norm_sq(values: &[f64], t: f64) -> f64 {
    t / values.len() as f64 * values.iter().map(|v| v * v).sum::<f64>()
}

/// C_{r,p} = 36 (r+1)(p-1) 2^{r/2}.
pub fn sobolev_constant(idx: &CapacityIndex) -> Result<f64> {
    if !(idx.p > 2.0) {
        return Err(Error::domain(format!("quadratic Sobolev bound needs p > 2, got {}", idx.p)));
    }
    Ok(36.0 * (idx.r as f64 + 1.0) * (idx.p - 1.0) * 2f64.powf(idx.r as f64 / 2.0))
}

/// C_{r,p} ‖X‖₂² bounds the (r,p)-Sobolev norm of X² for a first-chaos X.
pub fn quadratic_sobolev_bound(l2_norm: f64, idx: &CapacityIndex) -> Result<f64> {
    if !(l2_norm >= 0.0) {
        return Err(Error::domain("L2 norm must be nonnegative"));
    }
    Ok(sobolev_constant(idx)? * l2_norm * l2_norm)
}

/// ‖φ‖ / λ, the Chebyshev bound on the capacity of {φ > λ}.
pub fn chebyshev_capacity_bound(sobolev_norm: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    if !(sobolev_norm >= 0.0) {
        return Err(Error::domain("Sobolev norm must be nonnegative"));
    }
    Ok(sobolev_norm / lambda)
}

/// An unvalidated tuple (N, q, θ, γ, α) with capacity index and Hurst parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCandidate {
    pub n: u32,
    pub q: f64,
    pub theta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub idx: CapacityIndex,
    pub hurst: f64,
    /// The dyadic variation constant C_{q,γ}.
    pub c_q_gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub beta: f64,
    /// 2N(H - (1+θ)/q) - 1, the per-level decay exponent of the bound.
    pub kappa: f64,
    pub c_theta_gamma: f64,
    pub c_q_theta: f64,
    pub c_n_h: f64,
    pub c_rpnh: f64,
    pub c_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBoundParams {
    pub n: u32,
    pub q: f64,
    pub theta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub idx: CapacityIndex,
    pub hurst: f64,
    pub c_q_gamma: f64,
    pub derived: DerivedConstants,
}

/// C_{N,H} = 2^{4N-1} (4N-1)^N (1 + 2^{2N(1-H)}).
pub fn c_n_h(n: u32, hurst: f64) -> f64 {
    let nf = n as f64;
    2f64.powf(4.0 * nf - 1.0) * (4.0 * nf - 1.0).powf(nf) * (1.0 + 2f64.powf(2.0 * nf * (1.0 - hurst)))
}

/// C_{r,p,N,H} = (r+1)(2N+1)(p-1)^{N/2}(2N)^{r/2} C_{N,H}.
pub fn c_rpnh(idx: &CapacityIndex, n: u32, hurst: f64) -> f64 {
    let nf = n as f64;
    let rf = idx.r as f64;
    (rf + 1.0) * (2.0 * nf + 1.0) * (idx.p - 1.0).powf(nf / 2.0) * (2.0 * nf).powf(rf / 2.0) * c_n_h(n, hurst)
}

/// Relative truncation level of the C_{θ,γ} series.
pub const SERIES_REL_TOL: f64 = 1e-14;

/// Σ_{n>=1} n^γ 2^{-nθ}, truncated once the integral bound on the tail drops below
/// 1e-14 of the partial sum.
pub fn theta_gamma_series(theta: f64, gamma: f64) -> f64 {
    let x = theta * std::f64::consts::LN_2;
    let peak = gamma / x;
    let mut sum = 0.0;
    let mut n = 1u64;
    loop {
        let nf = n as f64;
        sum += (gamma * nf.ln() - nf * x).exp();
        // Past the peak the summand decreases, so the tail is at most ∫_n^∞ u^γ e^{-ux} du.
        if nf >= peak && n.is_multiple_of(8) {
            let tail = gamma_ui(gamma + 1.0, nf * x) / x.powf(gamma + 1.0);
            if tail < SERIES_REL_TOL * sum {
                return sum;
            }
        }
        n += 1;
    }
}

/// C_{θ,γ} = (Σ_{n>=1} n^γ 2^{-nθ})^{-1}.
pub fn c_theta_gamma(theta: f64, gamma: f64) -> f64 {
    1.0 / theta_gamma_series(theta, gamma)
}

/// C_{q,θ} = (2^{2(1-(1+θ)/q)-1} - 1)^{-1}.
pub fn c_q_theta(q: f64, theta: f64) -> f64 {
    1.0 / (2f64.powf(2.0 * (1.0 - (1.0 + theta) / q) - 1.0) - 1.0)
}

/// C_α = (Σ_{i>=0} 2^{-iα})^{-1} = 1 - 2^{-α}.
pub fn c_alpha(alpha: f64) -> f64 {
    1.0 - 2f64.powf(-alpha)
}

fn require(ok: bool, constraint: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Infeasible(constraint.to_string()))
    }
}

/// Checks the constraints in order, naming the first one violated, and computes the
/// derived constants.
pub fn validate_tail_params(c: &TailCandidate) -> Result<TailBoundParams> {
    let h = c.hurst;
    let nf = c.n as f64;
    require(h > 0.5 && h < 1.0, "1/2 < H < 1")?;
    require(c.idx.p > 1.0, "p > 1")?;
    require(c.n >= 1, "N >= 1")?;
    require(c.c_q_gamma > 0.0, "C_{q,gamma} > 0")?;
    require(c.q > 1.0 / (h - 0.5), "q > (H-1/2)^{-1}")?;
    require(c.theta > 0.0 && c.theta < c.q * h - c.q / (2.0 * nf) - 1.0, "0 < theta < qH - q/(2N) - 1")?;
    require(c.gamma > c.q - 1.0, "gamma > q - 1")?;
    require(2.0 * nf >= c.idx.r as f64, "N >= r/2")?;
    require(c.alpha > 0.0, "alpha > 0")?;
    require(c.alpha < h - (1.0 + c.theta) / c.q - 1.0 / (2.0 * nf), "alpha < H - (1+theta)/q - 1/(2N)")?;
    let beta = 2.0 * nf * (h - (1.0 + c.theta) / c.q - c.alpha) - 1.0;
    require(beta > 0.0, "beta > 0")?;
    require(2.0 * (1.0 - (1.0 + c.theta) / c.q) - 1.0 > 0.0, "2(1-(1+theta)/q) - 1 > 0")?;
    let kappa = 2.0 * nf * (h - (1.0 + c.theta) / c.q) - 1.0;
    let derived = DerivedConstants {
        beta,
        kappa,
        c_theta_gamma: c_theta_gamma(c.theta, c.gamma),
        c_q_theta: c_q_theta(c.q, c.theta),
        c_n_h: c_n_h(c.n, h),
        c_rpnh: c_rpnh(&c.idx, c.n, h),
        c_alpha: c_alpha(c.alpha),
    };
    Ok(TailBoundParams {
        n: c.n,
        q: c.q,
        theta: c.theta,
        gamma: c.gamma,
        alpha: c.alpha,
        idx: c.idx,
        hurst: h,
        c_q_gamma: c.c_q_gamma,
        derived,
    })
}

impl TailBoundParams {
    /// The level-independent factor C_{q,γ}^{2N/q} C_{θ,γ}^{-2N/q} C_{q,θ} C_{r,p,N,H}.
    pub fn prefactor(&self) -> f64 {
        let e = 2.0 * self.n as f64 / self.q;
        let d = &self.derived;
        self.c_q_gamma.powf(e) * d.c_theta_gamma.powf(-e) * d.c_q_theta * d.c_rpnh
    }
}

/// Bound on the capacity that the level-m ladder increment exceeds λ:
/// prefactor · λ^{-2N} · 2^{-m(2N(H-(1+θ)/q)-1)}.
pub fn capacity_tail_bound(m: u32, lambda: f64, params: &TailBoundParams) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    if !(params.derived.kappa > 0.0) {
        return Err(Error::Infeasible("2N(H-(1+theta)/q) - 1 > 0".into()));
    }
    Ok(params.prefactor() * lambda.powf(-2.0 * params.n as f64) * 2f64.powf(-(m as f64) * params.derived.kappa))
}

/// Σ_{m=from}^{to} of [`capacity_tail_bound`] in closed geometric form; `to = None`
/// sums to infinity.
pub fn capacity_tail_sum(from: u32, to: Option<u32>, lambda: f64, params: &TailBoundParams) -> Result<f64> {
    let first = capacity_tail_bound(from, lambda, params)?;
    let ratio = 2f64.powf(-params.derived.kappa);
    let terms = match to {
        Some(to) if to < from => return Ok(0.0),
        Some(to) => 1.0 - ratio.powf((to - from + 1) as f64),
        None => 1.0,
    };
    Ok(first * terms / (1.0 - ratio))
}

/// Search mesh for [`optimize_tail_bound`].
///
/// For each N = 1..=n_max with 2N >= r:
/// q_j = q_min + (q_max - q_min) j / q_divisions (j = 1..=q_divisions, q_min = 1/(H-½)),
/// θ_i = θ_hi i / theta_divisions (i = 1..theta_divisions) with
/// θ_hi = min(qH - q/(2N) - 1, q/2 - 1), γ = q - 1 + offset,
/// α_k = α_hi k / alpha_divisions (k = 1..alpha_divisions) with α_hi = H - (1+θ)/q - 1/(2N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailMesh {
    pub n_max: u32,
    pub q_max: f64,
    pub q_divisions: u32,
    pub theta_divisions: u32,
    pub alpha_divisions: u32,
    pub gamma_offsets: Vec<f64>,
}

impl Default for TailMesh {
    fn default() -> Self {
        TailMesh {
            n_max: 8,
            q_max: 16.0,
            q_divisions: 20,
            theta_divisions: 21,
            alpha_divisions: 21,
            gamma_offsets: vec![0.05, 0.1, 0.25, 0.5, 1.0],
        }
    }
}

impl TailMesh {
    /// Mesh with every division doubled; contains all points of `self`.
    pub fn refined(&self) -> TailMesh {
        TailMesh {
            q_divisions: 2 * self.q_divisions,
            theta_divisions: 2 * self.theta_divisions,
            alpha_divisions: 2 * self.alpha_divisions,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailOptimum {
    pub params: TailBoundParams,
    pub bound: f64,
}

fn better(a: &Option<TailOptimum>, b: &TailOptimum) -> bool {
    match a {
        None => true,
        Some(a) => b.bound < a.bound,
    }
}

fn search_n(
    n: u32,
    m: u32,
    lambda: f64,
    idx: &CapacityIndex,
    hurst: f64,
    mesh: &TailMesh,
    c_q_gamma: f64,
) -> Result<Option<TailOptimum>> {
    let nf = n as f64;
    let q_min = 1.0 / (hurst - 0.5);
    let mut best: Option<TailOptimum> = None;
    for j in 1..=mesh.q_divisions {
        let q = q_min + (mesh.q_max - q_min) * j as f64 / mesh.q_divisions as f64;
        let theta_hi = (q * hurst - q / (2.0 * nf) - 1.0).min(q / 2.0 - 1.0);
        if theta_hi <= 0.0 {
            continue;
        }
        for i in 1..mesh.theta_divisions {
            let theta = theta_hi * i as f64 / mesh.theta_divisions as f64;
            let alpha_hi = hurst - (1.0 + theta) / q - 1.0 / (2.0 * nf);
            if alpha_hi <= 0.0 {
                continue;
            }
            for &offset in &mesh.gamma_offsets {
                let gamma = q - 1.0 + offset;
                // The bound does not involve α, so the first feasible α is the
                // lexicographic tie-break winner.
                for k in 1..mesh.alpha_divisions {
                    let alpha = alpha_hi * k as f64 / mesh.alpha_divisions as f64;
                    let cand = TailCandidate { n, q, theta, gamma, alpha, idx: *idx, hurst, c_q_gamma };
                    let Ok(params) = validate_tail_params(&cand) else { continue };
                    let bound = capacity_tail_bound(m, lambda, &params)?;
                    let opt = TailOptimum { params, bound };
                    if better(&best, &opt) {
                        best = Some(opt);
                    }
                    break;
                }
            }
        }
    }
    Ok(best)
}

/// Minimizes [`capacity_tail_bound`] over the feasible points of `mesh`. Ties go to
/// the lexicographically smallest (N, q, θ, γ, α).
pub fn optimize_tail_bound(
    m: u32,
    lambda: f64,
    idx: &CapacityIndex,
    hurst: f64,
    mesh: &TailMesh,
    c_q_gamma: f64,
) -> Result<TailOptimum> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::domain(format!("tail bound optimization needs hurst in (0.5, 1), got {hurst}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    if mesh.q_divisions == 0 || mesh.theta_divisions < 2 || mesh.alpha_divisions < 2 || !(mesh.q_max > 0.0) {
        return Err(Error::domain("degenerate tail search mesh"));
    }
    let per_n = (1..=mesh.n_max)
        .filter(|&n| 2 * n >= idx.r)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| search_n(n, m, lambda, idx, hurst, mesh, c_q_gamma))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<TailOptimum> = None;
    for opt in per_n.into_iter().flatten() {
        if better(&best, &opt) {
            best = Some(opt);
        }
    }
    best.ok_or_else(|| Error::Infeasible("nonempty feasible region".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> TailCandidate {
        TailCandidate {
            n: 2,
            q: 5.0,
            theta: 0.1,
            gamma: 4.5,
            alpha: 0.01,
            idx: CapacityIndex { p: 3.0, r: 2 },
            hurst: 0.75,
            c_q_gamma: 1.0,
        }
    }

    #[test]
    fn worked_tuple_is_feasible() {
        let p = validate_tail_params(&worked()).unwrap();
        assert!((p.derived.beta - 1.08).abs() < 1e-12);
    }

    #[test]
    fn small_q_names_constraint() {
        let err = validate_tail_params(&TailCandidate { q: 4.0, ..worked() }).unwrap_err();
        match err {
            Error::Infeasible(c) => assert_eq!(c, "q > (H-1/2)^{-1}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn c_n_h_example() {
        assert!((c_n_h(1, 0.75) - 8.0 * 3.0 * (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!((c_n_h(1, 0.75) - 57.94).abs() < 0.01);
    }

    #[test]
    fn series_matches_polylog() {
        // Σ n z^n = z/(1-z)², Σ n² z^n = z(1+z)/(1-z)³
        for theta in [0.05, 0.5, 2.0] {
            let z = 2f64.powf(-theta);
            let one = z / (1.0 - z).powi(2);
            let two = z * (1.0 + z) / (1.0 - z).powi(3);
            assert!((theta_gamma_series(theta, 1.0) / one - 1.0).abs() < 1e-13);
            assert!((theta_gamma_series(theta, 2.0) / two - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn sobolev_examples() {
        assert_eq!(quadratic_sobolev_bound(1.0, &CapacityIndex { p: 3.0, r: 0 }).unwrap(), 72.0);
        assert!((quadratic_sobolev_bound(0.5, &CapacityIndex { p: 3.0, r: 2 }).unwrap() - 108.0).abs() < 1e-12);
        assert!(quadratic_sobolev_bound(1.0, &CapacityIndex { p: 2.0, r: 0 }).is_err());
    }

    #[test]
    fn chebyshev_examples() {
        assert_eq!(chebyshev_capacity_bound(2.0, 4.0).unwrap(), 0.5);
        assert_eq!(chebyshev_capacity_bound(0.0, 3.0).unwrap(), 0.0);
        assert!(chebyshev_capacity_bound(1.0, 2.0).unwrap() > chebyshev_capacity_bound(1.0, 3.0).unwrap());
        assert!(chebyshev_capacity_bound(1.0, 0.0).is_err());
    }

    #[test]
    fn doubling_level_scales_bound() {
        let p = validate_tail_params(&worked()).unwrap();
        let b5 = capacity_tail_bound(5, 0.3, &p).unwrap();
        let b10 = capacity_tail_bound(10, 0.3, &p).unwrap();
        let expected = 2f64.powf(-5.0 * p.derived.kappa);
        assert!((b10 / b5 / expected - 1.0).abs() < 1e-14);
    }

    #[test]
    fn brownian_grid_kernel_is_indicator() {
        let spec = KernelSpec::new(0.5).unwrap();
        let k = malliavin_kernel(&spec, 0.5, DyadicGrid::new(3).unwrap()).unwrap();
        assert_eq!(k, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn optimizer_rejects_brownian() {
        let idx = CapacityIndex { p: 3.0, r: 2 };
        assert!(optimize_tail_bound(10, 0.1, &idx, 0.5, &TailMesh::default(), 1.0).is_err());
    }
}
