//! The Volterra kernel of fractional Brownian motion,
//!
//! K(t,s) = c_H s^{1/2-H} ∫_s^t (u-s)^{H-3/2} u^{H-1/2} du,   0 < s < t,
//!
//! its cell integrals and the cell comparison quantities M_i, L_i, U_i of the
//! dyadic ladder. For H = 1/2 the kernel is the indicator 1_{s<t}.
//!
//! The inner integral is evaluated after the substitution u - s = w^{1/a}
//! (a = H - 1/2), which turns it into the smooth
//! (1/a) ∫_0^{(t-s)^a} (s + w^{1/a})^a dw.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_endpoints, Endpoints, QuadPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub hurst: f64,
    pub c_norm: f64,
    pub quad: QuadPolicy,
}

/// Residuals of the covariance identity on the probe grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceAudit {
    pub hurst: f64,
    /// (s, t, quadrature, closed form, residual) per probe pair with s <= t.
    pub rows: Vec<(f64, f64, f64, f64, f64)>,
    pub max_abs_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellComparison {
    pub m: u32,
    pub i: usize,
    pub t: f64,
    pub m_i: f64,
    pub l_i: f64,
    pub u_i: f64,
}

/// Tolerance the constructor-time audit must meet.
pub const AUDIT_TOLERANCE: f64 = 1e-6;

/// Probe times of the covariance audit: 0.1, 0.2, ..., 1.0.
pub fn audit_probe_times() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// c_H = [H(2H-1) / B(2-2H, H-1/2)]^{1/2}.
pub fn normalization_constant(hurst: f64) -> Result<f64> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::domain(format!("normalization constant needs hurst in (0.5, 1), got {hurst}")));
    }
    let b = beta(2.0 - 2.0 * hurst, hurst - 0.5);
    Ok((hurst * (2.0 * hurst - 1.0) / b).sqrt())
}

impl KernelSpec {
    /// Kernel with the default quadrature policy; no audit.
    pub fn new(hurst: f64) -> Result<Self> {
        Self::with_options(hurst, QuadPolicy::default(), false)
    }

    /// Kernel whose construction runs the covariance audit and fails if any probe
    /// residual exceeds [`AUDIT_TOLERANCE`].
    pub fn audited(hurst: f64) -> Result<Self> {
        Self::with_options(hurst, QuadPolicy::default(), true)
    }

    pub fn with_options(hurst: f64, quad: QuadPolicy, audit: bool) -> Result<Self> {
        if !(0.5..1.0).contains(&hurst) {
            return Err(Error::domain(format!("hurst must lie in [0.5, 1), got {hurst}")));
        }
        if !(quad.abs_tol > 0.0) || quad.max_depth == 0 || quad.max_intervals < 2 {
            return Err(Error::domain("invalid quadrature policy"));
        }
        let c_norm = if hurst == 0.5 { 1.0 } else { normalization_constant(hurst)? };
        let spec = KernelSpec { hurst, c_norm, quad };
        if audit {
            let report = spec.audit()?;
            if report.max_abs_residual > AUDIT_TOLERANCE {
                return Err(Error::domain(format!(
                    "covariance audit failed at hurst {hurst}: residual {:e}",
                    report.max_abs_residual
                )));
            }
        }
        Ok(spec)
    }

    pub fn is_brownian(&self) -> bool {
        self.hurst == 0.5
    }

    /// The exponent a = H - 1/2.
    pub fn a(&self) -> f64 {
        self.hurst - 0.5
    }

    /// Compares ∫K(t,u)K(s,u)du with the closed-form covariance on the probe grid.
    pub fn audit(&self) -> Result<CovarianceAudit> {
        let probes = audit_probe_times();
        let pairs: Vec<(f64, f64)> =
            probes.iter().enumerate().flat_map(|(j, &t)| probes[..=j].iter().map(move |&s| (s, t))).collect();
        let rows = pairs
            .par_iter()
            .map(|&(s, t)| {
                let q = cross_covariance_quadrature(self, s, t)?;
                let c = closed_covariance(self.hurst, s, t);
                Ok((s, t, q, c, q - c))
            })
            .collect::<Result<Vec<_>>>()?;
        let max_abs_residual = rows.iter().map(|r| r.4.abs()).fold(0.0, f64::max);
        Ok(CovarianceAudit { hurst: self.hurst, rows, max_abs_residual })
    }
}

fn closed_covariance(h: f64, s: f64, t: f64) -> f64 {
    0.5 * (t.powf(2.0 * h) + s.powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::domain(format!("time {t} outside (0, 1]")));
    }
    Ok(())
}

/// K(t,s) for 0 < s < t <= 1.
pub fn eval_kernel(spec: &KernelSpec, t: f64, s: f64) -> Result<f64> {
    check_time(t)?;
    if !(s > 0.0 && s < t) {
        return Err(Error::domain(format!("kernel needs 0 < s < t, got s={s}, t={t}")));
    }
    kernel_value(spec, t, s)
}

/// K(t,s) without the horizon check, zero for s >= t. Used where the comparison
/// integrands look slightly past the horizon.
pub(crate) fn kernel_value(spec: &KernelSpec, t: f64, s: f64) -> Result<f64> {
    if s >= t {
        return Ok(0.0);
    }
    if spec.is_brownian() {
        return Ok(1.0);
    }
    let a = spec.a();
    let top = (t - s).powf(a);
    let inv = 1.0 / a;
    let scale = spec.c_norm * s.powf(-a) / a;
    let tol = (0.1 * spec.quad.abs_tol / scale).max(1e-14 * top * t.powf(a));
    let inner = integrate(|w: f64| (s + w.powf(inv)).powf(a), 0.0, top, &spec.quad.with_tol(tol))?;
    Ok(scale * inner)
}

/// Upper envelope of K(t,s) s^{H-1/2} over s in (0,t): c_H t^{2H-1} / (H - 1/2).
///
/// Follows from u^{H-1/2} <= t^{H-1/2} on [s,t]; the value at s -> 0+ is half of it.
pub fn singularity_envelope(spec: &KernelSpec, t: f64) -> f64 {
    if spec.is_brownian() {
        return 1.0;
    }
    spec.c_norm * t.powf(2.0 * spec.a()) / spec.a()
}

fn left_singular(spec: &KernelSpec) -> Option<f64> {
    Some(Endpoints::exponent_for(-spec.a()))
}

fn right_vanishing(spec: &KernelSpec) -> Option<f64> {
    Some(Endpoints::exponent_for(spec.a()))
}

/// ∫_a^b K(t,r) dr for 0 <= a < b <= t <= 1.
pub fn cell_integral(spec: &KernelSpec, t: f64, a: f64, b: f64) -> Result<f64> {
    check_time(t)?;
    if !(a >= 0.0 && a < b && b <= t) {
        return Err(Error::domain(format!("cell integral needs 0 <= a < b <= t, got [{a}, {b}] with t={t}")));
    }
    cell_value(spec, t, a, b)
}

fn cell_value(spec: &KernelSpec, t: f64, a: f64, b: f64) -> Result<f64> {
    if spec.is_brownian() {
        return Ok(b - a);
    }
    let ends = Endpoints {
        left: if a == 0.0 { left_singular(spec) } else { None },
        right: if b == t { right_vanishing(spec) } else { None },
    };
    integrate_combination(spec, a, b, ends, |r| kernel_value(spec, t, r))
}

/// ∫_0^s K(t,u) K(s,u) du for 0 < s <= t <= 1.
pub fn cross_covariance_quadrature(spec: &KernelSpec, s: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if !(s > 0.0 && s <= t) {
        return Err(Error::domain(format!("cross covariance needs 0 < s <= t, got s={s}, t={t}")));
    }
    if spec.is_brownian() {
        return Ok(s);
    }
    let a = spec.a();
    let ends = Endpoints {
        left: Some(Endpoints::exponent_for(-2.0 * a)),
        right: Some(Endpoints::exponent_for(if s == t { 2.0 * a } else { a })),
    };
    integrate_combination(spec, 0.0, s, ends, |u| Ok(kernel_value(spec, t, u)? * kernel_value(spec, s, u)?))
}

/// Integral of a kernel expression, reporting inner failures in preference to NaN.
fn integrate_combination<F>(spec: &KernelSpec, a: f64, b: f64, ends: Endpoints, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let err = RefCell::new(None);
    let v = integrate_endpoints(
        |r| match f(r) {
            Ok(x) => x,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        ends,
        &spec.quad,
    );
    match (v, err.into_inner()) {
        (_, Some(e)) => Err(e),
        (v, None) => v,
    }
}

/// Integrals of K(t,.) over the 2^{m+1} half-cells of (0,t].
pub fn half_cell_integrals(spec: &KernelSpec, t: f64, m: u32) -> Result<Vec<f64>> {
    check_time(t)?;
    let n = 1usize << (m + 1);
    let delta = t / n as f64;
    (0..n)
        .into_par_iter()
        .map(|j| {
            let b = if j + 1 == n { t } else { (j + 1) as f64 * delta };
            cell_value(spec, t, j as f64 * delta, b)
        })
        .collect()
}

/// M_i = ∫_{odd half} K(t,.) - ∫_{even half} K(t,.) for the 2^m level-m cells.
pub fn cell_differences(spec: &KernelSpec, t: f64, m: u32) -> Result<Vec<f64>> {
    if spec.is_brownian() {
        check_time(t)?;
        return Ok(vec![0.0; 1usize << m]);
    }
    let halves = half_cell_integrals(spec, t, m)?;
    Ok(halves.chunks_exact(2).map(|c| c[1] - c[0]).collect())
}

/// M_i, L_i and U_i for every level-m cell of (0,t]. All vanish for H = 1/2.
pub fn cell_comparisons(spec: &KernelSpec, t: f64, m: u32) -> Result<Vec<CellComparison>> {
    check_time(t)?;
    let cells = 1usize << m;
    if spec.is_brownian() {
        return Ok((0..cells).map(|i| CellComparison { m, i, t, m_i: 0.0, l_i: 0.0, u_i: 0.0 }).collect());
    }
    let a = spec.a();
    let delta = t / (2 * cells) as f64;
    let m_vals = cell_differences(spec, t, m)?;
    (0..cells)
        .into_par_iter()
        .map(|i| {
            let last = i + 1 == cells;
            let even_lo = 2.0 * i as f64 * delta;
            let mid = (2 * i + 1) as f64 * delta;
            let odd_hi = if last { t } else { (2 * i + 2) as f64 * delta };
            let u_ends = Endpoints {
                left: if i == 0 { left_singular(spec) } else { None },
                right: if last { right_vanishing(spec) } else { None },
            };
            let u_i = integrate_combination(spec, even_lo, mid, u_ends, |s| {
                Ok(kernel_value(spec, t - delta, s)? - kernel_value(spec, t, s)?)
            })?;
            let l_ends = Endpoints {
                left: if i == 0 { left_singular(spec) } else { None },
                right: if last { right_vanishing(spec) } else { None },
            };
            let l_i = integrate_combination(spec, mid, odd_hi, l_ends, |r| {
                let factor = (r / (r - delta)).powf(a);
                Ok(kernel_value(spec, t, r)? - factor * kernel_value(spec, t + delta, r)?)
            })?;
            Ok(CellComparison { m, i, t, m_i: m_vals[i], l_i, u_i })
        })
        .collect()
}
