//! Rate functions of Gaussian vectors: I_n(x) = ½ xᵀΣ⁻¹x through triangular solves,
//! infima over Σ-balls and sup-norm exceedance sets, and the rate of piecewise-linear
//! paths on dyadic grids.

use serde::{Deserialize, Serialize, Serializer};

use crate::approx::DyadicGrid;
use crate::error::{Error, Result};
use crate::gauss::{build_covariance, CovarianceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    ClosedForm,
    QuadraticSolve,
    GridSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    /// Nonnegative, or +∞ (serialized as "inf").
    #[serde(serialize_with = "serialize_value")]
    pub value: f64,
    pub argmin: Option<Vec<f64>>,
    pub method: RateMethod,
}

fn serialize_value<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum RateQuery {
    Point { x: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Exceedance { a: f64, one_sided: bool },
}

/// I_n(x) = ½ |L⁻¹x|².
pub fn rate_fd(cov: &CovarianceSpec, x: &[f64]) -> Result<f64> {
    let y = cov.whiten(x)?;
    Ok(0.5 * y.iter().map(|v| v * v).sum::<f64>())
}

/// |x|_Σ = √(xᵀΣ⁻¹x).
pub fn sigma_norm(cov: &CovarianceSpec, x: &[f64]) -> Result<f64> {
    let y = cov.whiten(x)?;
    Ok(y.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// inf of I_n over the Σ-ball of the given radius: ½((|center|_Σ - radius)⁺)².
pub fn rate_ball_inf(cov: &CovarianceSpec, center: &[f64], radius: f64) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(Error::domain(format!("radius must be nonnegative, got {radius}")));
    }
    let d = (sigma_norm(cov, center)? - radius).max(0.0);
    Ok(0.5 * d * d)
}

/// Closest point of the ball to the origin in the Σ-geometry.
pub fn ball_argmin(cov: &CovarianceSpec, center: &[f64], radius: f64) -> Result<Vec<f64>> {
    let norm = sigma_norm(cov, center)?;
    if norm <= radius {
        return Ok(vec![0.0; center.len()]);
    }
    let shrink = 1.0 - radius / norm;
    Ok(center.iter().map(|c| shrink * c).collect())
}

/// inf of I_n over {max_k x_k >= a} (one-sided) or {max_k |x_k| >= a}.
///
/// For each active coordinate k the minimum-norm point with x_k = a is a Σ_{·k}/σ_kk
/// with rate a²/(2σ_kk); the smallest k attaining the minimum is returned. The
/// two-sided problem has the same value by symmetry of the quadratic form.
pub fn rate_exceedance_inf(cov: &CovarianceSpec, a: f64, _one_sided: bool) -> Result<RateResult> {
    if !(a >= 0.0) {
        return Err(Error::domain(format!("exceedance level must be nonnegative, got {a}")));
    }
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..cov.dim() {
        let v = a * a / (2.0 * cov.sigma[(k, k)]);
        if v < best.0 {
            best = (v, k);
        }
    }
    let (value, k) = best;
    let skk = cov.sigma[(k, k)];
    let argmin = (0..cov.dim()).map(|i| a * cov.sigma[(i, k)] / skk).collect();
    Ok(RateResult { value, argmin: Some(argmin), method: RateMethod::QuadraticSolve })
}

pub fn evaluate(cov: &CovarianceSpec, query: &RateQuery) -> Result<RateResult> {
    match query {
        RateQuery::Point { x } => {
            Ok(RateResult { value: rate_fd(cov, x)?, argmin: Some(x.clone()), method: RateMethod::ClosedForm })
        }
        RateQuery::Ball { center, radius } => Ok(RateResult {
            value: rate_ball_inf(cov, center, *radius)?,
            argmin: Some(ball_argmin(cov, center, *radius)?),
            method: RateMethod::ClosedForm,
        }),
        RateQuery::Exceedance { a, one_sided } => rate_exceedance_inf(cov, *a, *one_sided),
    }
}

/// Rate of the piecewise-linear path through `knot_values` on the level-m grid:
/// I_{2^m} of the knot values after dropping the origin, under the fBM covariance.
pub fn rate_pl_path(hurst: f64, m: u32, knot_values: &[f64]) -> Result<f64> {
    let grid = DyadicGrid::new(m)?;
    if knot_values.len() != grid.cells() + 1 {
        return Err(Error::DimensionMismatch { expected: grid.cells() + 1, got: knot_values.len() });
    }
    if knot_values[0] != 0.0 {
        return Err(Error::domain("paths start at the origin"));
    }
    let times = &grid.knots()[1..];
    let cov = build_covariance(hurst, times)?;
    rate_fd(&cov, &knot_values[1..])
}
