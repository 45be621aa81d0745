//! The dyadic approximation ladder
//!
//! B_t^(m) = Σ_i (2^m/t) ∫_{cell i} K(t,r) dr · (ω_{(i+1)t/2^m} - ω_{it/2^m}),
//!
//! piecewise-linear interpolation on dyadic grids, the exact L² size of one ladder
//! step and the two-sided decay bounds for it, and the dyadic variation bound.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{cell_differences, cell_integral, KernelSpec};
use crate::rng::SeededStream;

/// Largest supported grid level.
pub const MAX_LEVEL: u32 = 30;

/// Largest level for which the partition dynamic program runs.
pub const BRUTE_FORCE_MAX_LEVEL: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DyadicGrid {
    pub level: u32,
}

impl DyadicGrid {
    pub fn new(level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::domain(format!("grid level {level} exceeds {MAX_LEVEL}")));
        }
        Ok(DyadicGrid { level })
    }

    pub fn cells(&self) -> usize {
        1usize << self.level
    }

    /// k / 2^m, exact in binary floating point.
    pub fn knot(&self, k: usize) -> f64 {
        k as f64 / self.cells() as f64
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..=self.cells()).map(|k| self.knot(k)).collect()
    }

    /// Cell midpoints (k + ½) / 2^m.
    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.cells()).map(|k| (k as f64 + 0.5) / self.cells() as f64).collect()
    }
}

/// Values on the knots of a dyadic grid stretched over [0, horizon].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub level: u32,
    pub horizon: f64,
    pub values: Vec<f64>,
}

impl PathSample {
    pub fn new(level: u32, horizon: f64, values: Vec<f64>) -> Result<Self> {
        let grid = DyadicGrid::new(level)?;
        if values.len() != grid.cells() + 1 {
            return Err(Error::DimensionMismatch { expected: grid.cells() + 1, got: values.len() });
        }
        if values[0] != 0.0 {
            return Err(Error::domain("paths start at the origin"));
        }
        if !(horizon > 0.0 && horizon <= 1.0) {
            return Err(Error::domain(format!("horizon {horizon} outside (0, 1]")));
        }
        Ok(PathSample { level, horizon, values })
    }

    pub fn grid(&self) -> DyadicGrid {
        DyadicGrid { level: self.level }
    }

    /// Values on the coarser level-m knots.
    pub fn restrict(&self, m: u32) -> Result<PathSample> {
        if m > self.level {
            return Err(Error::domain(format!("cannot restrict level {} to finer level {m}", self.level)));
        }
        let stride = 1usize << (self.level - m);
        let values = self.values.iter().step_by(stride).copied().collect();
        Ok(PathSample { level: m, horizon: self.horizon, values })
    }

    /// Increments over the 2^m level-m cells.
    pub fn increments(&self, m: u32) -> Result<Vec<f64>> {
        let coarse = self.restrict(m)?;
        Ok(coarse.values.windows(2).map(|w| w[1] - w[0]).collect())
    }

    pub fn scaled(&self, c: f64) -> PathSample {
        PathSample { level: self.level, horizon: self.horizon, values: self.values.iter().map(|v| c * v).collect() }
    }
}

/// Brownian path on the level-m knots of [0, horizon] by midpoint refinement.
///
/// Draws are consumed coarse level first, left to right, so the level-m path is the
/// restriction of the level-(m+1) path built from the same generator.
pub fn brownian_path_with<R: Rng + ?Sized>(grid: DyadicGrid, horizon: f64, rng: &mut R) -> PathSample {
    let n = grid.cells();
    let mut v = vec![0.0; n + 1];
    v[n] = horizon.sqrt() * rng.sample::<f64, _>(StandardNormal);
    for j in 1..=grid.level {
        let step = n >> j;
        // Midpoint of an interval of length 2 step horizon / n has bridge variance step horizon / (2n).
        let sd = (step as f64 * horizon / (2.0 * n as f64)).sqrt();
        for k in (step..n).step_by(2 * step) {
            let z: f64 = rng.sample(StandardNormal);
            v[k] = 0.5 * (v[k - step] + v[k + step]) + sd * z;
        }
    }
    PathSample { level: grid.level, horizon, values: v }
}

pub fn brownian_path(grid: DyadicGrid, horizon: f64, stream: &SeededStream) -> PathSample {
    brownian_path_with(grid, horizon, &mut stream.rng())
}

/// The level-m ladder weights (2^m/t) ∫_{cell i} K(t,r) dr, i = 0..2^m.
pub fn ladder_weights(spec: &KernelSpec, t: f64, m: u32) -> Result<Vec<f64>> {
    let grid = DyadicGrid::new(m)?;
    let n = grid.cells();
    if spec.is_brownian() {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::domain(format!("time {t} outside (0, 1]")));
        }
        return Ok(vec![1.0; n]);
    }
    let h = t / n as f64;
    let scale = n as f64 / t;
    (0..n)
        .map(|i| {
            let b = if i + 1 == n { t } else { (i + 1) as f64 * h };
            Ok(scale * cell_integral(spec, t, i as f64 * h, b)?)
        })
        .collect()
}

fn check_horizon(t: f64, omega: &PathSample, m: u32) -> Result<()> {
    if omega.level < m {
        return Err(Error::domain(format!("path level {} is coarser than ladder level {m}", omega.level)));
    }
    if (omega.horizon - t).abs() > 1e-15 * t {
        return Err(Error::domain(format!("path horizon {} does not match t = {t}", omega.horizon)));
    }
    Ok(())
}

/// Σ_i w_i Δω_i with the level-m increments of ω.
pub fn apply_weights(weights: &[f64], omega: &PathSample) -> Result<f64> {
    let m = weights.len().trailing_zeros();
    if 1usize << m != weights.len() {
        return Err(Error::domain("weight count is not a power of two"));
    }
    let inc = omega.increments(m)?;
    Ok(weights.iter().zip(&inc).map(|(w, d)| w * d).sum())
}

/// B_t^(m)(ω), with ω sampled on a grid of level >= m over [0, t].
pub fn approx_fbm_at(spec: &KernelSpec, t: f64, m: u32, omega: &PathSample) -> Result<f64> {
    check_horizon(t, omega, m)?;
    apply_weights(&ladder_weights(spec, t, m)?, omega)
}

/// B_t^(m+1)(ω) - B_t^(m)(ω) computed from both ladder sums.
pub fn ladder_step_direct(spec: &KernelSpec, t: f64, m: u32, omega: &PathSample) -> Result<f64> {
    Ok(approx_fbm_at(spec, t, m + 1, omega)? - approx_fbm_at(spec, t, m, omega)?)
}

/// The same step as (2^m/t) Σ_i M_i (Δω_{2i+1} - Δω_{2i}) on level-(m+1) increments.
pub fn ladder_step_second_difference(spec: &KernelSpec, t: f64, m: u32, omega: &PathSample) -> Result<f64> {
    check_horizon(t, omega, m + 1)?;
    let diffs = cell_differences(spec, t, m)?;
    let inc = omega.increments(m + 1)?;
    let scale = (1usize << m) as f64 / t;
    Ok(scale * diffs.iter().zip(inc.chunks_exact(2)).map(|(mi, d)| mi * (d[1] - d[0])).sum::<f64>())
}

/// Piecewise-linear interpolation of knot values on the level-m grid of [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinear {
    pub level: u32,
    pub values: Vec<f64>,
}

pub fn interpolate(values: &[f64], m: u32) -> Result<PiecewiseLinear> {
    let grid = DyadicGrid::new(m)?;
    if values.len() != grid.cells() + 1 {
        return Err(Error::DimensionMismatch { expected: grid.cells() + 1, got: values.len() });
    }
    if values[0] != 0.0 {
        return Err(Error::domain("paths start at the origin"));
    }
    Ok(PiecewiseLinear { level: m, values: values.to_vec() })
}

impl PiecewiseLinear {
    /// Value at t in [0, 1]; exact at the knots.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len() - 1;
        let x = t.clamp(0.0, 1.0) * n as f64;
        let k = x.floor() as usize;
        if k >= n {
            return self.values[n];
        }
        let frac = x - k as f64;
        if frac == 0.0 {
            return self.values[k];
        }
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }

    /// Values on the level-M knots, M >= level.
    pub fn resample(&self, level: u32) -> Result<Vec<f64>> {
        let grid = DyadicGrid::new(level)?;
        Ok(grid.knots().into_iter().map(|t| self.eval(t)).collect())
    }
}

/// ‖B_t^(m+1) - B_t^(m)‖_2² = (2^m/t) Σ_i M_i².
pub fn exact_l2_difference(spec: &KernelSpec, t: f64, m: u32) -> Result<f64> {
    DyadicGrid::new(m + 1)?;
    let diffs = cell_differences(spec, t, m)?;
    Ok((1usize << m) as f64 / t * diffs.iter().map(|x| x * x).sum::<f64>())
}

/// Constants of the lower decay component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayConstants {
    pub c1: f64,
    pub c2: f64,
}

impl DecayConstants {
    /// C₁ = c_H², C₂ = (2 c_H / (H - ½))².
    pub fn for_kernel(spec: &KernelSpec) -> Self {
        let c = spec.c_norm;
        DecayConstants { c1: c * c, c2: (2.0 * c / spec.a()).powi(2) }
    }
}

/// (lower, upper) with Δ = t/2^{m+1}:
///
/// lower = C₁/(2-2H) [(t-Δ)^{2-2H} - t^{2-2H} + Δ^{2-2H}] + C₂ Δ^{2H-1} (t-Δ)^{2-2H} / (2-2H),
/// upper = ½ Δ^{2H}.
pub fn decay_bounds(spec: &KernelSpec, t: f64, m: u32, consts: &DecayConstants) -> Result<(f64, f64)> {
    if spec.is_brownian() {
        return Err(Error::domain("decay bounds are defined for hurst > 0.5"));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::domain(format!("time {t} outside (0, 1]")));
    }
    DyadicGrid::new(m + 1)?;
    let h = spec.hurst;
    let e = 2.0 - 2.0 * h;
    let d = t / (1u64 << (m + 1)) as f64;
    let lower = consts.c1 / e * ((t - d).powf(e) - t.powf(e) + d.powf(e))
        + consts.c2 * d.powf(2.0 * h - 1.0) * (t - d).powf(e) / e;
    let upper = 0.5 * d.powf(2.0 * h);
    Ok((lower, upper))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub hurst: f64,
    pub t: f64,
    pub levels: Vec<u32>,
    pub exact_l2: Vec<f64>,
    #[serde(rename = "lower")]
    pub lower_component: Vec<f64>,
    #[serde(rename = "upper")]
    pub upper_component: Vec<f64>,
    /// Least-squares slope of log₂ exact_l2 against the level.
    #[serde(rename = "slope")]
    pub fitted_slope: f64,
}

impl ConvergenceReport {
    /// Levels where exact_l2 exceeds max(lower, upper) by more than `tol`.
    pub fn bound_violations(&self, tol: f64) -> Vec<u32> {
        self.levels
            .iter()
            .enumerate()
            .filter(|&(k, _)| self.exact_l2[k] > self.lower_component[k].max(self.upper_component[k]) + tol)
            .map(|(_, &m)| m)
            .collect()
    }
}

/// Ordinary least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn convergence_report(
    spec: &KernelSpec,
    t: f64,
    levels: &[u32],
    consts: &DecayConstants,
) -> Result<ConvergenceReport> {
    if levels.is_empty() {
        return Err(Error::domain("no levels requested"));
    }
    let mut exact_l2 = Vec::with_capacity(levels.len());
    let mut lower = Vec::with_capacity(levels.len());
    let mut upper = Vec::with_capacity(levels.len());
    for &m in levels {
        let (lo, up) = decay_bounds(spec, t, m, consts)?;
        exact_l2.push(exact_l2_difference(spec, t, m)?);
        lower.push(lo);
        upper.push(up);
    }
    let x: Vec<f64> = levels.iter().map(|&m| m as f64).collect();
    let y: Vec<f64> = exact_l2.iter().map(|v| v.log2()).collect();
    let fitted_slope = if levels.len() >= 2 { ls_slope(&x, &y) } else { f64::NAN };
    Ok(ConvergenceReport {
        hurst: spec.hurst,
        t,
        levels: levels.to_vec(),
        exact_l2,
        lower_component: lower,
        upper_component: upper,
        fitted_slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationBound {
    /// C_{q,γ} Σ_{n=1}^{M} n^γ Σ_k |Δ_{n,k}(u - w)|^q.
    pub bound: f64,
    /// sup over partitions D of the level-M grid of Σ_D |Δ(u - w)|^q, when M <= 10.
    pub brute_force: Option<f64>,
}

/// Dyadic-increment bound on the q-variation of u - w, with the brute-force
/// partition supremum as a diagnostic.
pub fn dyadic_variation_bound(
    u: &PathSample,
    w: &PathSample,
    q: f64,
    gamma: f64,
    c_q_gamma: f64,
) -> Result<VariationBound> {
    if !(q > 1.0) {
        return Err(Error::domain(format!("variation bound needs q > 1, got {q}")));
    }
    if !(gamma > q - 1.0) {
        return Err(Error::domain(format!("variation bound needs gamma > q - 1, got gamma={gamma}, q={q}")));
    }
    if u.level != w.level || u.values.len() != w.values.len() {
        return Err(Error::DimensionMismatch { expected: u.values.len(), got: w.values.len() });
    }
    let d: Vec<f64> = u.values.iter().zip(&w.values).map(|(a, b)| a - b).collect();
    let top = u.level;
    let mut total = 0.0;
    for n in 1..=top {
        let stride = 1usize << (top - n);
        let level_sum: f64 = (0..(1usize << n)).map(|k| (d[(k + 1) * stride] - d[k * stride]).abs().powf(q)).sum();
        total += (n as f64).powf(gamma) * level_sum;
    }
    let brute_force = (top <= BRUTE_FORCE_MAX_LEVEL).then(|| partition_supremum(&d, q));
    Ok(VariationBound { bound: c_q_gamma * total, brute_force })
}

/// max over partitions 0 = k_0 < ... < k_r = n of Σ |d_{k_j} - d_{k_{j-1}}|^q.
pub fn partition_supremum(d: &[f64], q: f64) -> f64 {
    let n = d.len();
    let mut best = vec![0.0; n];
    for j in 1..n {
        best[j] = (0..j).map(|i| best[i] + (d[j] - d[i]).abs().powf(q)).fold(f64::NEG_INFINITY, f64::max);
    }
    best[n - 1]
}
