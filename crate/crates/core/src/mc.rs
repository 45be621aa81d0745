//! Monte Carlo estimates of scaled-path event probabilities P(εX ∈ A) for fBM
//! vectors on a grid, ε-ladders with log-slope fits against the rate-function
//! prediction, and the sup-norm gap between interpolation levels.
//!
//! Paths are processed in fixed blocks of [`CHUNK_PATHS`]; block `b` draws from
//! block `b` of the stream, and only integer hit counts are aggregated, so results
//! do not depend on the number of worker threads.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::approx::DyadicGrid;
use crate::error::{Error, Result};
use crate::gauss::{build_covariance, CovarianceSpec};
use crate::malliavin::{capacity_tail_bound, optimize_tail_bound, CapacityIndex, TailBoundParams, TailMesh};
use crate::rate::{rate_exceedance_inf, sigma_norm};
use crate::rng::SeededStream;
use crate::stats::{clopper_pearson_zero_upper, ln_normal_sf, normal_sf, weighted_slope, wilson_interval};

pub const CHUNK_PATHS: usize = 4096;

/// Smallest path count accepted in Monte Carlo mode.
pub const MIN_PATHS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum EventKind {
    /// X_t >= a.
    TerminalExceed { a: f64 },
    /// max_k X_{t_k} >= a over the level-m grid.
    SupExceed { a: f64 },
    /// |X - center|_Σ > radius on the level-m grid.
    SigmaBallComplement { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub kind: EventKind,
    pub hurst: f64,
    /// Grid level of path events.
    pub level: u32,
    /// Terminal time; path events use the grid k·horizon/2^m.
    pub horizon: f64,
}

impl EventSpec {
    pub fn times(&self) -> Vec<f64> {
        match self.kind {
            EventKind::TerminalExceed { .. } => vec![self.horizon],
            _ => {
                let n = 1usize << self.level;
                (1..=n).map(|k| k as f64 * self.horizon / n as f64).collect()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.5..1.0).contains(&self.hurst) {
            return Err(Error::domain(format!("hurst must lie in [0.5, 1), got {}", self.hurst)));
        }
        if !(self.horizon > 0.0 && self.horizon <= 1.0) {
            return Err(Error::domain(format!("horizon {} outside (0, 1]", self.horizon)));
        }
        DyadicGrid::new(self.level)?;
        match &self.kind {
            EventKind::TerminalExceed { a } | EventKind::SupExceed { a } if !(*a > 0.0) => {
                Err(Error::domain(format!("exceedance level must be positive, got {a}")))
            }
            EventKind::SigmaBallComplement { center, radius } => {
                if !(*radius >= 0.0) {
                    return Err(Error::domain(format!("radius must be nonnegative, got {radius}")));
                }
                let n = 1usize << self.level;
                if center.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: center.len() });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn covariance(&self) -> Result<CovarianceSpec> {
        self.validate()?;
        build_covariance(self.hurst, &self.times())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    MonteCarlo,
    /// Closed-form probabilities in place of sampling.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventEstimate {
    pub eps: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// ln p̂, finite in oracle mode even where p̂ underflows.
    pub log_p_hat: f64,
    pub hits: u64,
    pub n_paths: u64,
    /// Zero hits: ci_high is the one-sided Clopper–Pearson limit.
    pub degenerate: bool,
}

/// Sampler for the event's Gaussian vector.
struct Prepared {
    cov: CovarianceSpec,
    /// Brownian grid with equal spacing: cumulative sums of √step · z.
    brownian_step: Option<f64>,
    /// L⁻¹ center for ball events.
    white_center: Vec<f64>,
}

impl Prepared {
    fn new(cov: CovarianceSpec, hurst: f64, equal_spacing: Option<f64>) -> Self {
        let brownian_step = if hurst == 0.5 && cov.jitter_used == 0.0 { equal_spacing } else { None };
        Prepared { cov, brownian_step, white_center: Vec::new() }
    }

    fn dim(&self) -> usize {
        self.cov.dim()
    }

    /// Columns are paths; entries drawn path by path.
    fn normals<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> DMatrix<f64> {
        let d = self.dim();
        let mut z = DMatrix::zeros(d, n);
        for j in 0..n {
            for i in 0..d {
                z[(i, j)] = rng.sample(StandardNormal);
            }
        }
        z
    }

    fn correlate(&self, mut z: DMatrix<f64>) -> DMatrix<f64> {
        match self.brownian_step {
            Some(step) => {
                let sd = step.sqrt();
                for mut col in z.column_iter_mut() {
                    let mut acc = 0.0;
                    for v in col.iter_mut() {
                        acc += sd * *v;
                        *v = acc;
                    }
                }
                z
            }
            None => &self.cov.chol * z,
        }
    }
}

fn prepare(event: &EventSpec) -> Result<Prepared> {
    let cov = event.covariance()?;
    let spacing = match event.kind {
        EventKind::TerminalExceed { .. } => Some(event.horizon),
        _ => Some(event.horizon / (1usize << event.level) as f64),
    };
    let mut prep = Prepared::new(cov, event.hurst, spacing);
    if let EventKind::SigmaBallComplement { center, .. } = &event.kind {
        prep.white_center = prep.cov.whiten(center)?;
    }
    Ok(prep)
}

fn chunk_hits(event: &EventSpec, prep: &Prepared, eps: f64, rng: &mut impl Rng, n: usize) -> u64 {
    let z = prep.normals(rng, n);
    match &event.kind {
        EventKind::TerminalExceed { a } => {
            let x = prep.correlate(z);
            x.row(0).iter().filter(|&&v| eps * v >= *a).count() as u64
        }
        EventKind::SupExceed { a } => {
            let x = prep.correlate(z);
            x.column_iter().filter(|c| c.iter().any(|&v| eps * v >= *a)).count() as u64
        }
        EventKind::SigmaBallComplement { radius, .. } => {
            // |εX - c|_Σ = |εZ - L⁻¹c| for X = LZ.
            let r2 = radius * radius;
            z.column_iter()
                .filter(|c| {
                    let d2: f64 = c.iter().zip(&prep.white_center).map(|(zi, wi)| (eps * zi - wi).powi(2)).sum();
                    d2 > r2
                })
                .count() as u64
        }
    }
}

fn chunk_count(n_paths: u64) -> u64 {
    n_paths.div_ceil(CHUNK_PATHS as u64)
}

fn chunk_len(n_paths: u64, c: u64) -> usize {
    (n_paths - c * CHUNK_PATHS as u64).min(CHUNK_PATHS as u64) as usize
}

fn from_counts(eps: f64, hits: u64, n_paths: u64) -> EventEstimate {
    let p_hat = hits as f64 / n_paths as f64;
    let degenerate = hits == 0;
    let (ci_low, ci_high) =
        if degenerate { (0.0, clopper_pearson_zero_upper(n_paths)) } else { wilson_interval(hits, n_paths) };
    EventEstimate { eps, p_hat, ci_low, ci_high, log_p_hat: p_hat.ln(), hits, n_paths, degenerate }
}

/// Monte Carlo estimate of P(εX ∈ A) from `n_paths` exact draws.
pub fn estimate_event(event: &EventSpec, eps: f64, n_paths: u64, stream: &SeededStream) -> Result<EventEstimate> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    if n_paths < MIN_PATHS {
        return Err(Error::domain(format!("need at least {MIN_PATHS} paths, got {n_paths}")));
    }
    let prep = prepare(event)?;
    let hits: u64 = (0..chunk_count(n_paths))
        .into_par_iter()
        .map(|c| chunk_hits(event, &prep, eps, &mut stream.block(c), chunk_len(n_paths, c)))
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(from_counts(eps, hits, n_paths))
}

/// Closed-form P(εX ∈ A) where one is available: Gaussian tails for terminal
/// exceedance, the reflection principle for Brownian sup exceedance, and the
/// chi-square tail for balls centred at the origin.
pub fn oracle_estimate(event: &EventSpec, eps: f64) -> Result<EventEstimate> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    event.validate()?;
    let (p, log_p) = match &event.kind {
        EventKind::TerminalExceed { a } => {
            let x = a / (eps * event.horizon.powf(event.hurst));
            (normal_sf(x), ln_normal_sf(x))
        }
        EventKind::SupExceed { a } if event.hurst == 0.5 => {
            let x = a / (eps * event.horizon.sqrt());
            ((2.0 * normal_sf(x)).min(1.0), (2.0f64.ln() + ln_normal_sf(x)).min(0.0))
        }
        EventKind::SigmaBallComplement { center, radius } if center.iter().all(|&c| c == 0.0) => {
            let chi = ChiSquared::new(center.len() as f64).map_err(|e| Error::domain(e.to_string()))?;
            let p = chi.sf((radius / eps).powi(2));
            (p, p.ln())
        }
        _ => return Err(Error::domain("no closed-form probability for this event")),
    };
    Ok(EventEstimate { eps, p_hat: p, ci_low: p, ci_high: p, log_p_hat: log_p, hits: 0, n_paths: 0, degenerate: false })
}

/// -inf I over the event set.
pub fn predicted_slope(event: &EventSpec) -> Result<f64> {
    let cov = event.covariance()?;
    let inf = match &event.kind {
        EventKind::TerminalExceed { a } | EventKind::SupExceed { a } => rate_exceedance_inf(&cov, *a, true)?.value,
        EventKind::SigmaBallComplement { center, radius } => {
            let d = (radius - sigma_norm(&cov, center)?).max(0.0);
            0.5 * d * d
        }
    };
    Ok(-inf)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderEstimate {
    pub mode: EstimationMode,
    pub epsilons: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub log_p_hat: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub n_paths: u64,
    /// Fitted slope of ln p̂ against ε^{-2}.
    pub slope: f64,
    /// -inf I.
    pub predicted: f64,
    pub ratio: f64,
}

/// Estimates along a decreasing ε ladder and fits ln p̂ against ε^{-2}.
///
/// Monte Carlo fits weight each rung by the inverse width of its log-scale
/// confidence interval and skip rungs with no hits; oracle fits use unit weights.
/// Rung i draws from `stream.child(i)`.
pub fn ladder(
    event: &EventSpec,
    epsilons: &[f64],
    n_paths: u64,
    stream: &SeededStream,
    mode: EstimationMode,
) -> Result<LadderEstimate> {
    if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0)) || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("epsilons must be positive and strictly decreasing"));
    }
    let estimates = epsilons
        .iter()
        .enumerate()
        .map(|(i, &eps)| match mode {
            EstimationMode::MonteCarlo => estimate_event(event, eps, n_paths, &stream.child(i as u64)),
            EstimationMode::Oracle => oracle_estimate(event, eps),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for e in &estimates {
        if !e.log_p_hat.is_finite() || e.degenerate {
            continue;
        }
        x.push(e.eps.powi(-2));
        y.push(e.log_p_hat);
        w.push(match mode {
            EstimationMode::MonteCarlo => 1.0 / (e.ci_high.ln() - e.ci_low.ln()),
            EstimationMode::Oracle => 1.0,
        });
    }
    if x.len() < 3 {
        return Err(Error::SlopeUndefined { finite: x.len() });
    }
    let slope = weighted_slope(&x, &y, &w);
    let predicted = predicted_slope(event)?;
    Ok(LadderEstimate {
        mode,
        epsilons: epsilons.to_vec(),
        p_hat: estimates.iter().map(|e| e.p_hat).collect(),
        ci_low: estimates.iter().map(|e| e.ci_low).collect(),
        ci_high: estimates.iter().map(|e| e.ci_high).collect(),
        log_p_hat: estimates.iter().map(|e| e.log_p_hat).collect(),
        degenerate: estimates.iter().map(|e| e.degenerate).collect(),
        n_paths: if mode == EstimationMode::Oracle { 0 } else { n_paths },
        slope,
        predicted,
        ratio: slope / predicted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapOptions {
    /// Reference level M = m + reference_offset.
    pub reference_offset: u32,
    pub idx: CapacityIndex,
    pub mesh: TailMesh,
    pub c_q_gamma: f64,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            reference_offset: 6,
            idx: CapacityIndex { p: 3.0, r: 2 },
            mesh: TailMesh::default(),
            c_q_gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEstimate {
    pub m: u32,
    pub reference_level: u32,
    pub eps: f64,
    pub lambda: f64,
    pub gap_freq: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub n_paths: u64,
    /// Tail parameters chosen by the optimizer at (m, λ/ε); None for H = ½.
    pub params: Option<TailBoundParams>,
    /// Σ_{k=m}^{M-1} capacity_tail_bound(k, λ C_α 2^{-(k-m)α} / ε).
    pub capacity_bound: f64,
    /// min(1, Σ_k min(1, c_k)^p), from P(A) <= c_{p,r}(A)^p and a union bound.
    pub probability_bound: f64,
}

/// Frequency of ε‖X^(m) - X^(M)‖_∞ > λ, where X^(k) interpolates exact fBM values on
/// the level-k knots, next to the capacity bound for the same event.
pub fn approximation_gap(
    hurst: f64,
    m: u32,
    eps: f64,
    lambda: f64,
    n_paths: u64,
    stream: &SeededStream,
    opts: &GapOptions,
) -> Result<GapEstimate> {
    if m < 1 {
        return Err(Error::domain("approximation gap needs m >= 1"));
    }
    if !(eps > 0.0 && lambda > 0.0) {
        return Err(Error::domain("eps and lambda must be positive"));
    }
    if n_paths < MIN_PATHS {
        return Err(Error::domain(format!("need at least {MIN_PATHS} paths, got {n_paths}")));
    }
    if opts.reference_offset < 1 {
        return Err(Error::domain("reference level must exceed m"));
    }
    let big = m + opts.reference_offset;
    let grid = DyadicGrid::new(big)?;
    let times = &grid.knots()[1..];
    let cov = build_covariance(hurst, times)?;
    let prep = Prepared::new(cov, hurst, Some(1.0 / grid.cells() as f64));
    let off = opts.reference_offset;
    let stride = 1usize << off;
    let hits: u64 = (0..chunk_count(n_paths))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.block(c);
            let x = prep.correlate(prep.normals(&mut rng, chunk_len(n_paths, c)));
            x.column_iter()
                .filter(|col| {
                    let at = |j: usize| if j == 0 { 0.0 } else { col[j - 1] };
                    let mut worst = 0.0f64;
                    for j in 1..=grid.cells() {
                        let cell = j >> off;
                        let r = j & (stride - 1);
                        if r == 0 {
                            continue;
                        }
                        let lo = at(cell * stride);
                        let hi = at((cell + 1) * stride);
                        let interp = lo + (r as f64 / stride as f64) * (hi - lo);
                        worst = worst.max((interp - at(j)).abs());
                    }
                    eps * worst > lambda
                })
                .count() as u64
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let est = from_counts(eps, hits, n_paths);

    let (params, capacity_bound, probability_bound) = if hurst == 0.5 {
        (None, f64::NAN, f64::NAN)
    } else {
        let opt = optimize_tail_bound(m, lambda / eps, &opts.idx, hurst, &opts.mesh, opts.c_q_gamma)?;
        let p = opt.params;
        let mut cap = 0.0;
        let mut prob = 0.0;
        for k in m..big {
            let lam_k = lambda * p.derived.c_alpha * 2f64.powf(-((k - m) as f64) * p.alpha) / eps;
            let c = capacity_tail_bound(k, lam_k, &p)?;
            cap += c;
            prob += c.min(1.0).powf(opts.idx.p);
        }
        (Some(p), cap, prob.min(1.0))
    };
    Ok(GapEstimate {
        m,
        reference_level: big,
        eps,
        lambda,
        gap_freq: est.p_hat,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
        hits,
        n_paths,
        params,
        capacity_bound,
        probability_bound,
    })
}

/// P(sup |b| >= x) for a Brownian bridge on an interval of length h.
pub fn bridge_sup_tail(x: f64, h: f64) -> f64 {
    let y = x / h.sqrt();
    if y <= 0.0 {
        return 1.0;
    }
    if y < 1.0 {
        // Jacobi-transformed series for the distribution function.
        let mut cdf = 0.0;
        for k in 1..50 {
            let j = (2 * k - 1) as f64;
            cdf += (-(j * j) * std::f64::consts::PI.powi(2) / (8.0 * y * y)).exp();
        }
        return 1.0 - (2.0 * std::f64::consts::PI).sqrt() / y * cdf;
    }
    let mut p = 0.0;
    for k in 1..50 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * y * y).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-18 {
            break;
        }
    }
    p
}

/// Brownian motion: probability that some level-m cell's bridge exceeds x in sup norm.
pub fn levy_gap_probability(m: u32, x: f64) -> f64 {
    let cells = (1u64 << m) as f64;
    let p = bridge_sup_tail(x, 1.0 / cells);
    1.0 - (1.0 - p).powf(cells)
}
