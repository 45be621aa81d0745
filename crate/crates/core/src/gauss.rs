//! Exact Gaussian machinery: fBM covariance matrices with Cholesky factors,
//! seeded sampling, Hermite polynomials and hypercontractivity constants.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Cov(B_s, B_t) = ½(t^{2H} + s^{2H} - |t-s|^{2H}).
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&hurst) {
        return Err(Error::domain(format!("hurst must lie in [0.5, 1), got {hurst}")));
    }
    if !((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t)) {
        return Err(Error::domain(format!("times must lie in [0, 1], got s={s}, t={t}")));
    }
    Ok(covariance_unchecked(hurst, s, t))
}

pub(crate) fn covariance_unchecked(hurst: f64, s: f64, t: f64) -> f64 {
    if hurst == 0.5 {
        return s.min(t);
    }
    let h2 = 2.0 * hurst;
    0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2))
}

#[derive(Debug, Clone)]
pub struct CovarianceSpec {
    pub times: Vec<f64>,
    /// `None` for matrices supplied directly.
    pub hurst: Option<f64>,
    pub sigma: DMatrix<f64>,
    /// Lower-triangular factor with chol * cholᵀ = sigma + jitter_used * I.
    pub chol: DMatrix<f64>,
    pub jitter_used: f64,
}

/// Number of tenfold jitter escalations after the first attempt.
pub const JITTER_ESCALATIONS: u32 = 6;

fn factorize(sigma: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = sigma.clone().cholesky() {
        return Ok((c.l(), 0.0));
    }
    let base = 1e-12 * sigma.diagonal().iter().fold(0.0f64, |m, &x| m.max(x));
    let mut jitter = base;
    for _ in 0..=JITTER_ESCALATIONS {
        let mut m = sigma.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            return Ok((c.l(), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite { jitter: jitter / 10.0 })
}

/// Covariance matrix of (B_{t_1}, ..., B_{t_n}) and its Cholesky factor.
pub fn build_covariance(hurst: f64, times: &[f64]) -> Result<CovarianceSpec> {
    if !(0.5..1.0).contains(&hurst) {
        return Err(Error::domain(format!("hurst must lie in [0.5, 1), got {hurst}")));
    }
    if times.is_empty() {
        return Err(Error::domain("covariance grid is empty"));
    }
    if !(times[0] > 0.0 && times[times.len() - 1] <= 1.0) || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("times must be strictly increasing in (0, 1]"));
    }
    let n = times.len();
    let sigma = DMatrix::from_fn(n, n, |i, j| covariance_unchecked(hurst, times[i], times[j]));
    let (chol, jitter_used) = factorize(&sigma)?;
    Ok(CovarianceSpec { times: times.to_vec(), hurst: Some(hurst), sigma, chol, jitter_used })
}

impl CovarianceSpec {
    /// Wraps an explicit symmetric positive-definite matrix.
    pub fn from_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != sigma.ncols() {
            return Err(Error::DimensionMismatch { expected: sigma.nrows(), got: sigma.ncols() });
        }
        if sigma.nrows() == 0 {
            return Err(Error::domain("covariance matrix is empty"));
        }
        let scale = sigma.amax().max(1.0);
        if (&sigma - sigma.transpose()).amax() > 1e-12 * scale {
            return Err(Error::domain("covariance matrix is not symmetric"));
        }
        let (chol, jitter_used) = factorize(&sigma)?;
        Ok(CovarianceSpec { times: Vec::new(), hurst: None, sigma, chol, jitter_used })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// Solves chol * y = x by forward substitution.
    pub fn whiten(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let v = DVector::from_column_slice(x);
        let y = self.chol.solve_lower_triangular(&v).ok_or(Error::NotPositiveDefinite { jitter: self.jitter_used })?;
        Ok(y.as_slice().to_vec())
    }

    /// One draw of N(0, sigma): chol * z with z standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.chol * z).as_slice().to_vec()
    }

    /// `n` draws as the columns of a dim × n matrix. Column j equals the j-th of
    /// `n` successive calls to [`Self::sample`] on the same generator.
    pub fn sample_batch<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.dim(), n);
        for j in 0..n {
            for i in 0..self.dim() {
                z[(i, j)] = rng.sample(StandardNormal);
            }
        }
        &self.chol * z
    }
}

/// Draws from N(0, spec.sigma) using the supplied generator.
pub fn sample_gaussian<R: Rng + ?Sized>(spec: &CovarianceSpec, rng: &mut R) -> Vec<f64> {
    spec.sample(rng)
}

/// Probabilists' Hermite polynomial He_n(x) by He_{n+1} = x He_n - n He_{n-1}.
pub fn hermite(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// (n+1)(q-1)^{n/2}: bound on ‖F‖_q / ‖F‖_2 for F in the n-th chaos, q > 2.
pub fn hypercontractivity_bound(n: u32, q: f64) -> Result<f64> {
    if !(q > 2.0) {
        return Err(Error::domain(format!("hypercontractivity bound needs q > 2, got {q}")));
    }
    Ok((n as f64 + 1.0) * (q - 1.0).powf(n as f64 / 2.0))
}

/// n^{l/2}: bound on ‖D^l F‖_2 / ‖F‖_2 for F in the n-th chaos.
pub fn derivative_norm_bound(n: u32, l: u32) -> Result<f64> {
    if l > n {
        return Err(Error::domain(format!("derivative order {l} exceeds degree {n}")));
    }
    Ok((n as f64).powf(l as f64 / 2.0))
}
