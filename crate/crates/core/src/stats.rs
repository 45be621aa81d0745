//! Gaussian tails, binomial confidence intervals and weighted regression.

use statrs::function::erf::erfc;

/// z_{0.975}.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Φ̄(x) = P(Z > x).
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// ln Φ̄(x), accurate far into the upper tail where Φ̄ underflows.
pub fn ln_normal_sf(x: f64) -> f64 {
    if x < 5.0 {
        return normal_sf(x).ln();
    }
    ln_normal_sf_fraction(x)
}

fn ln_normal_sf_fraction(x: f64) -> f64 {
    // Φ̄(x) = φ(x) R(x), R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))), by modified Lentz.
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = x + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln() - f.ln()
}

/// Wilson score interval at 95%.
pub fn wilson_interval(hits: u64, n: u64) -> (f64, f64) {
    let n_f = n as f64;
    let p = hits as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// One-sided 95% Clopper–Pearson upper limit with zero successes: 1 - 0.05^{1/n}.
pub fn clopper_pearson_zero_upper(n: u64) -> f64 {
    1.0 - 0.05f64.powf(1.0 / n as f64)
}

/// Weighted least-squares slope of y on x.
pub fn weighted_slope(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for i in 0..x.len() {
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_values() {
        assert!((normal_sf(2.0) / 0.022_750_131_948_179_207 - 1.0).abs() < 1e-10);
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn log_tail_is_continuous_across_branches() {
        for x in [4.0, 5.0, 6.0] {
            assert!((normal_sf(x).ln() - ln_normal_sf_fraction(x)).abs() < 1e-9, "{x}");
        }
        // Φ̄(6) = 9.865876450376981e-10
        assert!((ln_normal_sf(6.0) - 9.865_876_450_376_981e-10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_tail_far_out() {
        // -x²/2 - ln x - ½ ln 2π - 1/x² + ...
        let x = 50.0f64;
        let approx = -0.5 * x * x - x.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 1.0 / (x * x);
        assert!((ln_normal_sf(x) - approx).abs() < 1e-6);
    }

    #[test]
    fn wilson_brackets() {
        let (lo, hi) = wilson_interval(30, 1000);
        assert!(lo < 0.03 && 0.03 < hi);
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
    }

    #[test]
    fn clopper_pearson_rule_of_three() {
        let u = clopper_pearson_zero_upper(1000);
        assert!((u * 1000.0 - 3.0).abs() < 0.01);
    }

    #[test]
    fn slope_of_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        assert!((weighted_slope(&x, &y, &[1.0, 3.0, 0.5, 2.0]) + 0.5).abs() < 1e-14);
    }
}
