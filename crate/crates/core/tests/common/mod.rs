#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3};
use rand::Rng;
use std::f64::consts::PI;

pub fn empirical_covariance(samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = samples[0].len();
    let n = samples.len() as f64;
    let mean: Vec<f64> = (0..d).map(|i| samples.iter().map(|x| x[i]).sum::<f64>() / n).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| samples.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect()
}

/// Coefficients (ascending powers) of the probabilists' Hermite polynomial.
pub fn hermite_coeffs(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for k in 1..n {
        let mut next = vec![0.0; k + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= k as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// E p(X) for standard normal X from the moments (2k-1)!!.
pub fn gaussian_expectation(p: &[f64]) -> f64 {
    let mut moment = 1.0;
    let mut total = 0.0;
    for (k, c) in p.iter().enumerate() {
        if k % 2 == 0 {
            if k > 0 {
                moment *= (k - 1) as f64;
            }
            total += c * moment;
        }
    }
    total
}

pub fn random_spd<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(d, d) * 0.3
}

/// Quadratic form through the cofactor inverse, independent of the Cholesky path.
pub fn quad_form(inv: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    (v.transpose() * inv * &v)[(0, 0)]
}

pub fn explicit_inverse(s: &DMatrix<f64>) -> DMatrix<f64> {
    match s.nrows() {
        2 => {
            let m = Matrix2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
            let det = m.m11 * m.m22 - m.m12 * m.m21;
            DMatrix::from_row_slice(2, 2, &[m.m22 / det, -m.m12 / det, -m.m21 / det, m.m11 / det])
        }
        3 => {
            let m = Matrix3::from_fn(|i, j| s[(i, j)]);
            let cof = |i: usize, j: usize| {
                let r: Vec<usize> = (0..3).filter(|&k| k != i).collect();
                let c: Vec<usize> = (0..3).filter(|&k| k != j).collect();
                let minor = m[(r[0], c[0])] * m[(r[1], c[1])] - m[(r[0], c[1])] * m[(r[1], c[0])];
                if (i + j).is_multiple_of(2) {
                    minor
                } else {
                    -minor
                }
            };
            let det: f64 = (0..3).map(|j| m[(0, j)] * cof(0, j)).sum();
            DMatrix::from_fn(3, 3, |i, j| cof(j, i) / det)
        }
        _ => unreachable!(),
    }
}

/// Minimizes ½xᵀΣ⁻¹x over the Σ-ball by sweeping boundary directions on an angular mesh.
pub fn ball_grid_search(sigma: &DMatrix<f64>, center: &[f64], radius: f64) -> f64 {
    let inv = explicit_inverse(sigma);
    if quad_form(&inv, center) <= radius * radius {
        return 0.0;
    }
    let on_boundary = |d: &[f64]| {
        let t = radius / quad_form(&inv, d).sqrt();
        let x: Vec<f64> = center.iter().zip(d).map(|(c, di)| c + t * di).collect();
        0.5 * quad_form(&inv, &x)
    };
    let mut best = f64::INFINITY;
    if center.len() == 2 {
        let n = 20_000;
        for k in 0..n {
            let phi = 2.0 * PI * k as f64 / n as f64;
            best = best.min(on_boundary(&[phi.cos(), phi.sin()]));
        }
    } else {
        let n = 600;
        for i in 0..=n {
            let th = PI * i as f64 / n as f64;
            for k in 0..2 * n {
                let phi = PI * k as f64 / n as f64;
                best = best.min(on_boundary(&[th.sin() * phi.cos(), th.sin() * phi.sin(), th.cos()]));
            }
        }
    }
    best
}
