//! Independent reference implementations used as test oracles. Nothing here
//! calls into the crate's numerics.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Gaussian elimination with partial pivoting on a dense square system.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        assert!(d.abs() > 1e-14, "singular oracle system");
        for row in col + 1..n {
            let f = a[row][col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Least squares through the normal equations `(XᵀX) β = Xᵀy`, with an
/// explicit column of ones when `intercept` is set. Returns predictions on `test`.
pub fn ols_predict(train: &[Vec<f64>], y: &[f64], test: &[Vec<f64>], intercept: bool) -> Vec<f64> {
    let aug = |row: &Vec<f64>| {
        let mut r = row.clone();
        if intercept {
            r.push(1.0);
        }
        r
    };
    let x: Vec<Vec<f64>> = train.iter().map(aug).collect();
    let p = x[0].len();
    let xtx: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| x.iter().map(|r| r[i] * r[j]).sum()).collect())
        .collect();
    let xty: Vec<f64> = (0..p).map(|i| x.iter().zip(y).map(|(r, v)| r[i] * v).sum()).collect();
    let beta = solve_dense(xtx, xty);
    test.iter()
        .map(|r| aug(r).iter().zip(&beta).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
}

/// Kernel ridge by a direct dense solve of `(K + λI) α = y`.
pub fn krr_predict(train: &[Vec<f64>], y: &[f64], test: &[Vec<f64>], lambda: f64, gamma: f64) -> Vec<f64> {
    let n = train.len();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| rbf(&train[i], &train[j], gamma) + if i == j { lambda } else { 0.0 })
                .collect()
        })
        .collect();
    let alpha = solve_dense(k, y.to_vec());
    test.iter()
        .map(|t| train.iter().zip(&alpha).map(|(x, a)| a * rbf(t, x, gamma)).sum())
        .collect()
}

/// Z-score columns of `rows` using mean and population sd of `reference`.
pub fn standardize(reference: &[Vec<f64>], rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = reference.len() as f64;
    let p = reference[0].len();
    let stats: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let m = reference.iter().map(|r| r[j]).sum::<f64>() / n;
            let v = reference.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            (m, if v > 0.0 { v.sqrt() } else { 1.0 })
        })
        .collect();
    rows.iter()
        .map(|r| r.iter().zip(&stats).map(|(x, (m, s))| (x - m) / s).collect())
        .collect()
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

/// Student-t CDF with two degrees of freedom, which has a closed form.
pub fn t2_cdf(t: f64) -> f64 {
    0.5 + t / (2.0 * (2.0 + t * t).sqrt())
}

/// `P(X >= k)` for `X ~ Binomial(n, p)` by summing the lower tail with exact
/// integer binomial coefficients.
pub fn binomial_tail(n: u64, k: u64, p: f64) -> f64 {
    let choose = |n: u64, r: u64| -> f64 {
        let mut c: u128 = 1;
        for i in 0..r as u128 {
            c = c * (n as u128 - i) / (i + 1);
        }
        c as f64
    };
    let lower: f64 = (0..k)
        .map(|i| choose(n, i) * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32))
        .sum();
    1.0 - lower
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller, to stay independent of the crate's sampler
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| normal(rng)).collect()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
