//! Goodness-of-fit and moment estimators shared by the experiment harness
//! and the statistical tests.

use serde::{Deserialize, Serialize};

use crate::matrix::SquareMatrix;

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2 j² λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // Alternating series converges badly here; use the theta-dual form of the cdf.
        let t = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for j in 0..50 {
            let k = (2 * j + 1) as f64;
            cdf += (-k * k * t).exp();
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `λ` with `Q(λ) = alpha`.
pub fn kolmogorov_critical_lambda(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.1, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub passed: bool,
}

impl KsResult {
    fn from_statistic(statistic: f64, effective_n: f64, alpha: f64) -> Self {
        let p_value = kolmogorov_sf(effective_n.sqrt() * statistic);
        let critical_value = kolmogorov_critical_lambda(alpha) / effective_n.sqrt();
        Self { statistic, p_value, critical_value, alpha, passed: statistic <= critical_value }
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample KS distance `sup |F_n − F|`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let v = sorted(xs);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

pub fn ks_test(xs: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> KsResult {
    KsResult::from_statistic(ks_statistic(xs, cdf), xs.len() as f64, alpha)
}

/// Two-sample KS distance `sup |F_m − G_n|`.
pub fn ks2_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks2_test(a: &[f64], b: &[f64], alpha: f64) -> KsResult {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    KsResult::from_statistic(ks2_statistic(a, b), na * nb / (na + nb), alpha)
}

/// DKW half-width `√(ln(2/δ) / (2m))` for an empirical cdf from `m` points.
pub fn dkw_epsilon(m: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * m as f64)).sqrt()
}

/// Sample mean, covariance and their standard errors for an `R × d`
/// row-major sample. Rows are reduced strictly in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub mean_stderr: Vec<f64>,
    pub cov: SquareMatrix,
    pub cov_stderr: SquareMatrix,
}

pub fn moments(rows: &[f64], d: usize) -> Moments {
    assert!(d > 0 && rows.len().is_multiple_of(d) && rows.len() >= 2 * d);
    let r = rows.len() / d;
    let rf = r as f64;
    let mut mean = vec![0.0; d];
    for row in rows.chunks_exact(d) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rf);

    // Products of centred values; their sample mean is the covariance and
    // their spread gives its standard error.
    let mut sum = SquareMatrix::zeros(d);
    let mut sumsq = SquareMatrix::zeros(d);
    for row in rows.chunks_exact(d) {
        for i in 0..d {
            let ci = row[i] - mean[i];
            for j in i..d {
                let p = ci * (row[j] - mean[j]);
                sum.set(i, j, sum.get(i, j) + p);
                sumsq.set(i, j, sumsq.get(i, j) + p * p);
            }
        }
    }
    let mut cov = SquareMatrix::zeros(d);
    let mut cov_stderr = SquareMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            let c = sum.get(i, j) / (rf - 1.0);
            let mean_p = sum.get(i, j) / rf;
            let var_p = ((sumsq.get(i, j) / rf - mean_p * mean_p) * rf / (rf - 1.0)).max(0.0);
            let se = (var_p / rf).sqrt();
            cov.set(i, j, c);
            cov.set(j, i, c);
            cov_stderr.set(i, j, se);
            cov_stderr.set(j, i, se);
        }
    }
    let mean_stderr = (0..d).map(|i| (cov.get(i, i) / rf).sqrt()).collect();
    Moments { mean, mean_stderr, cov, cov_stderr }
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(xs: &[f64]) -> f64 {
    let v = sorted(xs);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
