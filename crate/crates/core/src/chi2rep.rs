//! Uniform order statistics as ratios of chi-square sums,
//! `U_{i:n} =_D Σ_{j≤2i} ξ_j² / Σ_{j≤2(n+1)} ξ_j²`, and the multivariate
//! version built from `N(0, Λ)` vectors.

use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dnorm::{is_positive_semidefinite, DEFAULT_PSD_TOL};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::orderstats::OsBatch;
use crate::rng::{stream, Domain};

/// How the two chi-square sums per component are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioMethod {
    /// Draw all `2(n+1)` normal vectors and accumulate running sums.
    Streaming,
    /// Draw the diagonals of the two Wishart matrices `Σ_j ξ^{(j)} ξ^{(j)ᵀ}`
    /// directly via the Bartlett decomposition; same joint law, `O(d²)` per
    /// replication.
    Wishart,
}

/// `R` iid copies of `Σ_{j≤2i} ξ_j² / Σ_{j≤2(n+1)} ξ_j²`, each
/// Beta(i, n+1−i) distributed.
pub fn univariate_ratio_sample(i: u64, n: u64, replications: usize, seed: u64) -> Result<Vec<f64>> {
    if i == 0 || i > n {
        return Err(Error::InvalidParameter(format!("need 1 ≤ i ≤ n, got i = {i}, n = {n}")));
    }
    if replications == 0 {
        return Err(Error::InvalidParameter("replications must be at least 1".into()));
    }
    let head = 2 * i;
    let total = 2 * (n + 1);
    Ok((0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Domain::RATIO_UNIVARIATE, r);
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..total {
                let x: f64 = StandardNormal.sample(&mut rng);
                let sq = x * x;
                if j < head {
                    num += sq;
                }
                den += sq;
            }
            num / den
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioMeta {
    pub n: u64,
    pub k: u64,
    pub lambda: SquareMatrix,
    pub seed: u64,
    pub method: RatioMethod,
}

/// `R × d` ratios, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioVectorSample {
    pub d: usize,
    pub replications: usize,
    pub values: Vec<f64>,
    pub meta: RatioMeta,
}

impl RatioVectorSample {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.d).copied().collect()
    }
}

/// Checks that `lambda` is a correlation-type matrix that passes the PSD
/// gate; the error names the smallest eigenvalue.
pub fn check_lambda(lambda: &SquareMatrix) -> Result<()> {
    lambda.ensure_symmetric()?;
    for i in 0..lambda.dim() {
        if (lambda.get(i, i) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("Λ diagonal entry {i} must be 1")));
        }
    }
    let psd = is_positive_semidefinite(lambda, DEFAULT_PSD_TOL)?;
    if !psd.psd {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: psd.min_eigenvalue });
    }
    Ok(())
}

pub fn correlated_ratio_sample(
    lambda: &SquareMatrix,
    n: u64,
    k: u64,
    replications: usize,
    seed: u64,
) -> Result<RatioVectorSample> {
    correlated_ratio_sample_with(lambda, n, k, replications, seed, RatioMethod::Wishart)
}

/// Per replication, `2(n+1)` iid `N(0, Λ)` vectors `ξ^{(j)}` and the
/// component ratios `Σ_{j≤2(n−k)} ξ_i^{(j)2} / Σ_{j≤2(n+1)} ξ_i^{(j)2}`.
pub fn correlated_ratio_sample_with(
    lambda: &SquareMatrix,
    n: u64,
    k: u64,
    replications: usize,
    seed: u64,
    method: RatioMethod,
) -> Result<RatioVectorSample> {
    check_lambda(lambda)?;
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("need 1 ≤ k < n, got k = {k}, n = {n}")));
    }
    if replications == 0 {
        return Err(Error::InvalidParameter("replications must be at least 1".into()));
    }
    let d = lambda.dim();
    let factor = lambda.symmetric_sqrt();
    let head = 2 * (n - k);
    let tail = 2 * (k + 1);
    // Bartlett needs at least d degrees of freedom in both Wishart parts.
    let method = if method == RatioMethod::Wishart && (head < d as u64 || tail < d as u64) {
        RatioMethod::Streaming
    } else {
        method
    };
    let sampler = match method {
        RatioMethod::Wishart => Some((BartlettDiag::new(&factor, head)?, BartlettDiag::new(&factor, tail)?)),
        RatioMethod::Streaming => None,
    };

    let rows: Vec<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Domain::RATIO_CORRELATED, r);
            match &sampler {
                Some((num, rest)) => {
                    let a = num.sample(&mut rng);
                    let b = rest.sample(&mut rng);
                    a.iter().zip(&b).map(|(x, y)| x / (x + y)).collect()
                }
                None => streaming_row(&factor, head, head + tail, &mut rng),
            }
        })
        .collect();
    Ok(RatioVectorSample {
        d,
        replications,
        values: rows.concat(),
        meta: RatioMeta { n, k, lambda: lambda.clone(), seed, method },
    })
}

fn streaming_row(factor: &SquareMatrix, head: u64, total: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = factor.dim();
    let mut z = vec![0.0; d];
    let mut num = vec![0.0; d];
    let mut den = vec![0.0; d];
    for j in 0..total {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        for i in 0..d {
            let xi: f64 = (0..d).map(|l| factor.get(i, l) * z[l]).sum();
            let sq = xi * xi;
            if j < head {
                num[i] += sq;
            }
            den[i] += sq;
        }
    }
    num.iter().zip(&den).map(|(a, b)| a / b).collect()
}

/// Diagonal of `F W Fᵀ` with `W ~ Wishart_d(m, I)` drawn as `A Aᵀ`,
/// `A` lower triangular with `A_ii² ~ χ²(m − i)` and standard normal
/// entries below the diagonal.
struct BartlettDiag {
    factor: SquareMatrix,
    chi: Vec<ChiSquared<f64>>,
}

impl BartlettDiag {
    fn new(factor: &SquareMatrix, dof: u64) -> Result<Self> {
        let chi = (0..factor.dim())
            .map(|i| {
                ChiSquared::new((dof - i as u64) as f64)
                    .map_err(|e| Error::Internal(format!("chi-square with {} dof: {e}", dof - i as u64)))
            })
            .collect::<Result<_>>()?;
        Ok(Self { factor: factor.clone(), chi })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.factor.dim();
        let mut a = SquareMatrix::zeros(d);
        for i in 0..d {
            a.set(i, i, self.chi[i].sample(rng).sqrt());
            for j in 0..i {
                a.set(i, j, StandardNormal.sample(rng));
            }
        }
        // ‖Aᵀ f_i‖² with f_i the i-th row of F.
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|c| {
                        let v: f64 = (c..d).map(|r| a.get(r, c) * self.factor.get(i, r)).sum();
                        v * v
                    })
                    .sum()
            })
            .collect()
    }
}

/// Levels of the default grid: per-component empirical quantiles at 0.1, …, 0.9.
pub const GRID_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Per-component grid values; distances are taken over their tensor product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn points(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }
}

fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let idx = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Tensor grid of pooled per-component empirical quantiles of both samples.
pub fn quantile_grid(a: &[f64], b: &[f64], d: usize, levels: &[f64]) -> Grid {
    let axes = (0..d)
        .map(|j| {
            let mut pooled: Vec<f64> = a.iter().skip(j).step_by(d).chain(b.iter().skip(j).step_by(d)).copied().collect();
            pooled.sort_by(f64::total_cmp);
            levels.iter().map(|&q| empirical_quantile(&pooled, q)).collect()
        })
        .collect();
    Grid { axes }
}

/// Joint empirical cdf of a row-major sample at every tensor grid point,
/// in lexicographic order of the grid indices.
pub fn joint_ecdf(rows: &[f64], d: usize, grid: &Grid) -> Vec<f64> {
    let r = rows.len() / d;
    let points = grid.points();
    let mut idx = vec![0usize; d];
    let mut out = Vec::with_capacity(points);
    for _ in 0..points {
        let x: Vec<f64> = idx.iter().enumerate().map(|(j, &i)| grid.axes[j][i]).collect();
        let count = rows.chunks_exact(d).filter(|row| row.iter().zip(&x).all(|(v, t)| v <= t)).count();
        out.push(count as f64 / r as f64);
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < grid.axes[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    out
}

/// Largest difference of the two joint empirical cdfs over `grid`
/// (default: [`quantile_grid`] at [`GRID_LEVELS`]).
pub fn representation_distance(os: &OsBatch, ratio: &RatioVectorSample, grid: Option<&Grid>) -> Result<f64> {
    if os.d != ratio.d {
        return Err(Error::MetadataMismatch(format!("dimension {} vs {}", os.d, ratio.d)));
    }
    if os.n != ratio.meta.n {
        return Err(Error::MetadataMismatch(format!("n {} vs {}", os.n, ratio.meta.n)));
    }
    if os.k.iter().any(|&k| k != ratio.meta.k) {
        return Err(Error::MetadataMismatch(format!("k {:?} vs {}", os.k, ratio.meta.k)));
    }
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = quantile_grid(&os.values, &ratio.values, os.d, &GRID_LEVELS);
            &owned
        }
    };
    if grid.axes.len() != os.d {
        return Err(Error::DimensionMismatch { expected: os.d, got: grid.axes.len() });
    }
    let a = joint_ecdf(&os.values, os.d, grid);
    let b = joint_ecdf(&ratio.values, ratio.d, grid);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}
