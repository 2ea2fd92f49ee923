//! Componentwise intermediate order statistics and their limiting
//! covariance `Σ`.

use serde::{Deserialize, Serialize};

use crate::dnorm::{dnorm_eval, DNormSpec};
use crate::error::{Error, Result};
use crate::margins::NormingConstants;
use crate::matrix::SquareMatrix;

fn default_c() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    0.5
}

/// `k(n) = ⌊c · n^gamma⌋` with `gamma ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KRule {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl Default for KRule {
    fn default() -> Self {
        Self { c: 1.0, gamma: 0.5 }
    }
}

impl KRule {
    pub fn sqrt() -> Self {
        Self::default()
    }

    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        let rule = Self { c, gamma };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("k-rule needs c > 0, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("k-rule needs gamma in (0,1), got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn k(&self, n: u64) -> Result<u64> {
        self.validate()?;
        let k = (self.c * (n as f64).powf(self.gamma)).floor();
        if k < 1.0 || k >= n as f64 {
            return Err(Error::InvalidParameter(format!(
                "k-rule (c = {}, gamma = {}) gives k = {k} outside [1, n−1] for n = {n}",
                self.c, self.gamma
            )));
        }
        Ok(k as u64)
    }
}

/// Which order statistic counts as "intermediate" for a given `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexConvention {
    /// `X_{n−k:n}`, the copula-case statement.
    NMinusK,
    /// `X_{n−k+1:n}`, the general-case statement.
    NMinusKPlus1,
}

impl IndexConvention {
    /// 1-based rank of the selected order statistic.
    pub fn rank(self, n: u64, k: u64) -> u64 {
        match self {
            IndexConvention::NMinusK => n - k,
            IndexConvention::NMinusKPlus1 => n - k + 1,
        }
    }
}

/// Per-component k-rules plus the index convention (`None` picks the
/// default of the experiment using it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermediateSpec {
    pub rules: Vec<KRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<IndexConvention>,
}

impl IntermediateSpec {
    pub fn equal(d: usize, rule: KRule) -> Self {
        Self { rules: vec![rule; d], convention: None }
    }

    pub fn k_vector(&self, n: u64) -> Result<Vec<u64>> {
        self.rules.iter().map(|r| r.k(n)).collect()
    }

    pub fn has_equal_rules(&self) -> bool {
        self.rules.windows(2).all(|w| w[0] == w[1])
    }

    /// Limits `k_ij = lim √(k_i/k_j) = √(c_i/c_j)`; mixed exponents have no
    /// finite positive limit and are rejected.
    pub fn ratios(&self) -> Result<KRatioMatrix> {
        for r in &self.rules {
            r.validate()?;
        }
        if let Some(first) = self.rules.first() {
            if self.rules.iter().any(|r| r.gamma != first.gamma) {
                return Err(Error::InvalidParameter(
                    "k-rules with different exponents have k_i/k_j → 0 or ∞".into(),
                ));
            }
        }
        let c: Vec<f64> = self.rules.iter().map(|r| r.c).collect();
        KRatioMatrix::new(SquareMatrix::from_fn(c.len(), |i, j| (c[i] / c[j]).sqrt()))
    }
}

/// Limits `k_ij` of `√(k_i / k_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KRatioJson", into = "KRatioJson")]
pub struct KRatioMatrix {
    k: SquareMatrix,
}

#[derive(Serialize, Deserialize)]
struct KRatioJson {
    d: usize,
    k: SquareMatrix,
}

impl TryFrom<KRatioJson> for KRatioMatrix {
    type Error = Error;

    fn try_from(j: KRatioJson) -> Result<Self> {
        if j.k.dim() != j.d {
            return Err(Error::DimensionMismatch { expected: j.d, got: j.k.dim() });
        }
        KRatioMatrix::new(j.k)
    }
}

impl From<KRatioMatrix> for KRatioJson {
    fn from(m: KRatioMatrix) -> Self {
        KRatioJson { d: m.k.dim(), k: m.k }
    }
}

impl KRatioMatrix {
    const TOL: f64 = 1e-9;

    /// Validates positivity, `k_ii = 1`, `k_ij k_ji = 1` and
    /// `k_ij k_jm = k_im`.
    pub fn new(k: SquareMatrix) -> Result<Self> {
        let d = k.dim();
        for i in 0..d {
            if (k.get(i, i) - 1.0).abs() > Self::TOL {
                return Err(Error::InvalidParameter(format!("k_{i}{i} must be 1, got {}", k.get(i, i))));
            }
            for j in 0..d {
                let v = k.get(i, j);
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("k_{i}{j} = {v} must be positive")));
                }
                if (v * k.get(j, i) - 1.0).abs() > Self::TOL {
                    return Err(Error::InvalidParameter(format!("k_{i}{j} · k_{j}{i} must be 1")));
                }
                for m in 0..d {
                    let lhs = v * k.get(j, m);
                    if (lhs - k.get(i, m)).abs() > Self::TOL * lhs.max(1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "ratios are inconsistent: k_{i}{j} · k_{j}{m} ≠ k_{i}{m}"
                        )));
                    }
                }
            }
        }
        Ok(Self { k })
    }

    pub fn equal(d: usize) -> Self {
        Self { k: SquareMatrix::filled(d, 1.0) }
    }

    pub fn dim(&self) -> usize {
        self.k.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.k.get(i, j)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.k
    }
}

/// Value of 1-based rank `rank` in `col`, partially reordering `col`.
pub fn select_rank(col: &mut [f64], rank: usize) -> f64 {
    let (_, v, _) = col.select_nth_unstable_by(rank - 1, f64::total_cmp);
    *v
}

/// `(X_{j_1:n,1}, …, X_{j_d:n,d})` from a row-major `n × d` sample,
/// `ranks` 1-based.
pub fn componentwise_os(sample: &[f64], d: usize, ranks: &[usize]) -> Result<Vec<f64>> {
    if d == 0 || !sample.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch { expected: d, got: sample.len() });
    }
    if ranks.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: ranks.len() });
    }
    let n = sample.len() / d;
    let mut col = Vec::with_capacity(n);
    ranks
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            if j == 0 || j > n {
                return Err(Error::OutOfDomain(format!("rank {j} outside 1..={n}")));
            }
            col.clear();
            col.extend(sample.iter().skip(i).step_by(d));
            Ok(select_rank(&mut col, j))
        })
        .collect()
}

/// Unstandardized componentwise order statistics, one row per replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsBatch {
    pub n: u64,
    pub k: Vec<u64>,
    pub d: usize,
    pub convention: IndexConvention,
    pub values: Vec<f64>,
}

impl OsBatch {
    pub fn replications(&self) -> usize {
        self.values.len() / self.d
    }
}

/// `(n/√k_i)(x_i − (n − k_i)/n)`.
pub fn standardize_copula_case(x: &[f64], n: u64, k: &[u64]) -> Result<Vec<f64>> {
    if x.len() != k.len() {
        return Err(Error::DimensionMismatch { expected: k.len(), got: x.len() });
    }
    let nf = n as f64;
    x.iter()
        .zip(k)
        .map(|(&xi, &ki)| {
            if ki == 0 || ki >= n {
                return Err(Error::InvalidParameter(format!("need 1 ≤ k < n, got k = {ki}, n = {n}")));
            }
            let kf = ki as f64;
            Ok(nf / kf.sqrt() * (xi - (nf - kf) / nf))
        })
        .collect()
}

/// `(x_i − d_i)/c_i` with `c_i = constants[i].a`, `d_i = constants[i].b`.
pub fn standardize_general_case(x: &[f64], constants: &[NormingConstants]) -> Result<Vec<f64>> {
    if x.len() != constants.len() {
        return Err(Error::DimensionMismatch { expected: constants.len(), got: x.len() });
    }
    x.iter()
        .zip(constants)
        .map(|(&xi, nc)| {
            if !(nc.a > 0.0) {
                return Err(Error::InvalidParameter(format!("scale must be positive, got {}", nc.a)));
            }
            Ok((xi - nc.b) / nc.a)
        })
        .collect()
}

/// `σ_ii = 1`, `σ_ij = k_ij + k_ji − ‖k_ij e_i + k_ji e_j‖_D`.
pub fn theoretical_sigma(dnorm: &DNormSpec, ratios: &KRatioMatrix) -> Result<SquareMatrix> {
    let d = ratios.dim();
    if let Some(dd) = dnorm.dim() {
        if dd != d {
            return Err(Error::DimensionMismatch { expected: dd, got: d });
        }
    }
    let mut sigma = SquareMatrix::identity(d);
    let mut x = vec![0.0; d];
    for i in 0..d {
        for j in (i + 1)..d {
            let (kij, kji) = (ratios.get(i, j), ratios.get(j, i));
            x.fill(0.0);
            x[i] = kij;
            x[j] = kji;
            let s = kij + kji - dnorm_eval(dnorm, &x, None)?;
            sigma.set(i, j, s);
            sigma.set(j, i, s);
        }
    }
    Ok(sigma)
}

/// Equal-k case `σ_ij = 2 − ‖e_i + e_j‖_D`.
pub fn theoretical_sigma_equal_k(dnorm: &DNormSpec, d: usize) -> Result<SquareMatrix> {
    theoretical_sigma(dnorm, &KRatioMatrix::equal(d))
}
