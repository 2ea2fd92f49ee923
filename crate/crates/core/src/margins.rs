//! Univariate margins satisfying one of the three von Mises conditions,
//! their intermediate norming constants, and Smirnov's criterion.

use serde::{Deserialize, Serialize};

use crate::copula::UniformSampleBatch;
use crate::error::{Error, Result};
use crate::normal;
use crate::orderstats::KRule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalModel {
    Normal,
    Exponential,
    /// Standard Pareto `1 − x^(−alpha)`, `x ≥ 1`.
    Pareto { alpha: f64 },
    /// Density `1 − |x|` on `(−1, 1)`.
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VonMisesType {
    /// `f(x) ∫_x^ω (1 − F) / (1 − F(x))² → 1`.
    One,
    /// `ω = ∞`, `x f(x) / (1 − F(x)) → α`.
    Two,
    /// `ω < ∞`, `(ω − x) f(x) / (1 − F(x)) → α`.
    Three,
}

impl MarginalModel {
    pub fn validate(&self) -> Result<()> {
        if let MarginalModel::Pareto { alpha } = *self {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidParameter(format!("Pareto needs alpha > 0, got {alpha}")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        match self {
            MarginalModel::Normal => "normal".into(),
            MarginalModel::Exponential => "exponential".into(),
            MarginalModel::Pareto { alpha } => format!("pareto({alpha})"),
            MarginalModel::Triangular => "triangular".into(),
        }
    }

    /// `ω(F) = sup{x : F(x) < 1}`.
    pub fn upper_endpoint(&self) -> f64 {
        match self {
            MarginalModel::Triangular => 1.0,
            _ => f64::INFINITY,
        }
    }

    pub fn von_mises_type(&self) -> VonMisesType {
        match self {
            MarginalModel::Normal | MarginalModel::Exponential => VonMisesType::One,
            MarginalModel::Pareto { .. } => VonMisesType::Two,
            MarginalModel::Triangular => VonMisesType::Three,
        }
    }

    /// `α` of conditions (2) and (3); `None` for condition (1).
    pub fn von_mises_alpha(&self) -> Option<f64> {
        match *self {
            MarginalModel::Pareto { alpha } => Some(alpha),
            MarginalModel::Triangular => Some(2.0),
            _ => None,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            MarginalModel::Normal => normal::cdf(x),
            MarginalModel::Exponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x).exp_m1()
                }
            }
            MarginalModel::Pareto { alpha } => {
                if x <= 1.0 {
                    0.0
                } else {
                    1.0 - x.powf(-alpha)
                }
            }
            MarginalModel::Triangular => {
                if x <= -1.0 {
                    0.0
                } else if x <= 0.0 {
                    0.5 * (1.0 + x) * (1.0 + x)
                } else if x < 1.0 {
                    1.0 - 0.5 * (1.0 - x) * (1.0 - x)
                } else {
                    1.0
                }
            }
        }
    }

    /// Survival function `1 − F(x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            MarginalModel::Normal => normal::sf(x),
            MarginalModel::Exponential => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-x).exp()
                }
            }
            MarginalModel::Pareto { alpha } => {
                if x <= 1.0 {
                    1.0
                } else {
                    x.powf(-alpha)
                }
            }
            MarginalModel::Triangular => {
                if x <= -1.0 {
                    1.0
                } else if x <= 0.0 {
                    1.0 - 0.5 * (1.0 + x) * (1.0 + x)
                } else if x < 1.0 {
                    let h = 1.0 - x;
                    h * h * 0.5
                } else {
                    0.0
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            MarginalModel::Normal => normal::pdf(x),
            MarginalModel::Exponential => {
                if x < 0.0 {
                    0.0
                } else {
                    (-x).exp()
                }
            }
            MarginalModel::Pareto { alpha } => {
                if x < 1.0 {
                    0.0
                } else {
                    alpha * x.powf(-alpha - 1.0)
                }
            }
            MarginalModel::Triangular => (1.0 - x.abs()).max(0.0),
        }
    }

    /// Generalized inverse `inf{t : F(t) ≥ u}`, `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::OutOfDomain(format!("quantile level {u} outside (0,1)")));
        }
        Ok(match *self {
            MarginalModel::Normal => normal::quantile(u),
            MarginalModel::Exponential => -(-u).ln_1p(),
            MarginalModel::Pareto { alpha } => (1.0 - u).powf(-1.0 / alpha),
            MarginalModel::Triangular => {
                if u <= 0.5 {
                    (2.0 * u).sqrt() - 1.0
                } else {
                    1.0 - (2.0 * (1.0 - u)).sqrt()
                }
            }
        })
    }

    /// `F⁻¹(1 − q)` from the tail probability `q ∈ (0, 1)`.
    pub fn upper_quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::OutOfDomain(format!("tail probability {q} outside (0,1)")));
        }
        Ok(match *self {
            MarginalModel::Normal => normal::upper_quantile(q),
            MarginalModel::Exponential => -q.ln(),
            MarginalModel::Pareto { alpha } => q.powf(-1.0 / alpha),
            MarginalModel::Triangular => {
                if q <= 0.5 {
                    1.0 - (2.0 * q).sqrt()
                } else {
                    (2.0 * (1.0 - q)).sqrt() - 1.0
                }
            }
        })
    }

    /// Closed-form `∫_x^ω (1 − F(t)) dt` for the condition-(1) families.
    pub fn tail_integral(&self, x: f64) -> Option<f64> {
        match *self {
            MarginalModel::Normal => Some(normal::pdf(x) - x * normal::sf(x)),
            MarginalModel::Exponential => Some(if x >= 0.0 { (-x).exp() } else { 1.0 - x }),
            _ => None,
        }
    }
}

/// `(F(x), f(x))`; densities above the upper endpoint are rejected.
pub fn marginal_eval(model: &MarginalModel, x: f64) -> Result<(f64, f64)> {
    model.validate()?;
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("x = {x}")));
    }
    if x > model.upper_endpoint() {
        return Err(Error::OutOfDomain(format!("x = {x} above the upper endpoint")));
    }
    Ok((model.cdf(x), model.pdf(x)))
}

pub fn marginal_quantile(model: &MarginalModel, u: f64) -> Result<f64> {
    model.validate()?;
    model.quantile(u)
}

/// Centering `b = F⁻¹(1 − k/n)` and scale `a = √k / (n f(b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormingConstants {
    pub a: f64,
    pub b: f64,
    pub n: u64,
    pub k: u64,
}

pub fn norming_constants(model: &MarginalModel, n: u64, k: u64) -> Result<NormingConstants> {
    model.validate()?;
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("need 1 ≤ k < n, got k = {k}, n = {n}")));
    }
    let b = model.upper_quantile(k as f64 / n as f64)?;
    let f = model.pdf(b);
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::OutOfDomain(format!("density at b = {b} is {f}")));
    }
    Ok(NormingConstants { a: (k as f64).sqrt() / (n as f64 * f), b, n, k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmirnovRow {
    pub n: u64,
    pub k: u64,
    pub x: f64,
    pub quotient: f64,
    /// `c·x + d` reached the upper endpoint, so `1 − F` was taken as 0.
    pub clipped: bool,
}

/// `(k + n(F(c·x + d) − 1)) / √k`.
pub fn smirnov_quotient(model: &MarginalModel, n: u64, k: u64, c: f64, d: f64, x: f64) -> (f64, bool) {
    let arg = c * x + d;
    let clipped = arg >= model.upper_endpoint();
    let sf = if clipped { 0.0 } else { model.sf(arg) };
    let kf = k as f64;
    ((kf - n as f64 * sf) / kf.sqrt(), clipped)
}

/// Smirnov quotients with the norming constants `(a, b)` themselves.
pub fn smirnov_check(model: &MarginalModel, x_grid: &[f64], n_grid: &[u64], rule: &KRule) -> Result<Vec<SmirnovRow>> {
    smirnov_check_with(model, x_grid, n_grid, rule, |nc| (nc.a, nc.b))
}

/// Smirnov quotients with constants `(c, d) = adjust(a, b)`.
pub fn smirnov_check_with(
    model: &MarginalModel,
    x_grid: &[f64],
    n_grid: &[u64],
    rule: &KRule,
    adjust: impl Fn(&NormingConstants) -> (f64, f64),
) -> Result<Vec<SmirnovRow>> {
    let mut rows = Vec::with_capacity(x_grid.len() * n_grid.len());
    for &n in n_grid {
        let k = rule.k(n)?;
        let nc = norming_constants(model, n, k)?;
        let (c, d) = adjust(&nc);
        for &x in x_grid {
            let (quotient, clipped) = smirnov_quotient(model, n, k, c, d, x);
            rows.push(SmirnovRow { n, k, x, quotient, clipped });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesRow {
    pub x: f64,
    pub quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VonMisesTable {
    pub condition: VonMisesType,
    pub limit: f64,
    pub rows: Vec<VonMisesRow>,
    /// Set when evaluation stopped early; the last grid point that was finite.
    pub last_stable: Option<f64>,
}

/// Evaluates the von Mises quotient of the model's own condition along a
/// grid increasing toward `ω(F)`.
pub fn von_mises_check(model: &MarginalModel, grid: &[f64]) -> Result<VonMisesTable> {
    model.validate()?;
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let omega = model.upper_endpoint();
    if let Some(x) = grid.iter().find(|&&x| x >= omega) {
        return Err(Error::OutOfDomain(format!("grid point {x} not below the upper endpoint")));
    }
    let condition = model.von_mises_type();
    let limit = model.von_mises_alpha().unwrap_or(1.0);
    let mut rows = Vec::with_capacity(grid.len());
    let mut last_stable = None;
    for &x in grid {
        let s = model.sf(x);
        let f = model.pdf(x);
        let q = match condition {
            VonMisesType::One => (f / s) * (model.tail_integral(x).expect("condition-(1) family") / s),
            VonMisesType::Two => x * f / s,
            VonMisesType::Three => (omega - x) * f / s,
        };
        if !q.is_finite() || s == 0.0 {
            last_stable = Some(rows.last().map_or(f64::NAN, |r: &VonMisesRow| r.x));
            break;
        }
        rows.push(VonMisesRow { x, quotient: q });
    }
    Ok(VonMisesTable { condition, limit, rows, last_stable })
}

/// Anything with a generalized inverse; lets [`quantile_transform`] take
/// test margins as well as the builtin families.
pub trait Quantile {
    fn quantile_at(&self, u: f64) -> Result<f64>;
}

impl Quantile for MarginalModel {
    fn quantile_at(&self, u: f64) -> Result<f64> {
        self.quantile(u)
    }
}

/// `(F_1⁻¹(U_1), …, F_d⁻¹(U_d))` row by row, row-major output.
pub fn quantile_transform<M: Quantile>(models: &[M], batch: &UniformSampleBatch) -> Result<Vec<f64>> {
    if models.len() != batch.d {
        return Err(Error::DimensionMismatch { expected: batch.d, got: models.len() });
    }
    batch
        .rows
        .chunks_exact(batch.d)
        .flat_map(|row| row.iter().zip(models).map(|(&u, m)| m.quantile_at(u)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_quantile_examples() {
        let e = MarginalModel::Exponential;
        assert!((e.cdf(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-16);
        assert!((e.quantile(1.0 - (-1.0f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(MarginalModel::Pareto { alpha: 1.0 }.quantile(0.5).unwrap(), 2.0);
        let (f0, d0) = marginal_eval(&MarginalModel::Triangular, 0.0).unwrap();
        assert_eq!((f0, d0), (0.5, 1.0));
        assert!(marginal_eval(&MarginalModel::Triangular, 1.5).is_err());
        assert!(marginal_quantile(&MarginalModel::Normal, 1.0).is_err());
        assert!(marginal_quantile(&MarginalModel::Normal, 0.0).is_err());
        assert!(MarginalModel::Pareto { alpha: 0.0 }.validate().is_err());
    }

    #[test]
    fn norming_constant_errors() {
        let e = MarginalModel::Exponential;
        assert!(norming_constants(&e, 100, 0).is_err());
        assert!(norming_constants(&e, 100, 100).is_err());
    }

    #[test]
    fn quotient_clips_at_endpoint() {
        let t = MarginalModel::Triangular;
        let nc = norming_constants(&t, 10_000, 200).unwrap();
        let (q, clipped) = smirnov_quotient(&t, 10_000, 200, nc.a, nc.b, 1e6);
        assert!(clipped);
        assert!((q - 200f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn von_mises_rejects_bad_grids() {
        let t = MarginalModel::Triangular;
        assert!(von_mises_check(&t, &[0.5, 0.4]).is_err());
        assert!(von_mises_check(&t, &[0.5, 1.0]).is_err());
    }

    #[test]
    fn von_mises_reports_last_stable_point() {
        // 1 − Φ underflows to 0 near x = 38.5.
        let table = von_mises_check(&MarginalModel::Normal, &[10.0, 20.0, 30.0, 40.0]).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.last_stable, Some(30.0));
    }
}
