//! D-norms `‖x‖_D = E(max_i |x_i| Z_i)` and the matrices built from them.
//!
//! Two kinds of norm are supported: the analytic families (sup-norm and the
//! logistic `p`-norms) and norms defined by a generator `Z` with nonnegative,
//! unit-mean components, evaluated by plain Monte Carlo averaging over a
//! caller-seeded stream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::tgamma as gamma;

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::rng::{stream, Domain};

/// Seed used when a generator-based norm is evaluated without one.
pub const DEFAULT_EVAL_SEED: u64 = 0x5eed_d0c5;

/// Relative tolerance of the PSD check, scaled by the largest eigenvalue.
pub const DEFAULT_PSD_TOL: f64 = 1e-10;

/// Generator draws per parallel work unit.
const MC_CHUNK: u64 = 1 << 14;

/// A D-norm: an analytic family or a Monte Carlo evaluated generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DNormSpec {
    Sup,
    Logistic {
        p: f64,
    },
    Generator {
        gen: GeneratorKind,
        d: usize,
        mc_samples: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// `Z = (1, …, 1)`; yields the sup-norm.
    Constant,
    /// `Z = d · e_J` with `J` uniform; yields the 1-norm.
    RandomIndex,
    /// iid Fréchet(`p`) components rescaled to unit mean; yields `‖·‖_p`.
    Frechet { p: f64 },
}

/// Something that can draw generator vectors `Z`.
pub trait Generator: Sync {
    fn dim(&self) -> usize;

    /// Overwrites `z` (length `dim`) with one draw.
    fn sample_into(&self, rng: &mut ChaCha8Rng, z: &mut [f64]);
}

/// A builtin generator of fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub d: usize,
    frechet_scale: f64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("generator dimension must be positive".into()));
        }
        let frechet_scale = match kind {
            GeneratorKind::Frechet { p } => {
                // Shape p ≤ 1 has no finite mean; the 1-norm comes from RandomIndex.
                if !(p > 1.0 && p.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "Fréchet generator needs finite p > 1, got {p}"
                    )));
                }
                1.0 / gamma(1.0 - 1.0 / p)
            }
            _ => 1.0,
        };
        Ok(Self { kind, d, frechet_scale })
    }
}

impl Generator for GeneratorSpec {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, z: &mut [f64]) {
        match self.kind {
            GeneratorKind::Constant => z.fill(1.0),
            GeneratorKind::RandomIndex => {
                z.fill(0.0);
                z[rng.random_range(0..self.d)] = self.d as f64;
            }
            GeneratorKind::Frechet { p } => {
                let inv = -1.0 / p;
                for zi in z.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *zi = self.frechet_scale * e.powf(inv);
                }
            }
        }
    }
}

impl DNormSpec {
    pub fn one_norm() -> Self {
        DNormSpec::Logistic { p: 1.0 }
    }

    /// Fixed dimension, if the spec has one (generator-based norms do).
    pub fn dim(&self) -> Option<usize> {
        match self {
            DNormSpec::Generator { d, .. } => Some(*d),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DNormSpec::Sup => Ok(()),
            DNormSpec::Logistic { p } => {
                if p >= 1.0 && p.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("logistic D-norm needs finite p ≥ 1, got {p}")))
                }
            }
            DNormSpec::Generator { gen, d, mc_samples } => {
                if mc_samples == 0 {
                    return Err(Error::InvalidParameter("mc_samples must be positive".into()));
                }
                GeneratorSpec::new(gen, d).map(|_| ())
            }
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, DNormSpec::Generator { gen, .. } if !matches!(gen, GeneratorKind::Constant))
    }
}

/// A Monte Carlo mean and its standard error (zero for exact values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

fn check_finite(x: &[f64]) -> Result<()> {
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("vector component {v}")));
    }
    Ok(())
}

pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn logistic_norm(x: &[f64], p: f64) -> f64 {
    let m = sup_norm(x);
    if m == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `‖x‖_D` for a Monte Carlo generator, with its standard error.
pub fn generator_norm<G: Generator + ?Sized>(gen: &G, x: &[f64], samples: u64, seed: u64) -> Result<Estimate> {
    let d = gen.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    check_finite(x)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("mc_samples must be positive".into()));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, Domain::DNORM_EVAL, c);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut z = vec![0.0; d];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                gen.sample_into(&mut rng, &mut z);
                let v = x.iter().zip(&z).fold(0.0f64, |m, (xi, zi)| m.max(xi.abs() * zi));
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial.iter().fold((0.0, 0.0), |(a, b), (c, e)| (a + c, b + e));
    Ok(mean_and_stderr(s, s2, samples))
}

fn mean_and_stderr(s: f64, s2: f64, n: u64) -> Estimate {
    let nf = n as f64;
    let mean = s / nf;
    let var = if n > 1 { ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0) } else { 0.0 };
    Estimate { value: mean, stderr: (var / nf).sqrt() }
}

/// `‖x‖_D` with a standard error (zero for the analytic families).
pub fn dnorm_estimate(spec: &DNormSpec, x: &[f64], seed: Option<u64>) -> Result<Estimate> {
    spec.validate()?;
    check_finite(x)?;
    match *spec {
        DNormSpec::Sup => Ok(Estimate { value: sup_norm(x), stderr: 0.0 }),
        DNormSpec::Logistic { p } => Ok(Estimate { value: logistic_norm(x, p), stderr: 0.0 }),
        DNormSpec::Generator { gen, d, mc_samples } => {
            let g = GeneratorSpec::new(gen, d)?;
            generator_norm(&g, x, mc_samples, seed.unwrap_or(DEFAULT_EVAL_SEED))
        }
    }
}

pub fn dnorm_eval(spec: &DNormSpec, x: &[f64], seed: Option<u64>) -> Result<f64> {
    dnorm_estimate(spec, x, seed).map(|e| e.value)
}

/// Extreme value distribution function `G(x) = exp(−‖x‖_D)` for `x ≤ 0`.
pub fn evd_eval(spec: &DNormSpec, x: &[f64], seed: Option<u64>) -> Result<f64> {
    if let Some(v) = x.iter().find(|&&v| v > 0.0) {
        return Err(Error::OutOfDomain(format!("EVD argument must be ≤ 0, got component {v}")));
    }
    Ok((-dnorm_eval(spec, x, seed)?).exp())
}

/// Entrywise square root of a valid covariance `Σ` (unit diagonal,
/// off-diagonal entries in `[0, 1]`).
pub fn lambda_matrix(sigma: &SquareMatrix) -> Result<SquareMatrix> {
    sigma.ensure_symmetric()?;
    let d = sigma.dim();
    for i in 0..d {
        if (sigma.get(i, i) - 1.0).abs() > 1e-12 {
            return Err(Error::OutOfDomain(format!("Σ diagonal entry {i} is {}, expected 1", sigma.get(i, i))));
        }
        for j in 0..d {
            let v = sigma.get(i, j);
            if v < -1e-12 {
                return Err(Error::OutOfDomain(format!("Σ entry ({i},{j}) = {v} is negative")));
            }
            if v > 1.0 + 1e-12 {
                return Err(Error::OutOfDomain(format!("Σ entry ({i},{j}) = {v} exceeds 1")));
            }
        }
    }
    Ok(SquareMatrix::from_fn(d, |i, j| {
        if i == j {
            1.0
        } else {
            sigma.get(i, j).clamp(0.0, 1.0).sqrt()
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdCheck {
    pub psd: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Smallest-eigenvalue test: PSD iff `λ_min ≥ −tol · max(|λ_max|, 1)`.
pub fn is_positive_semidefinite(m: &SquareMatrix, tol: f64) -> Result<PsdCheck> {
    m.ensure_symmetric()?;
    let eig = m.symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = max.abs().max(1.0);
    Ok(PsdCheck { psd: min >= -tol * scale, min_eigenvalue: min, max_eigenvalue: max })
}

// ---------------------------------------------------------------------------
// Axiom validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Standardization,
    Homogeneity,
    TriangleInequality,
    Monotonicity,
    Bounds,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::Standardization,
        Property::Homogeneity,
        Property::TriangleInequality,
        Property::Monotonicity,
        Property::Bounds,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: Property,
    pub passed: bool,
    /// Largest excess over the allowed error (0 when within tolerance).
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub d: usize,
    pub trials: usize,
    pub checks: Vec<PropertyCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, property: Property) -> &PropertyCheck {
        self.checks.iter().find(|c| c.property == property).expect("every property is checked")
    }
}

/// Dimension used to validate the dimension-free analytic families.
pub const ANALYTIC_VALIDATION_DIM: usize = 3;

/// A norm evaluator backed either by a closed form or by one fixed set of
/// generator draws (common random numbers), so that homogeneity, the
/// triangle inequality and monotonicity hold up to rounding.
enum Evaluator {
    Analytic(DNormSpec),
    Sampled { d: usize, z: Vec<f64> },
}

impl Evaluator {
    fn sampled<G: Generator + ?Sized>(gen: &G, samples: u64, seed: u64) -> Self {
        let d = gen.dim();
        let chunks = samples.div_ceil(MC_CHUNK);
        let z: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream(seed, Domain::DNORM_VALIDATE, c);
                let count = MC_CHUNK.min(samples - c * MC_CHUNK) as usize;
                let mut out = vec![0.0; count * d];
                for row in out.chunks_exact_mut(d) {
                    gen.sample_into(&mut rng, row);
                }
                out
            })
            .collect();
        Evaluator::Sampled { d, z: z.concat() }
    }

    /// Norm estimate and its standard error, plus the standard error of the
    /// matching 1-norm estimate `mean Σ|x_i|Z_i`.
    fn eval(&self, x: &[f64]) -> (f64, f64, f64) {
        match self {
            Evaluator::Analytic(DNormSpec::Sup) => (sup_norm(x), 0.0, 0.0),
            Evaluator::Analytic(DNormSpec::Logistic { p }) => (logistic_norm(x, *p), 0.0, 0.0),
            Evaluator::Analytic(_) => unreachable!("generator specs are sampled"),
            Evaluator::Sampled { d, z } => {
                let (mut s, mut s2, mut t, mut t2) = (0.0, 0.0, 0.0, 0.0);
                for row in z.chunks_exact(*d) {
                    let mut mx = 0.0f64;
                    let mut sum = 0.0;
                    for (xi, zi) in x.iter().zip(row) {
                        let v = xi.abs() * zi;
                        mx = mx.max(v);
                        sum += v;
                    }
                    s += mx;
                    s2 += mx * mx;
                    t += sum;
                    t2 += sum * sum;
                }
                let n = (z.len() / d) as u64;
                let a = mean_and_stderr(s, s2, n);
                let b = mean_and_stderr(t, t2, n);
                (a.value, a.stderr, b.stderr)
            }
        }
    }
}

/// Checks the D-norm axioms and bounds on `trials` random vectors.
///
/// Generator-based norms are judged against 4 Monte Carlo standard errors
/// wherever the sampled norm can differ from the true one; everything else
/// must hold to rounding.
pub fn dnorm_validate(spec: &DNormSpec, trials: usize, seed: u64) -> Result<ValidationReport> {
    spec.validate()?;
    match *spec {
        DNormSpec::Generator { gen, d, mc_samples } => {
            let g = GeneratorSpec::new(gen, d)?;
            validate_generator(&g, mc_samples, trials, seed)
        }
        _ => validate_with(Evaluator::Analytic(spec.clone()), ANALYTIC_VALIDATION_DIM, trials, seed),
    }
}

/// [`dnorm_validate`] for an arbitrary generator.
pub fn validate_generator<G: Generator + ?Sized>(
    gen: &G,
    mc_samples: u64,
    trials: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if mc_samples == 0 {
        return Err(Error::InvalidParameter("mc_samples must be positive".into()));
    }
    validate_with(Evaluator::sampled(gen, mc_samples, seed), gen.dim(), trials, seed)
}

const MC_Z: f64 = 4.0;

fn validate_with(ev: Evaluator, d: usize, trials: usize, seed: u64) -> Result<ValidationReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let fp = |scale: f64| 1e-12 * scale.max(1.0);
    let mut worst = [0.0f64; 5];
    let mut record = |p: Property, excess: f64, allowed: f64| {
        let idx = Property::ALL.iter().position(|&q| q == p).unwrap();
        worst[idx] = worst[idx].max((excess - allowed).max(0.0));
    };

    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        let (v, se, _) = ev.eval(&e);
        record(Property::Standardization, (v - 1.0).abs(), MC_Z * se + fp(1.0));
    }

    let mut rng = stream(seed, Domain::DNORM_VALIDATE.child(u64::MAX), 0);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.random_range(-2.0..2.0)).collect() };
    for _ in 0..trials {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let (nx, sex, se1) = ev.eval(&x);
        let (ny, _, _) = ev.eval(&y);

        let lambda: f64 = rng.random_range(-3.0..3.0);
        let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
        let (ns, _, _) = ev.eval(&scaled);
        record(Property::Homogeneity, (ns - lambda.abs() * nx).abs(), fp(ns));

        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let (nsum, _, _) = ev.eval(&sum);
        record(Property::TriangleInequality, nsum - nx - ny, fp(nx + ny));

        let shrunk: Vec<f64> = x.iter().map(|v| v * rng.random_range(0.0..1.0)).collect();
        let (nshrunk, _, _) = ev.eval(&shrunk);
        record(Property::Monotonicity, nshrunk - nx, fp(nx));

        let allowed = MC_Z * sex.max(se1) + fp(nx);
        record(Property::Bounds, sup_norm(&x) - nx, allowed);
        record(Property::Bounds, nx - x.iter().map(|v| v.abs()).sum::<f64>(), allowed);
    }

    let checks = Property::ALL
        .iter()
        .zip(worst)
        .map(|(&property, w)| PropertyCheck { property, passed: w == 0.0, worst_violation: w })
        .collect();
    Ok(ValidationReport { d, trials, checks })
}
