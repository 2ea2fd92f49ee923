//! Declarative Monte Carlo experiments for the asymptotic normality of
//! componentwise intermediate order statistics, and their reports.
//!
//! Replication `r` draws from `stream(seed, domain, r)` and is reduced to its
//! `d` order statistics before anything else happens, so a run needs
//! `O(n·d)` memory per worker and `O(R·d)` overall. Results are collected in
//! replication order; the report is a pure function of the config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chi2rep::{check_lambda, correlated_ratio_sample, representation_distance};
use crate::copula::CopulaModel;
use crate::dnorm::{is_positive_semidefinite, lambda_matrix, DEFAULT_PSD_TOL};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::margins::{norming_constants, MarginalModel, NormingConstants};
use crate::matrix::SquareMatrix;
use crate::normal;
use crate::orderstats::{
    select_rank, standardize_copula_case, standardize_general_case, theoretical_sigma, IndexConvention,
    IntermediateSpec, OsBatch,
};
use crate::rng::{derive_seed, stream, Domain};
use crate::stats::{dkw_epsilon, ks_test, median, moments, Moments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Uniform margins, copula-case standardization.
    Copula,
    /// Copula plus von Mises margins, standardized with norming constants.
    General,
    /// Order statistics against the chi-square ratio representation.
    Representation,
}

/// Pass iff `|observed − target| ≤ max(abs_tol, z · stderr)`; marginal KS
/// tests run at level `ks_alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TolerancePolicy {
    pub abs_tol: f64,
    pub z: f64,
    pub ks_alpha: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self { abs_tol: 0.05, z: 4.0, ks_alpha: 1e-3 }
    }
}

impl TolerancePolicy {
    pub fn allowed(&self, stderr: f64) -> f64 {
        self.abs_tol.max(self.z * stderr)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

fn default_seed_groups() -> usize {
    5
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Inferred from `margins` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    pub copula: CopulaModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margins: Option<Vec<MarginalModel>>,
    pub intermediate: IntermediateSpec,
    pub n: u64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub tolerance: TolerancePolicy,
    /// Representation runs: independent repetitions entering the medians.
    #[serde(default = "default_seed_groups")]
    pub seed_groups: usize,
    /// Representation runs: whether a non-decreasing distance fails the run.
    #[serde(default = "default_true")]
    pub require_decrease: bool,
    /// Representation runs: explicit `Λ` instead of the one implied by the copula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<SquareMatrix>,
    #[serde(default)]
    pub output: OutputPaths,
}

fn invalid(e: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(e.to_string())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(invalid)?;
        config.validate()?;
        Ok(config)
    }

    pub fn kind(&self) -> ExperimentKind {
        self.kind.unwrap_or(if self.margins.is_some() { ExperimentKind::General } else { ExperimentKind::Copula })
    }

    pub fn dim(&self) -> usize {
        self.copula.dim()
    }

    pub fn convention(&self) -> IndexConvention {
        self.intermediate.convention.unwrap_or(match self.kind() {
            ExperimentKind::General => IndexConvention::NMinusKPlus1,
            _ => IndexConvention::NMinusK,
        })
    }

    /// Every check that does not need random numbers; failures are
    /// [`Error::InvalidConfig`].
    pub fn validate(&self) -> Result<()> {
        self.copula.validate().map_err(invalid)?;
        let d = self.dim();
        if self.intermediate.rules.len() != d {
            return Err(invalid(format!("{} k-rules for a {d}-dimensional copula", self.intermediate.rules.len())));
        }
        if self.n < 2 {
            return Err(invalid("n must be at least 2"));
        }
        if self.replications < 2 {
            return Err(invalid("replications must be at least 2"));
        }
        self.intermediate.k_vector(self.n).map_err(invalid)?;
        self.intermediate.ratios().map_err(invalid)?;
        let t = &self.tolerance;
        if !(t.abs_tol >= 0.0 && t.z >= 0.0 && t.ks_alpha > 0.0 && t.ks_alpha < 1.0) {
            return Err(invalid(format!("tolerance policy {t:?} out of range")));
        }
        match (self.kind(), &self.margins) {
            (ExperimentKind::General, None) => return Err(invalid("general experiments need margins")),
            (ExperimentKind::General, Some(m)) => {
                if m.len() != d {
                    return Err(invalid(format!("{} margins for a {d}-dimensional copula", m.len())));
                }
                for model in m {
                    model.validate().map_err(invalid)?;
                }
            }
            (kind, Some(_)) => return Err(invalid(format!("{kind:?} experiments take no margins"))),
            _ => {}
        }
        if self.kind() == ExperimentKind::Representation {
            if self.seed_groups == 0 {
                return Err(invalid("seed_groups must be at least 1"));
            }
            self.intermediate.k_vector(2 * self.n).map_err(invalid)?;
            if !self.intermediate.has_equal_rules() {
                return Err(invalid("representation experiments need equal k-rules"));
            }
            if let Some(l) = &self.lambda {
                if l.dim() != d {
                    return Err(invalid(format!("Λ is {}×{0}, copula dimension is {d}", l.dim())));
                }
            }
        } else if self.lambda.is_some() {
            return Err(invalid("lambda is only used by representation experiments"));
        }
        Ok(())
    }
}

/// Replaces the seed by `value` (typically `$MVOS_SEED`); returns whether
/// an override happened.
pub fn apply_seed_override(config: &mut ExperimentConfig, value: Option<&str>) -> Result<bool> {
    match value {
        None => Ok(false),
        Some(v) => {
            config.seed = v.trim().parse().map_err(|e| invalid(format!("seed override {v:?}: {e}")))?;
            Ok(true)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginKs {
    pub component: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentationSummary {
    pub lambda: SquareMatrix,
    pub n: [u64; 2],
    pub k: [u64; 2],
    /// `distances[g] = [distance at n, distance at 2n]` for seed group `g`.
    pub distances: Vec<[f64; 2]>,
    pub median: [f64; 2],
    pub decreased: bool,
    /// Two-sample DKW bound `4·√(ln(2/δ)/(2R))` at `δ = ks_alpha`.
    pub dkw_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub seed_overridden: bool,
    pub convention: IndexConvention,
    pub k: Vec<u64>,
    pub ranks: Vec<u64>,
    pub theoretical_sigma: SquareMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<Moments>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ks: Vec<MarginKs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representation: Option<RepresentationSummary>,
    pub criteria: Vec<Criterion>,
    pub all_passed: bool,
    #[serde(skip)]
    pub runtime: Duration,
    /// Standardized order statistics, `R × d` row-major (empty for
    /// representation runs).
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl ExperimentReport {
    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.kind() {
        ExperimentKind::Copula => run_copula_experiment(config),
        ExperimentKind::General => run_general_experiment(config),
        ExperimentKind::Representation => run_representation_experiment(config),
    }
}

fn target_sigma(config: &ExperimentConfig) -> Result<SquareMatrix> {
    let sigma = theoretical_sigma(&config.copula.tail_dnorm(), &config.intermediate.ratios().map_err(invalid)?)?;
    let psd = is_positive_semidefinite(&sigma, DEFAULT_PSD_TOL)?;
    if !psd.psd {
        return Err(Error::Internal(format!(
            "theoretical Σ has eigenvalue {:e}; it is a covariance matrix by construction",
            psd.min_eigenvalue
        )));
    }
    Ok(sigma)
}

fn ranks(n: u64, k: &[u64], convention: IndexConvention) -> Vec<u64> {
    k.iter().map(|&ki| convention.rank(n, ki)).collect()
}

/// Order statistics of `R` replications on the uniform scale, `R × d`
/// row-major. Selection happens on latent values.
fn uniform_os(copula: &CopulaModel, n: u64, ranks: &[u64], replications: usize, seed: u64, domain: Domain) -> Vec<f64> {
    let d = copula.dim();
    let rows: Vec<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map_init(
            || vec![Vec::new(); d],
            |cols, r| {
                let mut rng = stream(seed, domain, r);
                copula.fill_latent_columns(&mut rng, n as usize, cols);
                cols.iter_mut()
                    .zip(ranks)
                    .map(|(col, &rank)| copula.latent_to_uniform(select_rank(col, rank as usize)))
                    .collect()
            },
        )
        .collect();
    rows.concat()
}

fn sigma_criteria(sigma: &SquareMatrix, m: &Moments, tol: &TolerancePolicy, out: &mut Vec<Criterion>) {
    let d = sigma.dim();
    for i in 0..d {
        for j in i..d {
            let (observed, target) = (m.cov.get(i, j), sigma.get(i, j));
            let tolerance = tol.allowed(m.cov_stderr.get(i, j));
            out.push(Criterion {
                name: format!("sigma_{}{}", i + 1, j + 1),
                observed,
                target,
                tolerance,
                passed: (observed - target).abs() <= tolerance,
            });
        }
    }
}

fn normality_diagnostics(values: &[f64], d: usize, tol: &TolerancePolicy, criteria: &mut Vec<Criterion>) -> Vec<MarginKs> {
    (0..d)
        .map(|i| {
            let col: Vec<f64> = values.iter().skip(i).step_by(d).copied().collect();
            let ks = ks_test(&col, normal::cdf, tol.ks_alpha);
            criteria.push(Criterion {
                name: format!("ks_{}", i + 1),
                observed: ks.statistic,
                target: 0.0,
                tolerance: ks.critical_value,
                passed: ks.passed,
            });
            MarginKs {
                component: i + 1,
                statistic: ks.statistic,
                p_value: ks.p_value,
                critical_value: ks.critical_value,
                passed: ks.passed,
            }
        })
        .collect()
}

fn finish(
    config: &ExperimentConfig,
    k: Vec<u64>,
    sigma: SquareMatrix,
    values: Vec<f64>,
    started: Instant,
) -> ExperimentReport {
    let d = config.dim();
    let m = moments(&values, d);
    let mut criteria = Vec::new();
    sigma_criteria(&sigma, &m, &config.tolerance, &mut criteria);
    let ks = normality_diagnostics(&values, d, &config.tolerance, &mut criteria);
    let convention = config.convention();
    ExperimentReport {
        config: config.clone(),
        kind: config.kind(),
        seed: config.seed,
        seed_overridden: false,
        convention,
        ranks: ranks(config.n, &k, convention),
        k,
        theoretical_sigma: sigma,
        moments: Some(m),
        ks,
        representation: None,
        all_passed: criteria.iter().all(|c| c.passed),
        criteria,
        runtime: started.elapsed(),
        samples: values,
    }
}

/// Uniform margins: `(n/√k_i)(U_{j_i:n,i} − (n − k_i)/n)` against `N(0, Σ)`.
pub fn run_copula_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;
    if config.kind() != ExperimentKind::Copula {
        return Err(invalid("not a copula experiment"));
    }
    let sigma = target_sigma(config)?;
    let k = config.intermediate.k_vector(config.n)?;
    let r = ranks(config.n, &k, config.convention());
    let os = uniform_os(&config.copula, config.n, &r, config.replications, config.seed, Domain::EXPERIMENT);
    let mut values = Vec::with_capacity(os.len());
    for row in os.chunks_exact(config.dim()) {
        values.extend(standardize_copula_case(row, config.n, &k)?);
    }
    Ok(finish(config, k, sigma, values, started))
}

/// Margins `F_i` on top of the copula: order statistics of `F_i⁻¹(U_i)`
/// standardized by `(a_i, b_i)` from [`norming_constants`].
pub fn run_general_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;
    let margins = match (config.kind(), &config.margins) {
        (ExperimentKind::General, Some(m)) => m,
        _ => return Err(invalid("not a general experiment")),
    };
    let sigma = target_sigma(config)?;
    let k = config.intermediate.k_vector(config.n)?;
    let constants: Vec<NormingConstants> =
        margins.iter().zip(&k).map(|(m, &ki)| norming_constants(m, config.n, ki)).collect::<Result<_>>()?;
    let r = ranks(config.n, &k, config.convention());
    // Quantile functions are nondecreasing, so transforming the selected
    // uniform order statistic equals selecting among transformed draws.
    let os = uniform_os(&config.copula, config.n, &r, config.replications, config.seed, Domain::EXPERIMENT);
    let mut values = Vec::with_capacity(os.len());
    let mut x = vec![0.0; config.dim()];
    for row in os.chunks_exact(config.dim()) {
        for ((xi, &u), m) in x.iter_mut().zip(row).zip(margins) {
            *xi = m.quantile(u)?;
        }
        values.extend(standardize_general_case(&x, &constants)?);
    }
    Ok(finish(config, k, sigma, values, started))
}

/// Raw copula-case order statistics against correlated chi-square ratios
/// at `n` and `2n`, one distance pair per seed group.
pub fn run_representation_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;
    if config.kind() != ExperimentKind::Representation {
        return Err(invalid("not a representation experiment"));
    }
    let d = config.dim();
    let sigma = target_sigma(config)?;
    let lambda = match &config.lambda {
        Some(l) => l.clone(),
        None => lambda_matrix(&sigma)?,
    };
    check_lambda(&lambda)?;

    let convention = config.convention();
    let scales = [config.n, 2 * config.n];
    let ks_at = [config.intermediate.k_vector(scales[0])?, config.intermediate.k_vector(scales[1])?];
    let mut distances = Vec::with_capacity(config.seed_groups);
    for g in 0..config.seed_groups as u64 {
        let mut pair = [0.0; 2];
        for (s, (&n, k)) in scales.iter().zip(&ks_at).enumerate() {
            let domain = Domain::EXPERIMENT.child(2 * g + s as u64);
            let r = ranks(n, k, convention);
            let os = OsBatch {
                n,
                k: k.clone(),
                d,
                convention,
                values: uniform_os(&config.copula, n, &r, config.replications, config.seed, domain),
            };
            let ratio = correlated_ratio_sample(&lambda, n, k[0], config.replications, derive_seed(config.seed, domain))?;
            pair[s] = representation_distance(&os, &ratio, None)?;
        }
        distances.push(pair);
    }
    let med = [
        median(&distances.iter().map(|p| p[0]).collect::<Vec<_>>()),
        median(&distances.iter().map(|p| p[1]).collect::<Vec<_>>()),
    ];
    let decreased = med[1] < med[0];
    let dkw_bound = 4.0 * dkw_epsilon(config.replications, config.tolerance.ks_alpha);
    let mut criteria = vec![Criterion {
        name: "distance_2n_within_dkw".into(),
        observed: med[1],
        target: 0.0,
        tolerance: dkw_bound,
        passed: med[1] <= dkw_bound,
    }];
    if config.require_decrease {
        criteria.push(Criterion {
            name: "distance_decreases".into(),
            observed: med[1] - med[0],
            target: 0.0,
            tolerance: 0.0,
            passed: decreased,
        });
    }
    Ok(ExperimentReport {
        config: config.clone(),
        kind: ExperimentKind::Representation,
        seed: config.seed,
        seed_overridden: false,
        convention,
        ranks: ranks(config.n, &ks_at[0], convention),
        k: ks_at[0].clone(),
        theoretical_sigma: sigma,
        moments: None,
        ks: Vec::new(),
        representation: Some(RepresentationSummary {
            lambda,
            n: scales,
            k: [ks_at[0][0], ks_at[1][0]],
            distances,
            median: med,
            decreased,
            dkw_bound,
        }),
        all_passed: criteria.iter().all(|c| c.passed),
        criteria,
        runtime: started.elapsed(),
        samples: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

fn push_matrix(out: &mut String, name: &str, m: &SquareMatrix) {
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            let _ = writeln!(out, "{name},{i},{j},{}", fmt_f64(m.get(i, j)));
        }
    }
}

fn push_vector(out: &mut String, name: &str, v: &[f64]) {
    for (i, x) in v.iter().enumerate() {
        let _ = writeln!(out, "{name},{i},0,{}", fmt_f64(*x));
    }
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut out = String::from("matrix,row,col,value\n");
            push_matrix(&mut out, "theoretical_sigma", &report.theoretical_sigma);
            if let Some(m) = &report.moments {
                push_matrix(&mut out, "cov", &m.cov);
                push_matrix(&mut out, "cov_stderr", &m.cov_stderr);
                push_vector(&mut out, "mean", &m.mean);
                push_vector(&mut out, "mean_stderr", &m.mean_stderr);
            }
            if let Some(r) = &report.representation {
                push_matrix(&mut out, "lambda", &r.lambda);
            }
            Ok(out)
        }
        ReportFormat::Text => Ok(text_summary(report)),
    }
}

fn text_summary(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let c = &report.config;
    let _ = writeln!(
        out,
        "{} experiment{}: {} copula (d = {}), n = {}, R = {}, seed = {}{}",
        format!("{:?}", report.kind).to_lowercase(),
        c.name.as_deref().map(|n| format!(" '{n}'")).unwrap_or_default(),
        c.copula.name(),
        c.dim(),
        c.n,
        c.replications,
        report.seed,
        if report.seed_overridden { " (overridden)" } else { "" }
    );
    let _ = writeln!(out, "k = {:?}, ranks = {:?} ({:?})", report.k, report.ranks, report.convention);
    for crit in &report.criteria {
        let _ = writeln!(
            out,
            "  [{}] {:<24} observed {:>12.6} target {:>10.6} tolerance {:.6}",
            if crit.passed { "pass" } else { "FAIL" },
            crit.name,
            crit.observed,
            crit.target,
            crit.tolerance
        );
    }
    let _ = writeln!(out, "{}", if report.all_passed { "all criteria passed" } else { "some criteria failed" });
    out
}

/// Parses the long-format CSV of [`render_report`] back into named matrices
/// (vectors come back as `d × 1` columns stored in a `Vec<Vec<f64>>`).
pub fn parse_report_csv(text: &str) -> Result<Vec<(String, Vec<Vec<f64>>)>> {
    let mut out: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::InvalidParameter(format!("report CSV line {}: {line:?}", lineno + 1));
        if f.len() != 4 {
            return Err(bad());
        }
        let (i, j): (usize, usize) = (f[1].parse().map_err(|_| bad())?, f[2].parse().map_err(|_| bad())?);
        let v: f64 = f[3].parse().map_err(|_| bad())?;
        if out.last().map(|(n, _)| n != f[0]).unwrap_or(true) {
            out.push((f[0].to_string(), Vec::new()));
        }
        let rows = &mut out.last_mut().expect("just pushed").1;
        if rows.len() <= i {
            rows.resize(i + 1, Vec::new());
        }
        if rows[i].len() != j {
            return Err(bad());
        }
        rows[i].push(v);
    }
    Ok(out)
}

/// Renders first, then writes, so a failed render leaves no file behind.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(report, format)?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orderstats::KRule;

    fn small(copula: CopulaModel) -> ExperimentConfig {
        ExperimentConfig {
            name: None,
            kind: None,
            copula,
            margins: None,
            intermediate: IntermediateSpec::equal(copula.dim(), KRule::sqrt()),
            n: 400,
            replications: 200,
            seed: 11,
            tolerance: TolerancePolicy::default(),
            seed_groups: 2,
            require_decrease: true,
            lambda: None,
            output: OutputPaths::default(),
        }
    }

    #[test]
    fn kind_inference_and_conventions() {
        let mut c = small(CopulaModel::Independence { d: 2 });
        assert_eq!(c.kind(), ExperimentKind::Copula);
        assert_eq!(c.convention(), IndexConvention::NMinusK);
        c.margins = Some(vec![MarginalModel::Exponential; 2]);
        assert_eq!(c.kind(), ExperimentKind::General);
        assert_eq!(c.convention(), IndexConvention::NMinusKPlus1);
    }

    #[test]
    fn invalid_configs() {
        let base = small(CopulaModel::Gumbel { d: 2, p: 2.0 });
        let cases: Vec<Box<dyn Fn(&mut ExperimentConfig)>> = vec![
            Box::new(|c| c.replications = 0),
            Box::new(|c| c.n = 1),
            Box::new(|c| c.intermediate.rules.pop().map(|_| ()).unwrap()),
            Box::new(|c| c.margins = Some(vec![MarginalModel::Normal])),
            Box::new(|c| c.copula = CopulaModel::Gumbel { d: 2, p: 0.5 }),
            Box::new(|c| c.intermediate.rules[0] = KRule { c: 1.0, gamma: 0.3 }),
            Box::new(|c| c.kind = Some(ExperimentKind::General)),
            Box::new(|c| c.lambda = Some(SquareMatrix::identity(2))),
            Box::new(|c| c.intermediate.rules[0].c = 1e6),
        ];
        for (i, mutate) in cases.iter().enumerate() {
            let mut c = base.clone();
            mutate(&mut c);
            assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))), "case {i}");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn config_json_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"copula": {"kind": "gumbel", "d": 2, "p": 2.0},
                "intermediate": {"rules": [{}, {}]},
                "n": 1000, "replications": 10, "seed": 3}"#,
        )
        .unwrap();
        assert_eq!(c.tolerance, TolerancePolicy::default());
        assert_eq!(c.intermediate.k_vector(1000).unwrap(), vec![31, 31]);
        assert_eq!(c.seed_groups, 5);
        assert!(matches!(ExperimentConfig::from_json("{}"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn seed_override() {
        let mut c = small(CopulaModel::Independence { d: 2 });
        assert!(!apply_seed_override(&mut c, None).unwrap());
        assert!(apply_seed_override(&mut c, Some("99")).unwrap());
        assert_eq!(c.seed, 99);
        assert!(apply_seed_override(&mut c, Some("x")).is_err());
    }

    #[test]
    fn small_runs_are_reproducible() {
        let c = small(CopulaModel::Gumbel { d: 2, p: 2.0 });
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(render_report(&a, ReportFormat::Json).unwrap(), render_report(&b, ReportFormat::Json).unwrap());
        assert_eq!(a.samples.len(), 400);
        assert_eq!(a.k, vec![20, 20]);
        assert_eq!(a.ranks, vec![380, 380]);
        let cov = &a.moments.as_ref().unwrap().cov;
        assert_eq!(cov.get(0, 1), cov.get(1, 0));
    }

    #[test]
    fn report_csv_round_trip() {
        let r = run_experiment(&small(CopulaModel::Independence { d: 2 })).unwrap();
        let parsed = parse_report_csv(&render_report(&r, ReportFormat::Csv).unwrap()).unwrap();
        let m = r.moments.as_ref().unwrap();
        let get = |name: &str| parsed.iter().find(|(n, _)| n == name).unwrap().1.clone();
        assert_eq!(get("theoretical_sigma"), r.theoretical_sigma.rows());
        assert_eq!(get("cov"), m.cov.rows());
        assert_eq!(get("cov_stderr"), m.cov_stderr.rows());
        assert_eq!(get("mean"), m.mean.iter().map(|&x| vec![x]).collect::<Vec<_>>());
    }

    #[test]
    fn representation_refuses_non_psd_lambda() {
        let a = 3f64.powf(-0.25);
        let mut c = small(CopulaModel::Independence { d: 3 });
        c.kind = Some(ExperimentKind::Representation);
        c.lambda = Some(SquareMatrix::from_rows(vec![vec![1.0, 0.0, a], vec![0.0, 1.0, a], vec![a, a, 1.0]]).unwrap());
        assert!(matches!(run_experiment(&c), Err(Error::NotPositiveSemidefinite { .. })));
    }
}
