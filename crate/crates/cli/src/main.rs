//! `mvos`: D-norms, copula samples, marginal checks, limiting covariances,
//! chi-square ratio samples and Monte Carlo experiments from the command line.
//!
//! Exit codes: 0 success, 1 a checked criterion failed, 2 invalid input or
//! config, 3 a matrix failed the positive-semidefiniteness gate.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mvos_core::chi2rep::{correlated_ratio_sample_with, RatioMethod};
use mvos_core::copula::{copula_sample, CopulaModel};
use mvos_core::dnorm::{dnorm_estimate, dnorm_validate, DNormSpec};
use mvos_core::experiment::{apply_seed_override, emit_report, render_report, run_experiment, ExperimentConfig, ReportFormat};
use mvos_core::io::{fmt_f64, write_sample_csv};
use mvos_core::margins::{smirnov_check, von_mises_check, MarginalModel, VonMisesType};
use mvos_core::orderstats::{theoretical_sigma, theoretical_sigma_equal_k, KRatioMatrix, KRule};
use mvos_core::{Error, SquareMatrix};

#[derive(Parser)]
#[command(name = "mvos", version, about = "Componentwise intermediate order statistics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate or validate a D-norm
    Dnorm {
        #[command(subcommand)]
        action: DnormAction,
    },
    /// Draw a sample from a copula and write it as CSV
    Sample(SampleArgs),
    /// Closed-form checks of marginal tail conditions
    Check {
        #[command(subcommand)]
        action: CheckAction,
    },
    /// Limiting covariance matrix of the standardized order statistics
    Cov(CovArgs),
    /// Correlated chi-square ratio vectors
    Chi2rep(Chi2repArgs),
    /// Run a Monte Carlo experiment from a JSON config
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum DnormAction {
    Eval {
        /// D-norm spec, inline JSON or a path
        #[arg(long)]
        spec: String,
        /// Comma-separated vector
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    Validate {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CopulaKind {
    Independence,
    Comonotone,
    Gumbel,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    copula: CopulaKind,
    /// Gumbel parameter
    #[arg(long)]
    p: Option<f64>,
    #[arg(short)]
    d: usize,
    #[arg(short)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV (stdout if absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MarginKind {
    Normal,
    Exponential,
    Pareto,
    Triangular,
}

#[derive(Args)]
struct MarginArgs {
    #[arg(long, value_enum)]
    margin: MarginKind,
    /// Pareto tail index
    #[arg(long)]
    alpha: Option<f64>,
}

impl MarginArgs {
    fn model(&self) -> anyhow::Result<MarginalModel> {
        let model = match self.margin {
            MarginKind::Normal => MarginalModel::Normal,
            MarginKind::Exponential => MarginalModel::Exponential,
            MarginKind::Triangular => MarginalModel::Triangular,
            MarginKind::Pareto => MarginalModel::Pareto { alpha: self.alpha.unwrap_or(1.0) },
        };
        if self.alpha.is_some() && !matches!(self.margin, MarginKind::Pareto) {
            bail!("--alpha only applies to the Pareto margin");
        }
        model.validate()?;
        Ok(model)
    }
}

#[derive(Subcommand)]
enum CheckAction {
    /// Smirnov quotients `(k − n(1 − F(a x + b)))/√k` with norming constants
    Smirnov {
        #[command(flatten)]
        margin: MarginArgs,
        #[arg(long, default_value = "1e4,1e6,1e8")]
        n_grid: String,
        /// `sqrt`, `pow:GAMMA` or `pow:GAMMA:C` for k = ⌊C n^GAMMA⌋
        #[arg(long, default_value = "sqrt")]
        k_rule: String,
        #[arg(long, default_value = "-2,-1,0,1,2", allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Von Mises quotient along a grid toward the upper endpoint
    VonMises {
        #[command(flatten)]
        margin: MarginArgs,
        /// Increasing grid; a default suited to the margin is used if absent
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CovArgs {
    /// D-norm spec, inline JSON or a path
    #[arg(long)]
    dnorm: String,
    /// k-ratio matrix, inline JSON or a path
    #[arg(long, conflicts_with = "equal_k")]
    kratios: Option<String>,
    #[arg(long)]
    equal_k: bool,
    /// Dimension for --equal-k (taken from the spec when it has one)
    #[arg(short)]
    d: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Wishart,
    Streaming,
}

#[derive(Args)]
struct Chi2repArgs {
    /// Λ as nested rows, inline JSON or a path
    #[arg(long)]
    lambda: String,
    #[arg(short)]
    n: u64,
    #[arg(short)]
    k: u64,
    #[arg(short = 'R')]
    replications: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "wishart")]
    method: MethodArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// JSON report (overrides the config's output path)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Standardized order statistics, one row per replication
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Flat matrix dump of Σ, covariance and moments
    #[arg(long)]
    matrices: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

/// Inline JSON when it looks like JSON, otherwise a path to a JSON file.
fn json_arg(arg: &str) -> anyhow::Result<String> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> anyhow::Result<T> {
    let text = json_arg(arg)?;
    serde_json::from_str(&text).map_err(|e| anyhow!(Error::InvalidParameter(format!("{what}: {e}"))))
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("not a number: {t:?}")))
        .collect()
}

fn parse_counts(s: &str) -> anyhow::Result<Vec<u64>> {
    parse_list(s)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 && v < 2f64.powi(63) {
                Ok(v as u64)
            } else {
                Err(anyhow!("not a positive integer: {v}"))
            }
        })
        .collect()
}

fn parse_k_rule(s: &str) -> anyhow::Result<KRule> {
    let parts: Vec<&str> = s.split(':').collect();
    let rule = match parts.as_slice() {
        ["sqrt"] => KRule::sqrt(),
        ["pow", g] => KRule::new(1.0, g.parse()?)?,
        ["pow", g, c] => KRule::new(c.parse()?, g.parse()?)?,
        _ => bail!("k-rule must be sqrt, pow:GAMMA or pow:GAMMA:C, got {s:?}"),
    };
    Ok(rule)
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn matrix_table(m: &SquareMatrix) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.6}")).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}

fn dnorm_cmd(action: DnormAction) -> anyhow::Result<ExitCode> {
    match action {
        DnormAction::Eval { spec, x, seed } => {
            let spec: DNormSpec = parse_json(&spec, "D-norm spec")?;
            let est = dnorm_estimate(&spec, &parse_list(&x)?, seed)?;
            println!("{}", serde_json::to_string(&est)?);
            Ok(ExitCode::SUCCESS)
        }
        DnormAction::Validate { spec, trials, seed } => {
            let spec: DNormSpec = parse_json(&spec, "D-norm spec")?;
            let report = dnorm_validate(&spec, trials, seed)?;
            println!("d = {}, trials = {}", report.d, report.trials);
            for c in &report.checks {
                println!(
                    "  [{}] {:<20} worst violation {:.3e}",
                    if c.passed { "pass" } else { "FAIL" },
                    format!("{:?}", c.property),
                    c.worst_violation
                );
            }
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn sample_cmd(a: SampleArgs) -> anyhow::Result<ExitCode> {
    let model = match a.copula {
        CopulaKind::Independence => CopulaModel::Independence { d: a.d },
        CopulaKind::Comonotone => CopulaModel::Comonotone { d: a.d },
        CopulaKind::Gumbel => CopulaModel::Gumbel {
            d: a.d,
            p: a.p.ok_or_else(|| anyhow!(Error::InvalidParameter("--p is required for gumbel".into())))?,
        },
    };
    if a.p.is_some() && !matches!(a.copula, CopulaKind::Gumbel) {
        bail!("--p only applies to the gumbel copula");
    }
    let batch = copula_sample(&model, a.n, a.seed)?;
    match &a.out {
        Some(p) => write_sample_csv(p, "u", batch.d, &batch.rows)?,
        None => print!("{}", mvos_core::io::sample_csv("u", batch.d, &batch.rows)),
    }
    Ok(ExitCode::SUCCESS)
}

fn default_von_mises_grid(model: &MarginalModel) -> Vec<f64> {
    match model.von_mises_type() {
        VonMisesType::One => vec![1.0, 2.0, 4.0, 6.0, 10.0, 20.0, 30.0],
        VonMisesType::Two => vec![2.0, 10.0, 100.0, 1e3, 1e6],
        VonMisesType::Three => {
            let omega = model.upper_endpoint();
            (1..=6).map(|e| omega - 10f64.powi(-e)).collect()
        }
    }
}

fn check_cmd(action: CheckAction) -> anyhow::Result<ExitCode> {
    match action {
        CheckAction::Smirnov { margin, n_grid, k_rule, x, out } => {
            let model = margin.model()?;
            let rows = smirnov_check(&model, &parse_list(&x)?, &parse_counts(&n_grid)?, &parse_k_rule(&k_rule)?)?;
            println!("{} margin", model.name());
            println!("{:>14} {:>10} {:>6} {:>14} {:>12}", "n", "k", "x", "quotient", "|q - x|");
            for r in &rows {
                println!(
                    "{:>14} {:>10} {:>6} {:>14.8} {:>12.3e}{}",
                    r.n,
                    r.k,
                    r.x,
                    r.quotient,
                    (r.quotient - r.x).abs(),
                    if r.clipped { "  (at upper endpoint)" } else { "" }
                );
            }
            if let Some(p) = out {
                let mut csv = String::from("n,k,x,quotient,clipped\n");
                for r in &rows {
                    let _ = writeln!(csv, "{},{},{},{},{}", r.n, r.k, fmt_f64(r.x), fmt_f64(r.quotient), r.clipped);
                }
                write_or_print(Some(&p), &csv)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        CheckAction::VonMises { margin, x, out } => {
            let model = margin.model()?;
            let grid = match x {
                Some(s) => parse_list(&s)?,
                None => default_von_mises_grid(&model),
            };
            let table = von_mises_check(&model, &grid)?;
            println!("{} margin, condition {:?}, limit {}", model.name(), table.condition, table.limit);
            println!("{:>22} {:>20}", "x", "quotient");
            for r in &table.rows {
                println!("{:>22} {:>20.12}", r.x, r.quotient);
            }
            if let Some(x) = table.last_stable {
                println!("evaluation stopped after x = {x}: tail underflows");
            }
            if let Some(p) = out {
                let mut csv = String::from("x,quotient\n");
                for r in &table.rows {
                    let _ = writeln!(csv, "{},{}", fmt_f64(r.x), fmt_f64(r.quotient));
                }
                write_or_print(Some(&p), &csv)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cov_cmd(a: CovArgs) -> anyhow::Result<ExitCode> {
    let spec: DNormSpec = parse_json(&a.dnorm, "D-norm spec")?;
    // --equal-k is the default when no ratios are given.
    let sigma = match &a.kratios {
        Some(k) => theoretical_sigma(&spec, &parse_json::<KRatioMatrix>(k, "k-ratio matrix")?)?,
        None => {
            let d = a
                .d
                .or(spec.dim())
                .ok_or_else(|| anyhow!(Error::InvalidParameter("give -d or --kratios for this D-norm".into())))?;
            theoretical_sigma_equal_k(&spec, d)?
        }
    };
    println!("{}", serde_json::to_string(&sigma)?);
    print!("{}", matrix_table(&sigma));
    Ok(ExitCode::SUCCESS)
}

fn chi2rep_cmd(a: Chi2repArgs) -> anyhow::Result<ExitCode> {
    let lambda: SquareMatrix = parse_json(&a.lambda, "Λ")?;
    let method = match a.method {
        MethodArg::Wishart => RatioMethod::Wishart,
        MethodArg::Streaming => RatioMethod::Streaming,
    };
    let s = correlated_ratio_sample_with(&lambda, a.n, a.k, a.replications, a.seed, method)?;
    match &a.out {
        Some(p) => write_sample_csv(p, "r", s.d, &s.values)?,
        None => print!("{}", mvos_core::io::sample_csv("r", s.d, &s.values)),
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment_cmd(a: ExperimentArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| anyhow!(Error::InvalidConfig(format!("{}: {e}", a.config.display()))))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    let overridden = apply_seed_override(&mut config, std::env::var("MVOS_SEED").ok().as_deref())?;
    config.validate()?;

    let mut report = match a.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .context("building thread pool")?
            .install(|| run_experiment(&config))?,
        None => run_experiment(&config)?,
    };
    report.seed_overridden = overridden;

    print!("{}", render_report(&report, ReportFormat::Text)?);
    println!("runtime {:.2} s", report.runtime.as_secs_f64());
    if let Some(p) = a.out.as_ref().or(config.output.report.as_ref()) {
        emit_report(&report, ReportFormat::Json, p)?;
    }
    if let Some(p) = a.matrices.as_ref() {
        emit_report(&report, ReportFormat::Csv, p)?;
    }
    if let Some(p) = a.csv.as_ref().or(config.output.csv.as_ref()) {
        if report.samples.is_empty() {
            eprintln!("note: representation runs keep no standardized sample; {} not written", p.display());
        } else {
            write_sample_csv(p, "z", config.dim(), &report.samples)?;
        }
    }
    Ok(if report.all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NotPositiveSemidefinite { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dnorm { action } => dnorm_cmd(action),
        Command::Sample(a) => sample_cmd(a),
        Command::Check { action } => check_cmd(action),
        Command::Cov(a) => cov_cmd(a),
        Command::Chi2rep(a) => chi2rep_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
