//! Command-line front end.
//!
//! Every subcommand writes its artifacts plus `manifest.json` into `--out`.
//! Exit codes: 0 ok, 2 input, 3 config, 4 numeric failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bench::{gen_equicorr_data, run_sim_study, FitSettings, Method, SimConfig};
use crate::bma::{bma_posterior_mean, BmaConfig, BmaMode};
use crate::data::{Dataset, ModelIndicator};
use crate::error::Error;
use crate::marglik::{g_factor, log_marginal_normal_ig};
use crate::modelsearch::{gibbs_model_search, posterior_model_probs, MarginalCache, ModelPrior, NlpEvidence, SearchConfig};
use crate::priors::{default_tau, prob_below_threshold, Family, PriorSpec, DEFAULT_A_PHI, DEFAULT_B_PHI};
use crate::rng::derive_seed;
use crate::truncation::{sample_nlp_prior_rejection, sample_pmom_prior};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => CliError::Config(e.to_string()),
            Error::NonFinite(_) | Error::DimensionMismatch { .. } => CliError::Input(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "nlpbma", version, about = "Non-local prior variable selection and model averaging")]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "NLPBMA_THREADS")]
    pub threads: Option<usize>,
    /// Base seed; generated and recorded in the manifest when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "nlpbma-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Model search and model averaging on a CSV data set.
    Fit(FitArgs),
    /// Write one simulated equicorrelated data set as CSV.
    Simulate(SimulateArgs),
    /// Simulation study of estimation error against ridge and oracle OLS.
    Benchmark(BenchmarkArgs),
    /// Draw from a non-local prior.
    PriorSample(PriorSampleArgs),
    /// Log marginal likelihood of one model.
    Marglik(MarglikArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Pmom,
    Pimom,
    Pemom,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Pmom => Family::Pmom,
            FamilyArg::Pimom => Family::Pimom,
            FamilyArg::Pemom => Family::Pemom,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PriorArgs {
    #[arg(long, value_enum, default_value = "pmom")]
    pub family: FamilyArg,
    /// Prior dispersion; family default when omitted.
    #[arg(long)]
    pub tau: Option<f64>,
    /// piMOM Normal-envelope dispersion; 2·tau when omitted.
    #[arg(long)]
    pub tau_n: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_A_PHI)]
    pub a_phi: f64,
    #[arg(long, default_value_t = DEFAULT_B_PHI)]
    pub b_phi: f64,
}

impl PriorArgs {
    pub fn spec(&self) -> CliResult<PriorSpec> {
        let family = Family::from(self.family);
        let mut spec = PriorSpec::new(family, self.tau.unwrap_or(default_tau(family)))?;
        if let Some(t) = self.tau_n {
            spec = spec.with_tau_n(t)?;
        }
        Ok(spec.with_phi_prior(self.a_phi, self.b_phi)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPriorArg {
    BetaBinomial,
    Uniform,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// CSV with a header; first column response, remaining columns predictors.
    #[arg(long)]
    pub data: PathBuf,
    /// Fit on the raw scale without centering or scaling.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Model-search sweeps.
    #[arg(long, default_value_t = 1_000)]
    pub sweeps: usize,
    /// Kept Gibbs draws for model averaging.
    #[arg(long, default_value_t = 1_000)]
    pub iterations: usize,
    /// Burn-in draws per sampled model.
    #[arg(long, default_value_t = 100)]
    pub burn: usize,
    /// Monte Carlo samples per marginal likelihood.
    #[arg(long, default_value_t = 1_000)]
    pub mc_samples: usize,
    #[arg(long, value_enum, default_value = "beta-binomial")]
    pub model_prior: ModelPriorArg,
    /// Average over the K most visited models instead of sampling models.
    #[arg(long, conflicts_with = "sampled")]
    pub top_k: Option<usize>,
    /// Sample models in proportion to visit frequency (default).
    #[arg(long)]
    pub sampled: bool,
    /// Number of top models listed in the report.
    #[arg(long, default_value_t = 10)]
    pub report_models: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub phi: f64,
    /// Comma-separated coefficients; five increasing signals then zeros when omitted.
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    SimSmall,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum, conflicts_with_all = ["n", "p", "rho", "replicates"])]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated subset of pmom, pimom, pemom, ridge, ols-oracle.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long, default_value_t = 200)]
    pub sweeps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PriorSampleArgs {
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Number of draws.
    #[arg(short = 'n', long = "draws", default_value_t = 10_000)]
    pub draws: usize,
    /// Dimension of each draw.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 1.0)]
    pub phi: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MarglikArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Comma-separated predictor names or 1-based positions; empty for the null model.
    #[arg(long, default_value = "", value_delimiter = ',')]
    pub model: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub mc_samples: usize,
}

/// Parses arguments, runs the subcommand, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("nlpbma: {e}");
            e.exit_code()
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    seed_source: &'static str,
    threads: Option<usize>,
    command: &'a Command,
    outputs: Vec<String>,
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let (seed, seed_source) = match cli.seed {
        Some(s) => (s, "explicit"),
        None => (rand::random::<u64>(), "generated"),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
    let outputs = pool.install(|| match &cli.command {
        Command::Fit(a) => cmd_fit(a, seed, &cli.out),
        Command::Simulate(a) => cmd_simulate(a, seed, &cli.out),
        Command::Benchmark(a) => cmd_benchmark(a, seed, &cli.out),
        Command::PriorSample(a) => cmd_prior_sample(a, seed, &cli.out),
        Command::Marglik(a) => cmd_marglik(a, seed, &cli.out),
    })?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        seed_source,
        threads: cli.threads,
        command: &cli.command,
        outputs,
    };
    write_json(&cli.out.join("manifest.json"), &manifest)?;
    info!("wrote {}", cli.out.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

/// Data read from CSV, with the standardization that was applied.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub response: String,
    pub names: Vec<String>,
    pub data: Dataset,
    pub scaling: Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scaling {
    pub standardized: bool,
    pub y_mean: f64,
    pub y_sd: f64,
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
}

impl Scaling {
    /// Coefficients and intercept on the original scale.
    pub fn to_original(&self, theta: &[f64]) -> (Vec<f64>, f64) {
        let beta: Vec<f64> = theta
            .iter()
            .zip(&self.x_sd)
            .map(|(t, s)| t * self.y_sd / s)
            .collect();
        let intercept = self.y_mean - beta.iter().zip(&self.x_mean).map(|(b, m)| b * m).sum::<f64>();
        (beta, intercept)
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

pub fn read_csv(path: &Path, standardize: bool) -> CliResult<LoadedData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(CliError::Input(format!("{}: missing header", path.display())));
    }
    let width = header.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(CliError::Input(format!(
                "{} line {line}: expected {width} fields, found {}",
                path.display(),
                rec.len()
            )));
        }
        let mut row = Vec::with_capacity(width);
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Input(format!(
                    "{} line {line}, column '{}': cannot parse '{cell}' as a number",
                    path.display(),
                    header[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "{} line {line}, column '{}': non-finite value",
                    path.display(),
                    header[c]
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    let n = rows.len();
    if n < 2 {
        return Err(CliError::Input(format!("{}: need at least 2 data rows", path.display())));
    }
    let p = width - 1;
    let mut y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut cols: Vec<Vec<f64>> = (1..width).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
    let mut scaling = Scaling {
        standardized: standardize,
        y_mean: 0.0,
        y_sd: 1.0,
        x_mean: vec![0.0; p],
        x_sd: vec![1.0; p],
    };
    if standardize {
        let (m, s) = mean_sd(&y);
        if s == 0.0 {
            return Err(CliError::Input(format!("{}: response is constant", path.display())));
        }
        y.iter_mut().for_each(|v| *v = (*v - m) / s);
        scaling.y_mean = m;
        scaling.y_sd = s;
        for (j, col) in cols.iter_mut().enumerate() {
            let (m, s) = mean_sd(col);
            if s == 0.0 {
                return Err(CliError::Input(format!(
                    "{}: predictor '{}' is constant",
                    path.display(),
                    header[j + 1]
                )));
            }
            col.iter_mut().for_each(|v| *v = (*v - m) / s);
            scaling.x_mean[j] = m;
            scaling.x_sd[j] = s;
        }
    }
    let x = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
    let data = Dataset::new(DVector::from_vec(y), x)?;
    Ok(LoadedData {
        response: header[0].clone(),
        names: header[1..].to_vec(),
        data,
        scaling,
    })
}

#[derive(Debug, Serialize)]
struct ReportModel {
    hex: String,
    variables: Vec<String>,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct ModelDiagnostics {
    variables: Vec<String>,
    weight: f64,
    n_draws: usize,
    mh_acceptance: f64,
    lag1_theta: Vec<f64>,
    lag1_phi: f64,
}

#[derive(Debug, Serialize)]
struct FitReport {
    response: String,
    n: usize,
    p: usize,
    prior: PriorSpec,
    scaling: Scaling,
    sweeps: usize,
    models_visited: usize,
    top_models: Vec<ReportModel>,
    inclusion_probs: Vec<(String, f64)>,
    theta_hat: Vec<(String, f64)>,
    coefficients_original_scale: Vec<(String, f64)>,
    intercept_original_scale: f64,
    phi_hat: f64,
    visited_mass: f64,
    diagnostics: Vec<ModelDiagnostics>,
    warnings: Vec<String>,
}

fn names_of(model: &ModelIndicator, names: &[String]) -> Vec<String> {
    model.indices().into_iter().map(|i| names[i].clone()).collect()
}

fn named(names: &[String], v: &[f64]) -> Vec<(String, f64)> {
    names.iter().cloned().zip(v.iter().copied()).collect()
}

fn cmd_fit(a: &FitArgs, seed: u64, out: &Path) -> CliResult<Vec<String>> {
    let spec = a.prior.spec()?;
    if a.iterations == 0 || a.sweeps == 0 {
        return Err(CliError::Config("--iterations and --sweeps must be positive".into()));
    }
    if a.burn >= a.iterations {
        return Err(CliError::Config("--burn must be smaller than --iterations".into()));
    }
    if a.top_k == Some(0) {
        return Err(CliError::Config("--top-k must be positive".into()));
    }
    let loaded = read_csv(&a.input.data, !a.input.no_standardize)?;
    let data = &loaded.data;
    let report = if data.p() == 0 {
        null_only_report(&loaded, spec, a.sweeps)
    } else {
        let ev = NlpEvidence::new(spec, a.mc_samples, derive_seed(seed, 1));
        let mut search = SearchConfig::new(a.sweeps, derive_seed(seed, 2));
        search.model_prior = match a.model_prior {
            ModelPriorArg::BetaBinomial => ModelPrior::BetaBinomial,
            ModelPriorArg::Uniform => ModelPrior::Uniform,
        };
        let mp = gibbs_model_search(data, &ev, &search, &MarginalCache::new())?;
        let mut bcfg = BmaConfig::new(derive_seed(seed, 3));
        bcfg.draws_per_model = a.iterations;
        bcfg.burn_fraction = a.burn as f64 / a.iterations as f64;
        if let Some(k) = a.top_k {
            bcfg.mode = BmaMode::TopK(k);
        }
        let est = bma_posterior_mean(&mp, data, &spec, &bcfg)?;
        let (beta, intercept) = loaded.scaling.to_original(&est.theta_hat);
        FitReport {
            response: loaded.response.clone(),
            n: data.n(),
            p: data.p(),
            prior: spec,
            scaling: loaded.scaling.clone(),
            sweeps: a.sweeps,
            models_visited: mp.n_visited(),
            top_models: posterior_model_probs(&mp, Some(a.report_models))
                .into_iter()
                .map(|(m, w)| ReportModel {
                    hex: m.to_hex(),
                    variables: names_of(&m, &loaded.names),
                    probability: w,
                })
                .collect(),
            inclusion_probs: named(&loaded.names, &est.inclusion_probs),
            theta_hat: named(&loaded.names, &est.theta_hat),
            coefficients_original_scale: named(&loaded.names, &beta),
            intercept_original_scale: intercept,
            phi_hat: est.phi_hat,
            visited_mass: est.visited_mass,
            diagnostics: est
                .models
                .iter()
                .map(|m| ModelDiagnostics {
                    variables: names_of(&m.model, &loaded.names),
                    weight: m.weight,
                    n_draws: m.n_draws,
                    mh_acceptance: m.mh_acceptance,
                    lag1_theta: m.lag1_theta.clone(),
                    lag1_phi: m.lag1_phi,
                })
                .collect(),
            warnings: est.warnings.clone(),
        }
    };
    write_json(&out.join("fit.json"), &report)?;
    let top = report.top_models.first().map_or(String::new(), |m| m.variables.join(","));
    println!("top model [{top}], {} models visited", report.models_visited);
    Ok(vec!["fit.json".into()])
}

fn null_only_report(loaded: &LoadedData, spec: PriorSpec, sweeps: usize) -> FitReport {
    let d = &loaded.data;
    // posterior mean of φ under the empty model
    let phi_hat = (spec.b_phi + d.yty()) / (spec.a_phi + d.n() as f64 - 2.0);
    FitReport {
        response: loaded.response.clone(),
        n: d.n(),
        p: 0,
        prior: spec,
        scaling: loaded.scaling.clone(),
        sweeps,
        models_visited: 1,
        top_models: vec![ReportModel {
            hex: ModelIndicator::empty(0).to_hex(),
            variables: Vec::new(),
            probability: 1.0,
        }],
        inclusion_probs: Vec::new(),
        theta_hat: Vec::new(),
        coefficients_original_scale: Vec::new(),
        intercept_original_scale: loaded.scaling.y_mean,
        phi_hat,
        visited_mass: 1.0,
        diagnostics: Vec::new(),
        warnings: vec!["no predictors: only the null model is possible".into()],
    }
}

fn dataset_csv(data: &Dataset) -> String {
    let mut s = String::from("y");
    for j in 0..data.p() {
        s.push_str(&format!(",x{}", j + 1));
    }
    s.push('\n');
    for i in 0..data.n() {
        s.push_str(&format!("{:e}", data.y()[i]));
        for j in 0..data.p() {
            s.push_str(&format!(",{:e}", data.x()[(i, j)]));
        }
        s.push('\n');
    }
    s
}

fn cmd_simulate(a: &SimulateArgs, seed: u64, out: &Path) -> CliResult<Vec<String>> {
    let mut cfg = SimConfig::sparse(a.n, a.p, a.rho, a.replicate + 1, seed)?;
    cfg.phi_star = a.phi;
    if let Some(t) = &a.theta {
        cfg.theta_star = t.clone();
    }
    cfg.validate()?;
    let data = gen_equicorr_data(&cfg, a.replicate)?;
    write_text(&out.join("data.csv"), &dataset_csv(&data))?;
    write_json(&out.join("truth.json"), &cfg)?;
    println!("simulated n = {}, p = {}", a.n, a.p);
    Ok(vec!["data.csv".into(), "truth.json".into()])
}

fn cmd_benchmark(a: &BenchmarkArgs, seed: u64, out: &Path) -> CliResult<Vec<String>> {
    let base = SimConfig::sim_small(seed);
    let cfg = SimConfig::sparse(
        a.n.unwrap_or(base.n),
        a.p.unwrap_or(base.p),
        a.rho.unwrap_or(base.rho),
        a.replicates.unwrap_or(base.replicates),
        seed,
    )?;
    let methods: Vec<Method> = match &a.methods {
        None => Method::ALL.to_vec(),
        Some(list) => list
            .iter()
            .map(|m| m.parse().map_err(|e: Error| CliError::Config(e.to_string())))
            .collect::<CliResult<_>>()?,
    };
    if a.sweeps == 0 {
        return Err(CliError::Config("--sweeps must be positive".into()));
    }
    let settings = FitSettings {
        search_sweeps: a.sweeps,
        ..FitSettings::default()
    };
    let report = run_sim_study(&cfg, &methods, &settings)?;
    write_text(&out.join("sse.csv"), &report.to_csv())?;
    write_json(&out.join("sse_summary.json"), &report)?;
    for m in &report.methods {
        println!("{:<11} mean SSE {:.4} (se {:.4})", m.method.to_string(), m.mean_total, m.se_total);
    }
    Ok(vec!["sse.csv".into(), "sse_summary.json".into()])
}

#[derive(Debug, Serialize)]
struct PriorSampleSummary {
    prior: PriorSpec,
    phi: f64,
    draws: usize,
    p: usize,
    threshold: f64,
    empirical_prob_below: f64,
    analytic_prob_below: f64,
}

fn cmd_prior_sample(a: &PriorSampleArgs, seed: u64, out: &Path) -> CliResult<Vec<String>> {
    let spec = a.prior.spec()?;
    if a.draws == 0 || a.p == 0 {
        return Err(CliError::Config("--draws and --p must be positive".into()));
    }
    if !(a.phi > 0.0 && a.phi.is_finite()) {
        return Err(CliError::Config("--phi must be positive".into()));
    }
    let draws: DMatrix<f64> = match spec.family {
        Family::Pmom => {
            if spec.r != 1 {
                return Err(CliError::Config("prior sampling supports r = 1 only".into()));
            }
            sample_pmom_prior(a.p, spec.tau * a.phi, a.draws, seed)?
        }
        _ => {
            let flat = sample_nlp_prior_rejection(&spec, a.phi, a.draws * a.p, seed)?.draws;
            DMatrix::from_row_slice(a.draws, a.p, &flat)
        }
    };
    let mut csv = (1..=a.p).map(|j| format!("theta{j}")).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for row in draws.row_iter() {
        csv.push_str(&row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    write_text(&out.join("prior_draws.csv"), &csv)?;
    let threshold = 0.2 * a.phi.sqrt();
    let below = draws.iter().filter(|v| v.abs() < threshold).count();
    let summary = PriorSampleSummary {
        prior: spec,
        phi: a.phi,
        draws: a.draws,
        p: a.p,
        threshold,
        empirical_prob_below: below as f64 / draws.len() as f64,
        analytic_prob_below: prob_below_threshold(&spec, threshold, a.phi)?,
    };
    write_json(&out.join("prior_summary.json"), &summary)?;
    println!(
        "P(|theta| < {threshold:.3}): sample {:.5}, analytic {:.5}",
        summary.empirical_prob_below, summary.analytic_prob_below
    );
    Ok(vec!["prior_draws.csv".into(), "prior_summary.json".into()])
}

#[derive(Debug, Serialize)]
struct MarglikReport {
    model: Vec<String>,
    prior: PriorSpec,
    scaling: Scaling,
    log_marginal_local: f64,
    log_g: f64,
    g_factor: f64,
    log_marginal: f64,
    mc_se: f64,
    mc_samples: usize,
    ess: Option<f64>,
    warnings: Vec<String>,
}

fn resolve_model(tokens: &[String], names: &[String]) -> CliResult<ModelIndicator> {
    let mut idx = Vec::new();
    for t in tokens.iter().map(|t| t.trim()).filter(|t| !t.is_empty()) {
        let i = if let Some(i) = names.iter().position(|n| n == t) {
            i
        } else {
            match t.parse::<usize>() {
                Ok(k) if (1..=names.len()).contains(&k) => k - 1,
                _ => return Err(CliError::Config(format!("unknown predictor '{t}'"))),
            }
        };
        idx.push(i);
    }
    idx.sort_unstable();
    idx.dedup();
    Ok(ModelIndicator::from_indices(names.len(), &idx)?)
}

fn cmd_marglik(a: &MarglikArgs, seed: u64, out: &Path) -> CliResult<Vec<String>> {
    let spec = a.prior.spec()?;
    let loaded = read_csv(&a.input.data, !a.input.no_standardize)?;
    let model = resolve_model(&a.model, &loaded.names)?;
    let local = log_marginal_normal_ig(&loaded.data, &model, spec.kernel_dispersion(), spec.a_phi, spec.b_phi)?;
    let g = g_factor(&loaded.data, &model, &spec, a.mc_samples, seed)?;
    let report = MarglikReport {
        model: names_of(&model, &loaded.names),
        prior: spec,
        scaling: loaded.scaling.clone(),
        log_marginal_local: local.value,
        log_g: g.value,
        g_factor: g.value.exp(),
        log_marginal: local.value + g.value,
        mc_se: g.mc_se,
        mc_samples: g.n_samples,
        ess: g.ess,
        warnings: g.warnings,
    };
    write_json(&out.join("marglik.json"), &report)?;
    println!("log m = {:.6} (log g = {:.6}, se {:.2e})", report.log_marginal, report.log_g, report.mc_se);
    Ok(vec!["marglik.json".into()])
}
