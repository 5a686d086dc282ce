//! Command-line front end: `experiment`, `curves` and `estimate`.
//!
//! Run configs are TOML documents with one section per concern; unknown keys
//! are rejected and every numeric field goes through
//! [`ExperimentConfig::validate`].

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::criteria::{self, SigmaMode};
use crate::ensembles::{NoiseProfile, SpikeConfig};
use crate::montecarlo::{run_experiment, Estimator, ExperimentConfig, Scenario, SummaryTable};
use crate::spectral::{self, eigenvalues_desc, lambda_threshold, psi};
use crate::{Error, Matrix};

/// Environment variable consulted when `--threads` is not given.
pub const THREADS_ENV: &str = "SPIKESEL_THREADS";

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "spikesel", version, about = "Rank selection for spiked Wigner matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo experiment described by a config file.
    Experiment(ExperimentArgs),
    /// Emit psi_sigma(x) and lambda_gamma sample points as CSV.
    Curves(CurvesArgs),
    /// Estimate the number of spikes of one matrix read from a file.
    Estimate(EstimateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Table,
    Csv,
    JsonLines,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override `experiment.master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override `experiment.replications`.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the effective config (after overrides) and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub x_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub x_step: f64,
    #[arg(long, default_value_t = 2.0)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 6.0)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub gamma_step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value = "AIC")]
    pub estimator: String,
    #[arg(long, default_value = "S1")]
    pub scenario: String,
    /// Oracle noise level, required for S1.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Largest candidate rank; defaults to min(20, N - 1).
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, default_value_t = 2.15)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta_coefficient: f64,
    #[arg(long, default_value_t = 5.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a subcommand, mapped onto the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{failed} cell(s) recorded failures")]
    PartialFailure { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_FAILURE,
            CliError::PartialFailure { .. } => EXIT_PARTIAL,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => CliError::Config(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// config file

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub experiment: ExperimentSection,
    pub spikes: SpikeConfig,
    #[serde(default)]
    pub criteria: CriteriaSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub profile: NoiseProfile,
    pub n: usize,
    pub q: usize,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default = "all_scenarios")]
    pub scenarios: Vec<Scenario>,
    #[serde(default = "all_estimators")]
    pub estimators: Vec<Estimator>,
}

fn all_scenarios() -> Vec<Scenario> {
    Scenario::ALL.to_vec()
}

fn all_estimators() -> Vec<Estimator> {
    Estimator::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriteriaSection {
    pub gamma: f64,
    pub delta_coefficient: f64,
    pub b: f64,
    pub alpha: f64,
}

impl Default for CriteriaSection {
    fn default() -> Self {
        CriteriaSection {
            gamma: 2.15,
            delta_coefficient: 0.1,
            b: 5.0,
            alpha: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            format: OutputFormat::Table,
            path: None,
        }
    }
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: RunConfigFile =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        file.experiment_config().validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_experiment(config: &ExperimentConfig, output: OutputSection) -> Self {
        RunConfigFile {
            experiment: ExperimentSection {
                profile: config.profile,
                n: config.n,
                q: config.q,
                replications: config.replications,
                master_seed: config.master_seed,
                scenarios: config.scenarios.clone(),
                estimators: config.estimators.clone(),
            },
            spikes: config.spikes.clone(),
            criteria: CriteriaSection {
                gamma: config.gamma,
                delta_coefficient: config.delta_coefficient,
                b: config.b,
                alpha: config.alpha,
            },
            output,
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            spikes: self.spikes.clone(),
            profile: self.experiment.profile,
            n: self.experiment.n,
            q: self.experiment.q,
            gamma: self.criteria.gamma,
            delta_coefficient: self.criteria.delta_coefficient,
            b: self.criteria.b,
            alpha: self.criteria.alpha,
            scenarios: self.experiment.scenarios.clone(),
            estimators: self.experiment.estimators.clone(),
            replications: self.experiment.replications,
            master_seed: self.experiment.master_seed,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

// ---------------------------------------------------------------------------
// number formatting and table rendering

/// `%.6g`-style formatting: six significant digits, trailing zeros removed.
pub fn fmt_sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // round first so that e.g. 999999.5 moves to the next decade
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn round2(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.2}"),
        None => "n/a".into(),
    }
}

fn caption(table: &SummaryTable) -> Vec<String> {
    let c = &table.config;
    let lambdas: Vec<String> = c.spikes.lambdas.iter().map(|&l| fmt_sig6(l)).collect();
    vec![
        format!(
            "profile = {}, k = {}, lambdas = ({}), sigma^2 = {}",
            c.profile,
            c.spikes.k(),
            lambdas.join(", "),
            fmt_sig6(c.spikes.sigma * c.spikes.sigma)
        ),
        format!(
            "N = {}, q = {}, replications = {}, master_seed = {}",
            c.n, c.q, c.replications, c.master_seed
        ),
        format!(
            "gamma = {}, lambda_gamma = {}",
            fmt_sig6(c.gamma),
            round2(c.lambda_gamma())
        ),
        format!(
            "delta_N = {}/sqrt(N), lambda_2+delta_N = {}",
            fmt_sig6(c.delta_coefficient),
            round2(c.lambda_delta())
        ),
        format!("B = {}, alpha = {}", fmt_sig6(c.b), fmt_sig6(c.alpha)),
    ]
}

fn status(row: &crate::montecarlo::SummaryRow) -> &'static str {
    match (row.replications, row.failures) {
        (_, 0) => "ok",
        (0, _) => "FAILED",
        _ => "PARTIAL",
    }
}

pub fn render_csv(table: &SummaryTable) -> String {
    let mut out = String::new();
    for line in caption(table) {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("estimator,scenario,mean,sd,pcs,pcs_se,replications,failures,status\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.estimator,
            r.scenario,
            fmt_sig6(r.mean),
            fmt_sig6(r.sd),
            fmt_sig6(r.pcs),
            fmt_sig6(r.pcs_se),
            r.replications,
            r.failures,
            status(r)
        );
    }
    out
}

pub fn render_table(table: &SummaryTable) -> String {
    let mut out = String::new();
    for line in caption(table) {
        let _ = writeln!(out, "{line}");
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<11} {:<8} {:>7} {:>7} {:>6} {:>7}  status",
        "estimator", "scenario", "mean", "sd", "PCS", "(se)"
    );
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{:<11} {:<8} {:>7.2} {:>7.2} {:>6.2} {:>7.3}  {}",
            r.estimator.as_str(),
            r.scenario.as_str(),
            r.mean,
            r.sd,
            r.pcs,
            r.pcs_se,
            status(r)
        );
        if let Some(msg) = &r.first_failure {
            let _ = writeln!(out, "    ! {} failure(s), first: {msg}", r.failures);
        }
    }
    out
}

pub fn render_json_lines(table: &SummaryTable) -> String {
    let c = &table.config;
    let header = serde_json::json!({
        "profile": c.profile,
        "n": c.n,
        "q": c.q,
        "k": c.spikes.k(),
        "lambdas": c.spikes.lambdas,
        "sigma": c.spikes.sigma,
        "gamma": c.gamma,
        "delta_coefficient": c.delta_coefficient,
        "b": c.b,
        "alpha": c.alpha,
        "replications": c.replications,
        "master_seed": c.master_seed,
        "lambda_gamma": c.lambda_gamma(),
        "lambda_delta": c.lambda_delta(),
    });
    let mut out = serde_json::to_string(&serde_json::json!({ "header": header }))
        .expect("header serialises");
    out.push('\n');
    for r in &table.rows {
        out.push_str(&serde_json::to_string(r).expect("row serialises"));
        out.push('\n');
    }
    out
}

pub fn render(table: &SummaryTable, format: OutputFormat) -> String {
    match format {
        OutputFormat::Table => render_table(table),
        OutputFormat::Csv => render_csv(table),
        OutputFormat::JsonLines => render_json_lines(table),
    }
}

// ---------------------------------------------------------------------------
// matrix files

/// Reads `N` on the first line, then `N` rows of `N` whitespace-separated
/// decimals, and checks symmetry.
pub fn read_matrix(text: &str) -> Result<Matrix, CliError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| CliError::Input("matrix file is empty".into()))?;
    let n: usize = first
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("line 1: expected the dimension, got {first:?}")))?;
    if n == 0 {
        return Err(CliError::Input("line 1: dimension must be positive".into()));
    }
    let mut m = Matrix::zeros(n, n);
    for row in 0..n {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| CliError::Input(format!("expected {n} rows, found {row}")))?;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != n {
            return Err(CliError::Input(format!(
                "line {}: expected {n} values, found {}",
                lineno + 1,
                values.len()
            )));
        }
        for (col, tok) in values.iter().enumerate() {
            m[(row, col)] = tok.parse().map_err(|_| {
                CliError::Input(format!("line {}: malformed number {tok:?}", lineno + 1))
            })?;
        }
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(CliError::Input(format!(
            "line {}: trailing data after {n} rows",
            lineno + 1
        )));
    }
    spectral::check_symmetric(&m)?;
    Ok(m)
}

pub fn write_matrix<W: Write>(mut w: W, m: &Matrix) -> io::Result<()> {
    writeln!(w, "{}", m.nrows())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// subcommands

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    let mut file = RunConfigFile::load(&args.config)?;
    if let Some(seed) = args.seed {
        file.experiment.master_seed = seed;
    }
    if let Some(r) = args.replications {
        file.experiment.replications = r;
    }
    if let Some(format) = args.format {
        file.output.format = format;
    }
    if let Some(out) = &args.out {
        file.output.path = Some(out.clone());
    }
    let config = file.experiment_config();
    config.validate()?;
    if args.dump_config {
        return emit(args.out.as_deref(), &file.to_toml());
    }
    let table = run_experiment(&config, args.threads.unwrap_or(0))?;
    emit(file.output.path.as_deref(), &render(&table, file.output.format))?;
    let failed = table.rows.iter().filter(|r| r.failures > 0).count();
    if failed > 0 {
        return Err(CliError::PartialFailure { failed });
    }
    Ok(())
}

/// Grid `min, min + step, ...` up to `max` (inclusive within rounding).
fn grid(name: &str, min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0) || !(min <= max) || !min.is_finite() || !max.is_finite() {
        return Err(CliError::Input(format!(
            "{name}: need finite min <= max and step > 0 (got {min}, {max}, {step})"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| min + i as f64 * step).collect())
}

pub fn curves_csv(args: &CurvesArgs) -> Result<String, CliError> {
    let xs = grid("x range", args.x_min, args.x_max, args.x_step)?;
    let gammas = grid("gamma range", args.gamma_min, args.gamma_max, args.gamma_step)?;
    let mut out = String::from("curve,sigma,argument,value\n");
    for x in xs {
        let y = psi(args.sigma, x)
            .map_err(|e| CliError::Input(format!("psi at x = {x}: {e}")))?;
        let _ = writeln!(out, "psi,{},{},{}", fmt_sig6(args.sigma), fmt_sig6(x), fmt_sig6(y));
    }
    for g in gammas {
        let l = lambda_threshold(args.sigma, g)
            .map_err(|e| CliError::Input(format!("lambda_gamma at gamma = {g}: {e}")))?;
        let _ = writeln!(
            out,
            "lambda_gamma,{},{},{}",
            fmt_sig6(args.sigma),
            fmt_sig6(g),
            fmt_sig6(l)
        );
    }
    Ok(out)
}

pub fn cmd_curves(args: &CurvesArgs) -> Result<(), CliError> {
    let text = curves_csv(args)?;
    emit(args.out.as_deref(), &text)
}

/// Selected rank plus the listing printed by `estimate`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub selected: usize,
    pub text: String,
}

pub fn estimate_matrix(x: &Matrix, args: &EstimateArgs) -> Result<EstimateReport, CliError> {
    let estimator: Estimator = args.estimator.parse()?;
    let scenario: Scenario = args.scenario.parse()?;
    let spec = eigenvalues_desc(x)?;
    let n = spec.n();
    let q = args.q.unwrap_or_else(|| 20.min(n.saturating_sub(1)));
    if q >= n {
        return Err(CliError::Input(format!("q = {q} must be smaller than N = {n}")));
    }
    let plug = match scenario {
        Scenario::S1 => {
            let sigma = args
                .sigma
                .ok_or_else(|| CliError::Input("scenario S1 needs --sigma".into()))?;
            if !(sigma > 0.0) {
                return Err(CliError::Input(format!("--sigma must be positive, got {sigma}")));
            }
            Some(sigma * sigma)
        }
        Scenario::S2 => Some(criteria::sigma2_naive(&spec)?),
        Scenario::S3 => Some(criteria::sigma2_trimmed(&spec, args.alpha)?),
        Scenario::S4 => None,
    };
    let mode = plug.map_or(SigmaMode::Unknown, SigmaMode::Known);

    let mut text = String::new();
    let _ = writeln!(
        text,
        "# estimator = {estimator}, scenario = {scenario}, N = {n}, q = {q}"
    );
    if let Some(s2) = plug {
        let _ = writeln!(text, "# sigma2 = {s2}");
    }
    let selected = match estimator {
        Estimator::Aic | Estimator::GaicDelta | Estimator::GaicGamma | Estimator::Saic => {
            let gamma = match estimator {
                Estimator::GaicDelta => criteria::gamma_delta(n, args.delta_coefficient),
                Estimator::GaicGamma => args.gamma,
                _ => 2.0,
            };
            let scores = criteria::gaic_scores(&spec, gamma, mode, q)?;
            let _ = writeln!(text, "# gamma = {gamma}");
            let selected = if estimator == Estimator::Saic {
                let s2_hat = match plug {
                    Some(s2) => s2,
                    None => criteria::sigma2_trimmed(&spec, args.alpha)?,
                };
                let xi = criteria::xi_hat(&spec, q, args.b, s2_hat)?;
                let _ = writeln!(text, "# xi_hat = {xi}");
                criteria::soft_aic(&spec, q, args.b, s2_hat, mode)?
            } else {
                scores.argmin()
            };
            text.push_str("j,score\n");
            for (j, s) in scores.scores().iter().enumerate() {
                let _ = writeln!(text, "{j},{s}");
            }
            selected
        }
        Estimator::Scree => {
            let s2 = plug.ok_or_else(|| CliError::Input("SCREE is not defined for S4".into()))?;
            let sigma = s2.sqrt();
            text.push_str("j,ratio\n");
            for j in 1..=q {
                let _ = writeln!(text, "{j},{}", spec.ell(j) / (2.0 * sigma));
            }
            criteria::scree(&spec, q, sigma)?
        }
    };
    let _ = writeln!(text, "selected,{selected}");
    Ok(EstimateReport { selected, text })
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.matrix).map_err(|e| {
        CliError::Input(format!("cannot read {}: {e}", args.matrix.display()))
    })?;
    let x = read_matrix(&text)?;
    let report = estimate_matrix(&x, args)?;
    emit(args.out.as_deref(), &report.text)
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> u8 {
    let result = match &cli.command {
        Command::Experiment(a) => cmd_experiment(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Estimate(a) => cmd_estimate(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("spikesel: {e}");
            e.exit_code()
        }
    }
}
