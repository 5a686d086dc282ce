//! Reproducible replication harness.
//!
//! Replication `i` draws its observation from the ChaCha20 stream `i` keyed
//! by the master seed, so every replication is a pure function of
//! `(config, i)`. Replications run on a rayon pool and are folded in index
//! order, which makes the summary independent of the worker count.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{self, SigmaMode};
use crate::ensembles::{assemble_observation, NoiseProfile, SpikeConfig};
use crate::spectral::{lambda_threshold, DenseEigenSolver, EigenSolver, Spectrum};
use crate::{Error, Result};

/// Rank estimators compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "AIC")]
    Aic,
    #[serde(rename = "GAIC_delta")]
    GaicDelta,
    #[serde(rename = "SAIC")]
    Saic,
    #[serde(rename = "GAIC_gamma")]
    GaicGamma,
    #[serde(rename = "SCREE")]
    Scree,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Aic,
        Estimator::GaicDelta,
        Estimator::Saic,
        Estimator::GaicGamma,
        Estimator::Scree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Aic => "AIC",
            Estimator::GaicDelta => "GAIC_delta",
            Estimator::Saic => "SAIC",
            Estimator::GaicGamma => "GAIC_gamma",
            Estimator::Scree => "SCREE",
        }
    }

    /// Whether the estimator is built on likelihood scores (and so can run
    /// with unknown `sigma`).
    pub fn is_aic_type(self) -> bool {
        self != Estimator::Scree
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_uppercase().replace('-', "_");
        Estimator::ALL
            .into_iter()
            .find(|e| e.as_str().to_ascii_uppercase() == norm)
            .ok_or_else(|| Error::config("estimator", format!("unknown estimator {s:?}")))
    }
}

/// How `sigma` is supplied to the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Oracle `sigma^2`.
    S1,
    /// Plug-in `||X||_F^2 / (N + 1)`.
    S2,
    /// Plug-in trimmed estimate.
    S3,
    /// Unknown-`sigma` likelihood scores (AIC-type estimators only).
    S4,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
            Scenario::S4 => "S4",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_uppercase().replace('-', "");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == norm)
            .ok_or_else(|| Error::config("scenario", format!("unknown scenario {s:?}")))
    }
}

/// Everything needed to reproduce one table of replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spikes: SpikeConfig,
    pub profile: NoiseProfile,
    pub n: usize,
    pub q: usize,
    pub gamma: f64,
    /// `c` in `delta_N = c / sqrt(N)`.
    pub delta_coefficient: f64,
    /// A priori bound on `xi_1 / xi_k` for the soft-AIC threshold.
    pub b: f64,
    /// Trimming fraction of the trimmed `sigma^2` estimator.
    pub alpha: f64,
    pub scenarios: Vec<Scenario>,
    pub estimators: Vec<Estimator>,
    pub replications: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// `N = 1000`, `q = 20`, `gamma = 2.15`, `c = 0.1`, `B = 5`,
    /// `alpha = 0.1`, 100 replications, every estimator and scenario.
    pub fn standard(spikes: SpikeConfig, profile: NoiseProfile) -> Self {
        ExperimentConfig {
            spikes,
            profile,
            n: 1000,
            q: 20,
            gamma: 2.15,
            delta_coefficient: 0.1,
            b: 5.0,
            alpha: 0.1,
            scenarios: Scenario::ALL.to_vec(),
            estimators: Estimator::ALL.to_vec(),
            replications: 100,
            master_seed: 2024,
        }
    }

    /// Weak spikes `(5, 1.5, 1.2, 1.1)`, `sigma = 1`.
    pub fn weak_spikes(profile: NoiseProfile) -> Self {
        Self::standard(
            SpikeConfig::new(vec![5.0, 1.5, 1.2, 1.1], 1.0).expect("valid spikes"),
            profile,
        )
    }

    /// Strong spikes `(10, 3, 1.5, 1.5)`, `sigma = 1`.
    pub fn strong_spikes(profile: NoiseProfile) -> Self {
        Self::standard(
            SpikeConfig::new(vec![10.0, 3.0, 1.5, 1.5], 1.0).expect("valid spikes"),
            profile,
        )
    }

    /// Checks every field; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        self.spikes
            .validate()
            .map_err(|e| Error::config("spikes", e.to_string()))?;
        if !(self.spikes.sigma > 0.0) {
            return Err(Error::config("spikes.sigma", "must be positive"));
        }
        if self.n < 2 {
            return Err(Error::config("experiment.n", "must be at least 2"));
        }
        if self.spikes.k() > self.n {
            return Err(Error::config("spikes.lambdas", "more spikes than the dimension n"));
        }
        if self.q >= self.n {
            return Err(Error::config("experiment.q", "must be smaller than n"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("criteria.gamma", "must be a finite value >= 0"));
        }
        if !self.delta_coefficient.is_finite() || self.gamma_delta() < 0.0 {
            return Err(Error::config(
                "criteria.delta_coefficient",
                "must be finite with 2 + c / sqrt(n) >= 0",
            ));
        }
        if !(self.b >= 1.0 && self.b.is_finite()) {
            return Err(Error::config("criteria.b", "must be a finite value >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::config("criteria.alpha", "must lie in (0, 1/2)"));
        }
        if (self.alpha * self.n as f64).floor() < 1.0 {
            return Err(Error::config(
                "criteria.alpha",
                "floor(alpha * n) must be at least 1",
            ));
        }
        if self.replications == 0 {
            return Err(Error::config("experiment.replications", "must be at least 1"));
        }
        if self.scenarios.is_empty() {
            return Err(Error::config("experiment.scenarios", "must not be empty"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("experiment.estimators", "must not be empty"));
        }
        if has_duplicates(&self.scenarios) {
            return Err(Error::config("experiment.scenarios", "contains duplicates"));
        }
        if has_duplicates(&self.estimators) {
            return Err(Error::config("experiment.estimators", "contains duplicates"));
        }
        if self.cells().is_empty() {
            return Err(Error::config(
                "experiment.estimators",
                "SCREE cannot run in S4 and no other cell was requested",
            ));
        }
        Ok(())
    }

    /// `(estimator, scenario)` cells in output order; SCREE x S4 is skipped.
    pub fn cells(&self) -> Vec<(Estimator, Scenario)> {
        self.estimators
            .iter()
            .flat_map(|&e| self.scenarios.iter().map(move |&s| (e, s)))
            .filter(|&(e, s)| e.is_aic_type() || s != Scenario::S4)
            .collect()
    }

    /// `2 + c / sqrt(N)`.
    pub fn gamma_delta(&self) -> f64 {
        criteria::gamma_delta(self.n, self.delta_coefficient)
    }

    /// Detection threshold of `GAIC_gamma`; `None` when `gamma < 2`.
    pub fn lambda_gamma(&self) -> Option<f64> {
        lambda_threshold(self.spikes.sigma, self.gamma).ok()
    }

    /// Detection threshold of `GAIC_{2 + delta_N}`; `None` when `c < 0`.
    pub fn lambda_delta(&self) -> Option<f64> {
        lambda_threshold(self.spikes.sigma, self.gamma_delta()).ok()
    }
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    items
        .iter()
        .enumerate()
        .any(|(i, a)| items[..i].contains(a))
}

/// Position in the counter-based random stream family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Substream {
    pub master: u64,
    pub index: u64,
}

impl Substream {
    /// ChaCha20 keyed by the master seed, on stream `index`, at word 0.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }
}

pub fn derive_seed(master: u64, index: u64) -> Substream {
    Substream { master, index }
}

/// Selected rank (or the failure) for one cell of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub estimator: Estimator,
    pub scenario: Scenario,
    pub selected: Result<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub cells: Vec<CellOutcome>,
}

impl ReplicationOutcome {
    pub fn get(&self, estimator: Estimator, scenario: Scenario) -> Option<&Result<usize>> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.scenario == scenario)
            .map(|c| &c.selected)
    }
}

/// Plug-in `sigma^2` values shared by every cell of a replication.
struct Plugins {
    oracle: f64,
    naive: Result<f64>,
    trimmed: Result<f64>,
}

impl Plugins {
    fn new(config: &ExperimentConfig, spec: &Spectrum) -> Self {
        Plugins {
            oracle: config.spikes.sigma * config.spikes.sigma,
            naive: criteria::sigma2_naive(spec),
            trimmed: criteria::sigma2_trimmed(spec, config.alpha),
        }
    }

    fn sigma2(&self, scenario: Scenario) -> Result<Option<f64>> {
        match scenario {
            Scenario::S1 => Ok(Some(self.oracle)),
            Scenario::S2 => self.naive.clone().map(Some),
            Scenario::S3 => self.trimmed.clone().map(Some),
            Scenario::S4 => Ok(None),
        }
    }
}

fn evaluate_cell(
    config: &ExperimentConfig,
    spec: &Spectrum,
    plugins: &Plugins,
    estimator: Estimator,
    scenario: Scenario,
) -> Result<usize> {
    let plug = plugins.sigma2(scenario)?;
    let mode = match plug {
        Some(s2) => SigmaMode::Known(s2),
        None => SigmaMode::Unknown,
    };
    let q = config.q;
    match estimator {
        Estimator::Aic => criteria::khat_gamma(spec, 2.0, mode, q),
        Estimator::GaicDelta => criteria::khat_gamma(spec, config.gamma_delta(), mode, q),
        Estimator::GaicGamma => criteria::khat_gamma(spec, config.gamma, mode, q),
        Estimator::Saic => {
            // with unknown sigma the threshold still needs a consistent estimate
            let s2_hat = match plug {
                Some(s2) => s2,
                None => plugins.trimmed.clone()?,
            };
            criteria::soft_aic(spec, q, config.b, s2_hat, mode)
        }
        Estimator::Scree => match plug {
            Some(s2) => criteria::scree(spec, q, s2.sqrt()),
            None => Err(Error::config("scenario", "SCREE is not defined for S4")),
        },
    }
}

/// Evaluates every requested cell on a single spectrum.
pub fn evaluate_spectrum(config: &ExperimentConfig, spec: &Spectrum) -> Vec<CellOutcome> {
    let plugins = Plugins::new(config, spec);
    config
        .cells()
        .into_iter()
        .map(|(estimator, scenario)| CellOutcome {
            estimator,
            scenario,
            selected: evaluate_cell(config, spec, &plugins, estimator, scenario),
        })
        .collect()
}

/// Replication `index` with the default dense eigensolver.
pub fn run_replication(config: &ExperimentConfig, index: usize) -> Result<ReplicationOutcome> {
    run_replication_with(config, index, &DenseEigenSolver)
}

/// One observation, one eigensolve, every cell. Sampling or solver failures
/// are recorded against every cell rather than returned.
pub fn run_replication_with<S: EigenSolver>(
    config: &ExperimentConfig,
    index: usize,
    solver: &S,
) -> Result<ReplicationOutcome> {
    config.validate()?;
    if index >= config.replications {
        return Err(Error::IndexOutOfRange {
            index,
            len: config.replications,
        });
    }
    Ok(replicate(config, index, solver))
}

fn replicate<S: EigenSolver>(config: &ExperimentConfig, index: usize, solver: &S) -> ReplicationOutcome {
    let mut rng = derive_seed(config.master_seed, index as u64).rng();
    let spectrum = assemble_observation(&config.spikes, config.profile, config.n, &mut rng)
        .and_then(|x| solver.eigenvalues_desc(&x));
    let cells = match spectrum {
        Ok(spec) => evaluate_spectrum(config, &spec),
        Err(err) => config
            .cells()
            .into_iter()
            .map(|(estimator, scenario)| CellOutcome {
                estimator,
                scenario,
                selected: Err(err.clone()),
            })
            .collect(),
    };
    ReplicationOutcome { index, cells }
}

/// Aggregate for one `(estimator, scenario)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub scenario: Scenario,
    /// Average selected rank.
    pub mean: f64,
    /// Sample standard deviation (denominator `R - 1`; 0 when `R = 1`).
    pub sd: f64,
    /// Fraction of replications selecting the true rank.
    pub pcs: f64,
    /// Binomial standard error `sqrt(pcs (1 - pcs) / R)`.
    pub pcs_se: f64,
    /// Replications that produced a rank.
    pub replications: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

impl SummaryRow {
    fn from_selections(
        estimator: Estimator,
        scenario: Scenario,
        selected: &[usize],
        failures: usize,
        first_failure: Option<String>,
        true_k: usize,
    ) -> Self {
        let r = selected.len();
        let (mean, sd, pcs, pcs_se) = if r == 0 {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let rf = r as f64;
            let mean = selected.iter().map(|&k| k as f64).sum::<f64>() / rf;
            let sd = if r > 1 {
                let ss: f64 = selected.iter().map(|&k| (k as f64 - mean).powi(2)).sum();
                (ss / (rf - 1.0)).sqrt()
            } else {
                0.0
            };
            let pcs = selected.iter().filter(|&&k| k == true_k).count() as f64 / rf;
            (mean, sd, pcs, (pcs * (1.0 - pcs) / rf).sqrt())
        };
        SummaryRow {
            estimator,
            scenario,
            mean,
            sd,
            pcs,
            pcs_se,
            replications: r,
            failures,
            first_failure,
        }
    }
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub config: ExperimentConfig,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn row(&self, estimator: Estimator, scenario: Scenario) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.scenario == scenario)
    }

    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| r.failures > 0)
    }

    /// Folds replication outcomes, which must be in index order.
    pub fn aggregate(config: &ExperimentConfig, outcomes: &[ReplicationOutcome]) -> Self {
        let true_k = config.spikes.k();
        let rows = config
            .cells()
            .into_iter()
            .enumerate()
            .map(|(c, (estimator, scenario))| {
                let mut selected = Vec::with_capacity(outcomes.len());
                let mut failures = 0;
                let mut first_failure = None;
                for outcome in outcomes {
                    match &outcome.cells[c].selected {
                        Ok(k) => selected.push(*k),
                        Err(e) => {
                            failures += 1;
                            first_failure.get_or_insert_with(|| {
                                format!("replication {}: {e}", outcome.index)
                            });
                        }
                    }
                }
                SummaryRow::from_selections(
                    estimator,
                    scenario,
                    &selected,
                    failures,
                    first_failure,
                    true_k,
                )
            })
            .collect();
        SummaryTable {
            config: config.clone(),
            rows,
        }
    }
}

/// Runs every replication and aggregates. `threads = 0` uses rayon's
/// default pool size.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<SummaryTable> {
    run_experiment_with(config, threads, &DenseEigenSolver)
}

pub fn run_experiment_with<S: EigenSolver>(
    config: &ExperimentConfig,
    threads: usize,
    solver: &S,
) -> Result<SummaryTable> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let outcomes: Vec<ReplicationOutcome> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|i| replicate(config, i, solver))
            .collect()
    });
    Ok(SummaryTable::aggregate(config, &outcomes))
}
