//! Seeded Monte Carlo experiments comparing the classic, oracle-trimmed and
//! adaptive trimmed Hill estimators.
//!
//! Replication `i` draws its sample from stream `(master_seed, i)` and its
//! contamination from a derived stream, so every replication is reproducible
//! on its own. Replications run in parallel but are collected in index order
//! and aggregated sequentially, which makes reports independent of the
//! number of worker threads.

pub mod kstar;
pub mod metrics;
pub mod store;
pub mod suites;

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, TailError};
use crate::estimators::trimmed_hill;
use crate::ewst::{select_k0, EwstConfig};
use crate::kselect::{joint_select, KSelectConfig};
use crate::models::{contaminate, ContaminationSpec, ModelSpec};
use crate::numeric::{covariance, mean, variance};
use crate::sample::OrderedSample;
use crate::seed::SeedSpec;

pub use kstar::{kstar_search, oracle_k_star, KStarCache, KStarKey, KStarSearch};
pub use metrics::{rb_rrmse, ErrorSummary, Estimate};
pub use suites::{table_suite, Scale, SuiteName, SuiteReport};

/// Replications per parallel work item.
pub(crate) const BATCH: usize = 64;

/// Tag of the contamination stream derived from a replication seed.
const CONTAMINATION_TAG: u64 = 1;

/// Smallest accepted replication count.
pub const MIN_REPLICATIONS: usize = 100;

/// Draws replication `seed`: a clean sample, then the optional contamination.
pub fn draw_replication(
    model: &ModelSpec,
    contamination: Option<&ContaminationSpec>,
    n: usize,
    seed: SeedSpec,
) -> Result<OrderedSample> {
    let clean = model.sample(n, seed)?;
    match contamination {
        Some(spec) => contaminate(&clean, spec, seed.derive(CONTAMINATION_TAG)),
        None => Ok(clean),
    }
}

/// Hex SHA-256 of a value's JSON encoding, truncated to 16 characters.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configs serialize");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum EstimatorSpec {
    /// Classic Hill at the reference `k`.
    ClassicHill,
    /// Trimmed Hill at the reference `k` and the true number of outliers.
    TrimmedOracle,
    /// Trimmed Hill at the reference `k` and a fixed `k0`.
    Trimmed { k0: usize },
    /// EWST-selected `k0` at the reference `k`.
    AdaptiveEwst,
    /// Joint selection of `(k0, k)`.
    JointAdaptive,
}

impl EstimatorSpec {
    pub fn is_adaptive(&self) -> bool {
        matches!(self, EstimatorSpec::AdaptiveEwst | EstimatorSpec::JointAdaptive)
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::ClassicHill => write!(f, "hill"),
            EstimatorSpec::TrimmedOracle => write!(f, "trimmed_oracle"),
            EstimatorSpec::Trimmed { k0 } => write!(f, "trimmed(k0={k0})"),
            EstimatorSpec::AdaptiveEwst => write!(f, "adaptive_ewst"),
            EstimatorSpec::JointAdaptive => write!(f, "joint_adaptive"),
        }
    }
}

/// How the reference `k` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum KPolicy {
    Fixed { k: usize },
    /// Monte Carlo MSE-optimal `k` at the true number of outliers.
    OracleKStar,
    /// Reference estimators at the oracle `k`; EWST estimators select `k`
    /// jointly with `k0`.
    JointSelect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelSpec,
    pub contamination: Option<ContaminationSpec>,
    pub n: usize,
    pub estimators: Vec<EstimatorSpec>,
    pub replications: usize,
    pub master_seed: u64,
    pub k_policy: KPolicy,
    #[serde(default)]
    pub ewst: EwstConfig,
    #[serde(default)]
    pub kselect: KSelectConfig,
    /// Replications for the k* search; defaults to four times `replications`.
    #[serde(default)]
    pub kstar_replications: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(name: impl Into<String>, model: ModelSpec, n: usize, k_policy: KPolicy) -> Self {
        Self {
            name: name.into(),
            model,
            contamination: None,
            n,
            estimators: vec![EstimatorSpec::ClassicHill, EstimatorSpec::AdaptiveEwst],
            replications: 2000,
            master_seed: 2024,
            k_policy,
            ewst: EwstConfig::default(),
            kselect: KSelectConfig::default(),
            kstar_replications: None,
        }
    }

    /// The true number of planted outliers.
    pub fn true_k0(&self) -> usize {
        self.contamination
            .as_ref()
            .map_or(0, ContaminationSpec::planted_outliers)
    }

    pub fn kstar_key(&self) -> KStarKey {
        KStarKey {
            model: self.model,
            contamination: self.contamination,
            n: self.n,
            k0: self.true_k0(),
            replications: self
                .kstar_replications
                .unwrap_or(4 * self.replications),
            master_seed: kstar::kstar_master(self.master_seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validated()?;
        if let Some(c) = &self.contamination {
            c.validate()?;
            if c.is_deterministic() && c.k0 >= self.n {
                return Err(TailError::index(format!(
                    "contamination k0 = {} must be below n = {}",
                    c.k0, self.n
                )));
            }
        }
        if self.n < 3 {
            return Err(TailError::Size {
                min: 3,
                got: self.n,
            });
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(TailError::domain(format!(
                "need at least {MIN_REPLICATIONS} replications, got {}",
                self.replications
            )));
        }
        if self.estimators.is_empty() {
            return Err(TailError::domain("no estimators requested"));
        }
        if let KPolicy::Fixed { k } = self.k_policy {
            if k == 0 || k >= self.n {
                return Err(TailError::index(format!(
                    "reference k = {k} outside 1..={}",
                    self.n - 1
                )));
            }
        }
        self.ewst.validate()?;
        self.kselect.validate()?;
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Per-estimator results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMetrics {
    pub estimator: EstimatorSpec,
    pub label: String,
    pub summary: ErrorSummary,
    /// Mean selected `k0` (adaptive estimators only).
    pub mean_k0_hat: Option<f64>,
    /// Fraction of replications selecting exactly the true `k0`.
    pub k0_hit_rate: Option<f64>,
    pub mean_k_hat: Option<f64>,
    /// Fraction of joint selections that converged.
    pub converged_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRange {
    pub master_seed: u64,
    pub first_index: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ExperimentConfig,
    pub xi_true: f64,
    pub true_k0: usize,
    /// Reference `k` used by the non-joint estimators.
    pub k_reference: usize,
    pub replications_used: usize,
    pub failures: usize,
    pub estimators: Vec<EstimatorMetrics>,
    /// `MSE(trimmed at true k0) / MSE(adaptive)`.
    pub are_trim: Option<Estimate>,
    /// `MSE(classic Hill) / MSE(adaptive)`.
    pub are_hill: Option<Estimate>,
    /// Covariance matrix of the per-replication squared errors, in the order
    /// of `estimators` followed by the two references if they were added.
    pub sq_error_cov: Vec<Vec<f64>>,
    pub sq_error_mean: Vec<f64>,
    pub seeds: SeedRange,
    pub version: String,
    pub wall_time_secs: Option<f64>,
}

impl MetricsReport {
    /// Index of an estimator among the tracked ones.
    fn slot(&self, spec: EstimatorSpec) -> Option<usize> {
        self.tracked().iter().position(|s| *s == spec)
    }

    fn tracked(&self) -> Vec<EstimatorSpec> {
        tracked_specs(&self.config.estimators)
    }

    /// `MSE(numerator) / MSE(denominator)` with a delta-method standard error.
    pub fn relative_efficiency(
        &self,
        numerator: EstimatorSpec,
        denominator: EstimatorSpec,
    ) -> Option<Estimate> {
        let a = self.slot(numerator)?;
        let b = self.slot(denominator)?;
        Some(metrics::ratio_from_moments(
            self.sq_error_mean[a],
            self.sq_error_mean[b],
            self.sq_error_cov[a][a],
            self.sq_error_cov[b][b],
            self.sq_error_cov[a][b],
            self.replications_used,
        ))
    }

    pub fn metrics(&self, spec: EstimatorSpec) -> Option<&EstimatorMetrics> {
        self.estimators.iter().find(|m| m.estimator == spec)
    }

    /// The report with timing removed, for reproducibility comparisons.
    pub fn without_timing(mut self) -> Self {
        self.wall_time_secs = None;
        self
    }
}

/// Requested estimators followed by any missing reference estimators.
fn tracked_specs(requested: &[EstimatorSpec]) -> Vec<EstimatorSpec> {
    let mut specs = requested.to_vec();
    for r in [EstimatorSpec::ClassicHill, EstimatorSpec::TrimmedOracle] {
        if !specs.contains(&r) {
            specs.push(r);
        }
    }
    specs
}

/// One estimator's output on one replication.
#[derive(Debug, Clone, Copy)]
struct Fit {
    xi: f64,
    k0: usize,
    k: usize,
    converged: bool,
}

fn run_estimator(
    spec: EstimatorSpec,
    sample: &OrderedSample,
    cfg: &ExperimentConfig,
    k_ref: usize,
    true_k0: usize,
) -> Result<Fit> {
    let fixed = |k0: usize| {
        trimmed_hill(sample, k0, k_ref).map(|e| Fit {
            xi: e.xi_hat,
            k0,
            k: k_ref,
            converged: true,
        })
    };
    let joint = || {
        let sel = joint_select(sample, &cfg.kselect, &cfg.ewst)?;
        let est = trimmed_hill(sample, sel.k0_hat, sel.k_hat)?;
        Ok(Fit {
            xi: est.xi_hat,
            k0: sel.k0_hat,
            k: sel.k_hat,
            converged: sel.converged,
        })
    };
    match spec {
        EstimatorSpec::ClassicHill => fixed(0),
        EstimatorSpec::TrimmedOracle => fixed(true_k0),
        EstimatorSpec::Trimmed { k0 } => fixed(k0),
        EstimatorSpec::AdaptiveEwst if cfg.k_policy == KPolicy::JointSelect => joint(),
        EstimatorSpec::AdaptiveEwst => {
            let out = select_k0(sample, k_ref, &cfg.ewst)?;
            fixed(out.k0_hat)
        }
        EstimatorSpec::JointAdaptive => joint(),
    }
}

/// Runs an experiment on the global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    run_experiment_cached(cfg, &KStarCache::in_memory())
}

/// Runs an experiment on a dedicated pool with `workers` threads.
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<MetricsReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| TailError::Simulation(e.to_string()))?;
    pool.install(|| run_experiment(cfg))
}

/// Reference `k` for a config, consulting `cache` for the oracle.
pub fn reference_k(cfg: &ExperimentConfig, cache: &KStarCache) -> Result<usize> {
    match cfg.k_policy {
        KPolicy::Fixed { k } => Ok(k),
        KPolicy::OracleKStar | KPolicy::JointSelect => cache.get(&cfg.kstar_key()),
    }
}

pub fn run_experiment_cached(cfg: &ExperimentConfig, cache: &KStarCache) -> Result<MetricsReport> {
    cfg.validate()?;
    let started = Instant::now();
    let true_k0 = cfg.true_k0();
    let xi = cfg.model.xi();
    let k_ref = reference_k(cfg, cache)?;
    let specs = tracked_specs(&cfg.estimators);
    for spec in &specs {
        let k0 = match spec {
            EstimatorSpec::TrimmedOracle => true_k0,
            EstimatorSpec::Trimmed { k0 } => *k0,
            _ => 0,
        };
        if k0 >= k_ref {
            return Err(TailError::index(format!(
                "{spec} needs k0 < k, got k0 = {k0}, k = {k_ref}"
            )));
        }
    }
    if specs.contains(&EstimatorSpec::AdaptiveEwst) && cfg.k_policy != KPolicy::JointSelect && k_ref < 3 {
        return Err(TailError::index(format!("EWST needs k >= 3, got {k_ref}")));
    }

    let indices: Vec<u64> = (0..cfg.replications as u64).collect();
    let rows: Vec<Result<Vec<Fit>>> = indices
        .par_chunks(BATCH)
        .flat_map_iter(|chunk| {
            chunk.iter().map(|&i| {
                let seed = SeedSpec::new(cfg.master_seed, i);
                let sample = draw_replication(&cfg.model, cfg.contamination.as_ref(), cfg.n, seed)?;
                specs
                    .iter()
                    .map(|&s| run_estimator(s, &sample, cfg, k_ref, true_k0))
                    .collect()
            })
        })
        .collect();

    let mut fits: Vec<Vec<Fit>> = Vec::with_capacity(rows.len());
    let mut failures = 0;
    let mut first_failure = None;
    for row in rows {
        match row {
            Ok(r) => fits.push(r),
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert(e);
            }
        }
    }
    // Failures are tolerated below 1% of the replications.
    if failures * 100 >= cfg.replications {
        return Err(TailError::Simulation(format!(
            "{failures} of {} replications failed (first: {})",
            cfg.replications,
            first_failure.unwrap()
        )));
    }
    let used = fits.len();

    let columns: Vec<Vec<f64>> = (0..specs.len())
        .map(|j| fits.iter().map(|r| r[j].xi).collect())
        .collect();
    let sq: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| c.iter().map(|e| (e - xi) * (e - xi)).collect())
        .collect();
    let sq_error_mean: Vec<f64> = sq.iter().map(|c| mean(c)).collect();
    let sq_error_cov: Vec<Vec<f64>> = (0..sq.len())
        .map(|a| {
            (0..sq.len())
                .map(|b| if a == b { variance(&sq[a]) } else { covariance(&sq[a], &sq[b]) })
                .collect()
        })
        .collect();

    let mut estimators = Vec::new();
    for (j, &spec) in specs.iter().enumerate().take(cfg.estimators.len()) {
        let adaptive = spec.is_adaptive();
        let rate = |f: &dyn Fn(&Fit) -> bool| {
            fits.iter().filter(|r| f(&r[j])).count() as f64 / used as f64
        };
        let avg = |f: &dyn Fn(&Fit) -> f64| fits.iter().map(|r| f(&r[j])).sum::<f64>() / used as f64;
        estimators.push(EstimatorMetrics {
            estimator: spec,
            label: spec.to_string(),
            summary: ErrorSummary::from_estimates(&columns[j], xi)?,
            mean_k0_hat: adaptive.then(|| avg(&|f| f.k0 as f64)),
            k0_hit_rate: adaptive.then(|| rate(&|f| f.k0 == true_k0)),
            mean_k_hat: adaptive.then(|| avg(&|f| f.k as f64)),
            converged_rate: adaptive.then(|| rate(&|f| f.converged)),
        });
    }

    let mut report = MetricsReport {
        config: cfg.clone(),
        xi_true: xi,
        true_k0,
        k_reference: k_ref,
        replications_used: used,
        failures,
        estimators,
        are_trim: None,
        are_hill: None,
        sq_error_cov,
        sq_error_mean,
        seeds: SeedRange {
            master_seed: cfg.master_seed,
            first_index: 0,
            count: cfg.replications as u64,
        },
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: None,
    };
    if let Some(&adaptive) = cfg.estimators.iter().find(|s| s.is_adaptive()) {
        report.are_trim = report.relative_efficiency(EstimatorSpec::TrimmedOracle, adaptive);
        report.are_hill = report.relative_efficiency(EstimatorSpec::ClassicHill, adaptive);
    }
    if !crate::manifest::reproducible_mode() {
        report.wall_time_secs = Some(started.elapsed().as_secs_f64());
    }
    Ok(report)
}
