//! Exponentially weighted sequential testing (EWST) for the number of
//! extreme outliers.
//!
//! Under an exact Pareto tail the ratios
//!
//! ```text
//! T(k0) = (k - k0 - 1) xi(k0 + 1, k) / ((k - k0) xi(k0, k)),   k0 = 0..k-2
//! ```
//!
//! are independent `Beta(k - k0 - 1, 1)` variables, so
//! `U(k0) = 2 |T(k0)^(k - k0 - 1) - 1/2|` are i.i.d. uniform. The scan starts
//! at `k0 = f(k)` and walks down, accepting while `U(k0)` stays below
//! `(1 - q)^(c a^(k - k0 - 1))` with `c = 1 / sum_{i=1}^{k-1} a^i`. The
//! per-step exponents sum to one, so with `f(k) = k - 2` the probability of
//! any rejection on clean Pareto data is exactly `q`.
//!
//! A rejection at `k0` implicates the `(k0 + 1)`-th largest value, so the
//! selected trimming level is `k0 + 1`; a clean scan selects `0`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::estimators::{trim_path, TrimPath};
use crate::sample::OrderedSample;

/// Where the downward scan starts, `f(k)`; always capped at `k - 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StartRule {
    /// `f(k) = k - 2`; required for exact type-I control.
    #[default]
    Full,
    /// `f(k) = min(k - 2, ceil(scale * sqrt(k)))`.
    Capped { scale: f64 },
    /// `f(k) = min(k - 2, k0)`.
    Fixed { k0: usize },
}

impl StartRule {
    /// The default capped variant, `min(k - 2, ceil(10 sqrt(k)))`.
    pub const CAPPED: StartRule = StartRule::Capped { scale: 10.0 };

    pub fn start(&self, k: usize) -> usize {
        let full = k.saturating_sub(2);
        match *self {
            StartRule::Full => full,
            StartRule::Capped { scale } => full.min((scale * (k as f64).sqrt()).ceil() as usize),
            StartRule::Fixed { k0 } => full.min(k0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwstConfig {
    /// Overall significance level.
    pub q: f64,
    /// Exponentiation base, `> 1`.
    pub a: f64,
    #[serde(default)]
    pub start_rule: StartRule,
}

impl Default for EwstConfig {
    fn default() -> Self {
        Self {
            q: 0.05,
            a: 1.2,
            start_rule: StartRule::Full,
        }
    }
}

impl EwstConfig {
    pub fn new(q: f64, a: f64, start_rule: StartRule) -> Result<Self> {
        let cfg = Self { q, a, start_rule };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(TailError::domain(format!(
                "significance level q must lie in (0, 1), got {}",
                self.q
            )));
        }
        if !(self.a > 1.0 && self.a.is_finite()) {
            return Err(TailError::domain(format!(
                "exponentiation base a must exceed 1, got {}",
                self.a
            )));
        }
        if let StartRule::Capped { scale } = self.start_rule {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(TailError::domain(format!(
                    "start rule scale must be positive, got {scale}"
                )));
            }
        }
        Ok(())
    }

    /// Normalizing constant `c = 1 / sum_{i=1}^{k-1} a^i`.
    pub fn c(&self, k: usize) -> f64 {
        1.0 / (1..k).map(|i| self.a.powi(i as i32)).sum::<f64>()
    }
}

/// `T(k0)` from a trimming path.
pub fn t_stat(path: &TrimPath, k0: usize) -> Result<f64> {
    let k = path.k;
    if k < 2 || k0 > k - 2 {
        return Err(TailError::index(format!(
            "T needs 0 <= k0 <= k - 2, got k0 = {k0}, k = {k}"
        )));
    }
    let here = path.estimates[k0];
    if !(here > 0.0) {
        return Err(TailError::Degenerate { k0 });
    }
    let next = path.estimates[k0 + 1];
    Ok(((k - k0 - 1) as f64 * next) / ((k - k0) as f64 * here))
}

/// `U = 2 |t^(k - k0 - 1) - 1/2|`; not clamped, values above 1 need `t > 1`.
pub fn u_stat(t: f64, k0: usize, k: usize) -> f64 {
    let m = k.saturating_sub(k0 + 1) as f64;
    2.0 * (t.powf(m) - 0.5).abs()
}

/// Exponent `c a^(k - k0 - 1)` of the per-step acceptance threshold.
///
/// Evaluated as `a^(-k0) (1 - 1/a) / (1 - a^(-(k-1)))`, which is finite for
/// any `k`.
pub fn threshold_exponent(k: usize, k0: usize, a: f64) -> f64 {
    let head = 1.0 - a.powf(-((k - 1) as f64));
    a.powf(-(k0 as f64)) * (1.0 - 1.0 / a) / head
}

/// Acceptance threshold `(1 - q)^(c a^(k - k0 - 1))` for `U(k0)`.
pub fn accept_threshold(k: usize, k0: usize, q: f64, a: f64) -> f64 {
    (1.0 - q).powf(threshold_exponent(k, k0, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Pass,
    Reject,
}

/// One test of the scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwstStep {
    pub k0: usize,
    pub t: f64,
    pub u: f64,
    pub threshold: f64,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwstOutcome {
    pub k: usize,
    pub k0_hat: usize,
    /// Tests in scan order, from `k0 = f(k)` downwards.
    pub trace: Vec<EwstStep>,
    /// The `k0_hat` largest sample values.
    pub outliers: Vec<f64>,
}

/// Runs the scan on a precomputed path; returns `(k0_hat, trace)`.
pub fn scan_path(path: &TrimPath, cfg: &EwstConfig) -> Result<(usize, Vec<EwstStep>)> {
    cfg.validate()?;
    let k = path.k;
    if k < 3 {
        return Err(TailError::index(format!("EWST needs k >= 3, got {k}")));
    }
    let start = cfg.start_rule.start(k);
    let ln_keep = (1.0 - cfg.q).ln();
    let mut trace = Vec::with_capacity(start + 1);
    for k0 in (0..=start).rev() {
        let t = t_stat(path, k0)?;
        let u = u_stat(t, k0, k);
        let threshold = (ln_keep * threshold_exponent(k, k0, cfg.a)).exp();
        // U = 0 passes; U > 1 exceeds every threshold and rejects.
        let decision = if u < threshold {
            Decision::Pass
        } else {
            Decision::Reject
        };
        trace.push(EwstStep {
            k0,
            t,
            u,
            threshold,
            decision,
        });
        if decision == Decision::Reject {
            return Ok((k0 + 1, trace));
        }
    }
    Ok((0, trace))
}

/// Selects the trimming level for a fixed `k`.
pub fn select_k0(sample: &OrderedSample, k: usize, cfg: &EwstConfig) -> Result<EwstOutcome> {
    let n = sample.len();
    if k < 3 || k >= n {
        return Err(TailError::index(format!(
            "EWST needs 3 <= k <= n - 1, got k = {k}, n = {n}"
        )));
    }
    let path = trim_path(sample, k)?;
    let (k0_hat, trace) = scan_path(&path, cfg)?;
    Ok(EwstOutcome {
        k,
        k0_hat,
        trace,
        outliers: sample.values()[..k0_hat].to_vec(),
    })
}

/// A flagged extreme value; rank 1 is the sample maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outlier {
    pub rank: usize,
    pub value: f64,
}

pub fn flag_outliers(sample: &OrderedSample, outcome: &EwstOutcome) -> Vec<Outlier> {
    sample
        .values()
        .iter()
        .take(outcome.k0_hat)
        .enumerate()
        .map(|(i, &value)| Outlier { rank: i + 1, value })
        .collect()
}
