//! Monte Carlo summaries: MSE, relative efficiencies, relative bias and
//! relative RMSE, each with a standard error from the replication values.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::numeric::{covariance, mean, variance};

/// A point estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Relative bias and relative RMSE in percent of `truth`.
pub fn rb_rrmse(estimates: &[f64], truth: f64) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(TailError::Size { min: 1, got: 0 });
    }
    if !(truth > 0.0) {
        return Err(TailError::domain(format!("true value must be positive, got {truth}")));
    }
    let rb = (mean(estimates) - truth) / truth * 100.0;
    let sq: Vec<f64> = estimates.iter().map(|x| (x - truth) * (x - truth)).collect();
    let rrmse = mean(&sq).sqrt() / truth * 100.0;
    Ok((rb, rrmse))
}

/// Summary of one estimator over all retained replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mse: Estimate,
    pub mean: Estimate,
    pub rb_percent: Estimate,
    pub rrmse_percent: Estimate,
}

impl ErrorSummary {
    pub fn from_estimates(estimates: &[f64], truth: f64) -> Result<Self> {
        let (rb, rrmse) = rb_rrmse(estimates, truth)?;
        let r = estimates.len() as f64;
        let sq: Vec<f64> = estimates.iter().map(|x| (x - truth) * (x - truth)).collect();
        let mse = mean(&sq);
        let mse_se = sd(&sq) / r.sqrt();
        let est_se = sd(estimates) / r.sqrt();
        let rrmse_se = if mse > 0.0 {
            mse_se / (2.0 * mse.sqrt()) / truth * 100.0
        } else {
            0.0
        };
        Ok(Self {
            mse: Estimate {
                value: mse,
                se: mse_se,
            },
            mean: Estimate {
                value: mean(estimates),
                se: est_se,
            },
            rb_percent: Estimate {
                value: rb,
                se: est_se / truth * 100.0,
            },
            rrmse_percent: Estimate {
                value: rrmse,
                se: rrmse_se,
            },
        })
    }
}

fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        0.0
    } else {
        variance(xs).sqrt()
    }
}

/// `mean(a) / mean(b)` for paired replication values, with a delta-method
/// standard error that accounts for their covariance.
pub fn ratio_of_means(a: &[f64], b: &[f64]) -> Estimate {
    let r = a.len() as f64;
    let ma = mean(a);
    let mb = mean(b);
    let value = ma / mb;
    let se = if a.len() < 2 || mb == 0.0 {
        f64::NAN
    } else {
        let (va, vb, cab) = (variance(a), variance(b), covariance(a, b));
        let v = (va - 2.0 * value * cab + value * value * vb) / (mb * mb * r);
        v.max(0.0).sqrt()
    };
    Estimate { value, se }
}

/// Ratio of two MSEs given their means, variances and covariance of the
/// squared errors over `r` paired replications.
pub fn ratio_from_moments(ma: f64, mb: f64, va: f64, vb: f64, cab: f64, r: usize) -> Estimate {
    let value = ma / mb;
    let v = (va - 2.0 * value * cab + value * value * vb) / (mb * mb * r as f64);
    Estimate {
        value,
        se: v.max(0.0).sqrt(),
    }
}
