//! Classic and trimmed Hill estimators.
//!
//! For a descending sample `x[0] >= x[1] >= ...` the trimmed Hill estimator
//! with `k0` trimmed and `k` tail values is
//!
//! ```text
//! xi(k0, k) = [ (k0 + 1) ln(x[k0] / x[k]) + sum_{j=k0+1}^{k-1} ln(x[j] / x[k]) ] / (k - k0)
//! ```
//!
//! which is the minimum-variance linear unbiased estimator of the tail index
//! under an exact Pareto tail. `k0 = 0` is the classic Hill estimator. The
//! values above the `k0`-th largest never enter, so the estimate is unchanged
//! by any order-preserving corruption of the top `k0` observations.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::numeric::CompensatedSum;
use crate::sample::OrderedSample;

/// One trimmed Hill fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub xi_hat: f64,
    pub k0: usize,
    pub k: usize,
    pub n: usize,
    /// Plug-in standard error `xi_hat / sqrt(k - k0)`.
    pub se: f64,
}

impl TailEstimate {
    fn new(xi_hat: f64, k0: usize, k: usize, n: usize) -> Self {
        Self {
            xi_hat,
            k0,
            k,
            n,
            se: plug_in_se(xi_hat, k0, k),
        }
    }
}

#[inline]
fn plug_in_se(xi_hat: f64, k0: usize, k: usize) -> f64 {
    xi_hat / ((k - k0) as f64).sqrt()
}

fn check_range(n: usize, k0: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(TailError::index(format!(
            "need 1 <= k <= n - 1, got k = {k}, n = {n}"
        )));
    }
    if k0 >= k {
        return Err(TailError::index(format!(
            "need 0 <= k0 < k, got k0 = {k0}, k = {k}"
        )));
    }
    Ok(())
}

/// Classic Hill estimator over the `k` largest values.
pub fn hill(sample: &OrderedSample, k: usize) -> Result<TailEstimate> {
    trimmed_hill(sample, 0, k)
}

/// Optimal trimmed Hill estimator discarding the `k0` largest values.
pub fn trimmed_hill(sample: &OrderedSample, k0: usize, k: usize) -> Result<TailEstimate> {
    let n = sample.len();
    check_range(n, k0, k)?;
    let x = sample.values();
    let pivot = x[k];
    let mut acc = CompensatedSum::new();
    acc.add((k0 + 1) as f64 * (x[k0] / pivot).ln());
    for &xj in &x[k0 + 1..k] {
        acc.add((xj / pivot).ln());
    }
    Ok(TailEstimate::new(acc.value() / (k - k0) as f64, k0, k, n))
}

/// All trimmed estimates `xi(k0, k)` for `k0 = 0..k-1` at a fixed `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimPath {
    pub k: usize,
    pub n: usize,
    /// `estimates[k0]` is `xi(k0, k)`.
    pub estimates: Vec<f64>,
}

impl TrimPath {
    pub fn get(&self, k0: usize) -> Option<f64> {
        self.estimates.get(k0).copied()
    }

    pub fn se(&self, k0: usize) -> Option<f64> {
        self.get(k0).map(|xi| plug_in_se(xi, k0, self.k))
    }

    pub fn estimate(&self, k0: usize) -> Option<TailEstimate> {
        self.get(k0).map(|xi| TailEstimate::new(xi, k0, self.k, self.n))
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }
}

/// The whole trimming path in O(k) using the suffix recurrence
///
/// `(k - k0) xi(k0) = (k - k0 - 1) xi(k0 + 1) + (k0 + 1) ln(x[k0] / x[k0 + 1])`,
///
/// seeded with `xi(k - 1) = k ln(x[k - 1] / x[k])`.
pub fn trim_path(sample: &OrderedSample, k: usize) -> Result<TrimPath> {
    let n = sample.len();
    check_range(n, 0, k)?;
    let x = sample.values();
    let mut estimates = vec![0.0; k];
    let mut acc = CompensatedSum::new();
    acc.add(k as f64 * (x[k - 1] / x[k]).ln());
    estimates[k - 1] = acc.value();
    for k0 in (0..k - 1).rev() {
        acc.add((k0 + 1) as f64 * (x[k0] / x[k0 + 1]).ln());
        estimates[k0] = acc.value() / (k - k0) as f64;
    }
    Ok(TrimPath { k, n, estimates })
}

/// Trimmed estimates along the tail: `xi(k0, k)` for every `k = k0+1 ..= n-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailPath {
    pub k0: usize,
    pub n: usize,
    estimates: Vec<f64>,
}

impl TailPath {
    /// `xi(k0, k)`, or `None` outside `k0 < k < n`.
    #[inline]
    pub fn at(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.k0 + 1)
            .and_then(|i| self.estimates.get(i).copied())
    }

    /// Estimates indexed from `k = k0 + 1`.
    pub fn as_slice(&self) -> &[f64] {
        &self.estimates
    }

    pub fn ks(&self) -> std::ops::RangeInclusive<usize> {
        self.k0 + 1..=self.n - 1
    }
}

/// Computes [`TailPath`] in O(n) from the forward recurrence
/// `S(k + 1) = S(k) + (k + 1) ln(x[k] / x[k + 1])`, `xi(k0, k) = S(k) / (k - k0)`.
pub fn tail_path(sample: &OrderedSample, k0: usize) -> Result<TailPath> {
    let n = sample.len();
    if k0 + 1 >= n {
        return Err(TailError::index(format!(
            "need k0 + 1 <= n - 1, got k0 = {k0}, n = {n}"
        )));
    }
    let x = sample.values();
    let mut acc = CompensatedSum::new();
    let mut estimates = Vec::with_capacity(n - 1 - k0);
    for i in k0..n - 1 {
        acc.add((i + 1) as f64 * (x[i] / x[i + 1]).ln());
        estimates.push(acc.value() / (i + 1 - k0) as f64);
    }
    Ok(TailPath { k0, n, estimates })
}

/// One row of trimmed Hill plot data: the estimate with a one-standard-error band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub k0: usize,
    pub xi: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn plot_series(path: &TrimPath) -> Vec<PlotRow> {
    path.estimates
        .iter()
        .enumerate()
        .map(|(k0, &xi)| {
            let se = plug_in_se(xi, k0, path.k);
            PlotRow {
                k0,
                xi,
                lo: xi - se,
                hi: xi + se,
            }
        })
        .collect()
}

/// Robust Pareto exponent `(1 - 2/n) / xi(k0, n - 1)`.
pub fn alpha_trim(sample: &OrderedSample, k0: usize) -> Result<f64> {
    let n = sample.len();
    if k0 + 1 >= n {
        return Err(TailError::index(format!(
            "need k0 < n - 1, got k0 = {k0}, n = {n}"
        )));
    }
    let est = trimmed_hill(sample, k0, n - 1)?;
    alpha_trim_from(n, est.xi_hat).map_err(|_| TailError::Degenerate { k0 })
}

/// The correction `(1 - 2/n) / xi_hat` applied to an already computed estimate.
pub fn alpha_trim_from(n: usize, xi_hat: f64) -> Result<f64> {
    if !(xi_hat > 0.0) {
        return Err(TailError::Degenerate { k0: 0 });
    }
    Ok((1.0 - 2.0 / n as f64) / xi_hat)
}

/// Trimming level giving asymptotic relative efficiency `are` against the
/// untrimmed MLE, from `ARE ~ (n - 1 - k0) / n`.
pub fn k0_for_target_are(n: usize, are: f64) -> Result<usize> {
    if n < OrderedSample::MIN_LEN {
        return Err(TailError::Size {
            min: OrderedSample::MIN_LEN,
            got: n,
        });
    }
    if !(are > 0.0 && are <= 1.0) {
        return Err(TailError::domain(format!(
            "target efficiency must lie in (0, 1], got {are}"
        )));
    }
    let raw = (n as f64 - 1.0 - are * n as f64).round();
    Ok(raw.clamp(0.0, (n - 2) as f64) as usize)
}

/// Exact covariance of two trimmed estimates at the same `k` under a Pareto
/// model: `xi^2 / (k - min(i, j))`.
pub fn pareto_cov_oracle(i: usize, j: usize, k: usize, xi: f64) -> Result<f64> {
    if i >= k || j >= k {
        return Err(TailError::index(format!(
            "need i, j <= k - 1, got i = {i}, j = {j}, k = {k}"
        )));
    }
    Ok(xi * xi / (k - i.min(j)) as f64)
}
