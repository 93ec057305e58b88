//! Data-driven choice of `k` for a given trimming level, and the joint
//! iteration between `k` and `k0`.
//!
//! The stopping index `kbar(r)` is the first `k` where the weighted
//! fluctuation
//!
//! ```text
//! M(k) = max_{k0+1 <= i <= k} sqrt(i - k0 + 1) |xi(k0, i) - xi(k0, k)|
//! ```
//!
//! exceeds `r`. Two stopping indices at thresholds `r^eps` and `r` give the
//! optimal-`k` estimate
//!
//! ```text
//! k = (2 rho + 1)^(-1/rho) (2 xi0 rho)^(1/(2 rho + 1)) (kbar(r^eps) / kbar(r)^eps)^(1/(1 - eps))
//! ```
//!
//! where `xi0` is a pilot estimate and `rho` is either fixed or estimated
//! from the ratio `M(floor(lambda kbar)) / M(kbar)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::estimators::{tail_path, TailPath};
use crate::ewst::{select_k0, EwstConfig};
use crate::sample::OrderedSample;

/// How the threshold `r_n` depends on the sample size and the pilot estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RRule {
    /// `r = scale * xi0 * n^(1/4)`.
    Scaled { scale: f64 },
    /// A fixed threshold.
    Constant { r: f64 },
}

impl Default for RRule {
    fn default() -> Self {
        RRule::Scaled { scale: 2.5 }
    }
}

impl RRule {
    pub fn threshold(&self, n: usize, xi0: f64) -> f64 {
        match *self {
            RRule::Scaled { scale } => scale * xi0 * (n as f64).powf(0.25),
            RRule::Constant { r } => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RhoMode {
    Fixed { rho: f64 },
    Estimated,
}

impl Default for RhoMode {
    fn default() -> Self {
        RhoMode::Fixed { rho: 1.0 }
    }
}

/// Starting `k` for the joint iteration and pilot index for `xi0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InitialK {
    /// `floor(scale * sqrt(n))`.
    Sqrt { scale: f64 },
    Fixed { k: usize },
}

impl Default for InitialK {
    fn default() -> Self {
        InitialK::Sqrt { scale: 2.0 }
    }
}

impl InitialK {
    pub fn k(&self, n: usize) -> usize {
        match *self {
            InitialK::Sqrt { scale } => (scale * (n as f64).sqrt()).floor() as usize,
            InitialK::Fixed { k } => k,
        }
    }
}

/// Default starting `k`, `floor(2 sqrt(n))`.
pub fn default_k(n: usize) -> usize {
    InitialK::default().k(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSelectConfig {
    pub r_rule: RRule,
    pub epsilon: f64,
    pub lambda: f64,
    pub rho_mode: RhoMode,
    pub tau: usize,
    pub max_iter: usize,
    pub initial_k: InitialK,
}

impl Default for KSelectConfig {
    fn default() -> Self {
        Self {
            r_rule: RRule::default(),
            epsilon: 0.7,
            lambda: 0.6,
            rho_mode: RhoMode::default(),
            tau: 2,
            max_iter: 20,
            initial_k: InitialK::default(),
        }
    }
}

impl KSelectConfig {
    pub fn validate(&self) -> Result<()> {
        let open01 = |v: f64| v > 0.0 && v < 1.0;
        if !open01(self.epsilon) {
            return Err(TailError::domain(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !open01(self.lambda) {
            return Err(TailError::domain(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if let RhoMode::Fixed { rho } = self.rho_mode {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(TailError::domain(format!("rho must be positive, got {rho}")));
            }
        }
        match self.r_rule {
            RRule::Scaled { scale } if !(scale > 0.0 && scale.is_finite()) => {
                return Err(TailError::domain(format!("r scale must be positive, got {scale}")))
            }
            RRule::Constant { r } if !(r > 0.0) => {
                return Err(TailError::domain(format!("r must be positive, got {r}")))
            }
            _ => {}
        }
        if let InitialK::Sqrt { scale } = self.initial_k {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(TailError::domain(format!(
                    "initial k scale must be positive, got {scale}"
                )));
            }
        }
        if self.max_iter == 0 {
            return Err(TailError::domain("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// A stopping index; `saturated` means no `k` crossed the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kbar {
    pub k: usize,
    pub saturated: bool,
}

#[inline]
fn weight(i: usize, k0: usize) -> f64 {
    ((i - k0 + 1) as f64).sqrt()
}

/// `M(k)` by direct scan.
pub fn fluctuation(path: &TailPath, k: usize) -> f64 {
    let k0 = path.k0;
    let xk = path.at(k).expect("k inside the tail path");
    (k0 + 1..=k)
        .map(|i| weight(i, k0) * (path.at(i).unwrap() - xk).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy)]
struct Line {
    slope: f64,
    intercept: f64,
    idx: usize,
}

impl Line {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Upper envelope of lines inserted in increasing slope order.
#[derive(Default)]
struct Envelope {
    lines: Vec<Line>,
}

impl Envelope {
    fn push(&mut self, l3: Line) {
        while self.lines.len() >= 2 {
            let l1 = self.lines[self.lines.len() - 2];
            let l2 = self.lines[self.lines.len() - 1];
            let redundant = (l1.intercept - l3.intercept) * (l2.slope - l1.slope)
                <= (l1.intercept - l2.intercept) * (l3.slope - l1.slope);
            if !redundant {
                break;
            }
            self.lines.pop();
        }
        self.lines.push(l3);
    }

    fn argmax(&self, x: f64) -> usize {
        let ls = &self.lines;
        let mut lo = 0;
        let mut hi = ls.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if ls[mid + 1].eval(x) > ls[mid].eval(x) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        ls[lo].idx
    }
}

/// Stopping index on a precomputed tail path.
pub fn kbar_on_path(path: &TailPath, r: f64) -> Kbar {
    let k0 = path.k0;
    let n = path.n;
    if !(r < f64::INFINITY) {
        return Kbar {
            k: n - 1,
            saturated: true,
        };
    }
    // max_i w_i |xi_i - x| = max( max_i w_i (xi_i - x), max_i w_i (x - xi_i) ),
    // two upper envelopes with increasing slopes w_i in the variables -x and x.
    let mut below = Envelope::default();
    let mut above = Envelope::default();
    for k in k0 + 1..n {
        let w = weight(k, k0);
        let xi = path.at(k).unwrap();
        below.push(Line {
            slope: w,
            intercept: w * xi,
            idx: k,
        });
        above.push(Line {
            slope: w,
            intercept: -w * xi,
            idx: k,
        });
        let exact = |i: usize| weight(i, k0) * (path.at(i).unwrap() - xi).abs();
        let m = exact(below.argmax(-xi)).max(exact(above.argmax(xi)));
        let near = (m - r).abs() <= 1e-9 * (m.abs() + r.abs()) + f64::MIN_POSITIVE;
        let crossed = if near {
            fluctuation(path, k) > r
        } else {
            m > r
        };
        if crossed {
            return Kbar {
                k,
                saturated: false,
            };
        }
    }
    Kbar {
        k: n - 1,
        saturated: true,
    }
}

/// The stopping index `kbar(r)` at trimming level `k0`.
pub fn kbar(sample: &OrderedSample, k0: usize, r: f64) -> Result<Kbar> {
    check_k0(sample.len(), k0)?;
    if !(r > 0.0) {
        return Err(TailError::domain(format!("threshold r must be positive, got {r}")));
    }
    Ok(kbar_on_path(&tail_path(sample, k0)?, r))
}

fn check_k0(n: usize, k0: usize) -> Result<()> {
    if k0 + 2 >= n {
        return Err(TailError::index(format!(
            "need k0 + 1 < n - 1, got k0 = {k0}, n = {n}"
        )));
    }
    Ok(())
}

fn rho_on_path(path: &TailPath, r: f64, lambda: f64) -> Result<f64> {
    let kb = kbar_on_path(path, r);
    if kb.saturated {
        return Err(TailError::Selection(format!(
            "kbar saturated at r = {r}; increase n or lower r"
        )));
    }
    let m = (lambda * kb.k as f64).floor() as usize;
    if m <= path.k0 + 1 {
        return Err(TailError::Selection(format!(
            "floor(lambda * kbar) = {m} leaves no room above k0 + 1 = {}; use a larger r",
            path.k0 + 1
        )));
    }
    let num = fluctuation(path, m);
    let den = fluctuation(path, kb.k);
    let rho = (num / den).ln() / lambda.ln() - 0.5;
    if !rho.is_finite() {
        return Err(TailError::Selection(format!(
            "rho estimate is not finite (fluctuation ratio {num} / {den})"
        )));
    }
    Ok(rho)
}

/// Second-order parameter estimate from two fluctuation maxima.
pub fn rho_hat(sample: &OrderedSample, k0: usize, r: f64, lambda: f64) -> Result<f64> {
    check_k0(sample.len(), k0)?;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(TailError::domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    rho_on_path(&tail_path(sample, k0)?, r, lambda)
}

/// Everything `k_opt` computed on the way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KOptDetail {
    pub k: usize,
    pub xi0: f64,
    pub rho: f64,
    pub r: f64,
    pub kbar_r: Kbar,
    pub kbar_r_eps: Kbar,
    /// The unrounded, unclamped estimate.
    pub raw: f64,
}

/// Optimal `k` estimate at trimming level `k0`, with intermediates.
pub fn k_opt_detail(sample: &OrderedSample, k0: usize, cfg: &KSelectConfig) -> Result<KOptDetail> {
    cfg.validate()?;
    let n = sample.len();
    check_k0(n, k0)?;
    let path = tail_path(sample, k0)?;
    let pilot = cfg.initial_k.k(n).clamp(k0 + 1, n - 1);
    let xi0 = path.at(pilot).unwrap();
    if !(xi0 > 0.0) {
        return Err(TailError::Selection(format!(
            "pilot estimate at k = {pilot} is zero"
        )));
    }
    let r = cfg.r_rule.threshold(n, xi0);
    let eps = cfg.epsilon;
    let rho = match cfg.rho_mode {
        RhoMode::Fixed { rho } => rho,
        RhoMode::Estimated => {
            let rho = rho_on_path(&path, r, cfg.lambda)?;
            if !(rho > 0.0) {
                return Err(TailError::Selection(format!(
                    "estimated rho = {rho} is not positive"
                )));
            }
            rho
        }
    };
    let kbar_r = kbar_on_path(&path, r);
    let kbar_r_eps = kbar_on_path(&path, r.powf(eps));
    let ratio = kbar_r_eps.k as f64 / (kbar_r.k as f64).powf(eps);
    let raw = (2.0 * rho + 1.0).powf(-1.0 / rho)
        * (2.0 * xi0 * rho).powf(1.0 / (2.0 * rho + 1.0))
        * ratio.powf(1.0 / (1.0 - eps));
    if !raw.is_finite() {
        return Err(TailError::Selection(format!("k estimate is not finite ({raw})")));
    }
    let k = (raw.round().max(0.0) as usize).clamp(k0 + 1, n - 1);
    Ok(KOptDetail {
        k,
        xi0,
        rho,
        r,
        kbar_r,
        kbar_r_eps,
        raw,
    })
}

pub fn k_opt(sample: &OrderedSample, k0: usize, cfg: &KSelectConfig) -> Result<usize> {
    k_opt_detail(sample, k0, cfg).map(|d| d.k)
}

/// One step of the joint iteration: `k0` was selected by EWST at `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Iterate {
    pub k: usize,
    pub k0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectResult {
    pub k0_hat: usize,
    pub k_hat: usize,
    pub iterations: Vec<Iterate>,
    pub converged: bool,
}

/// Smallest sample the joint iteration accepts.
pub const JOINT_MIN_N: usize = 20;

/// Alternates EWST at the current `k` with `k_opt` at the selected `k0`
/// until two consecutive `k` differ by at most `tau`.
pub fn joint_select(
    sample: &OrderedSample,
    kcfg: &KSelectConfig,
    ecfg: &EwstConfig,
) -> Result<KSelectResult> {
    kcfg.validate()?;
    ecfg.validate()?;
    let n = sample.len();
    if n < JOINT_MIN_N {
        return Err(TailError::Size {
            min: JOINT_MIN_N,
            got: n,
        });
    }
    // EWST needs k >= 3.
    let clamp = |k: usize| k.clamp(3, n - 1);
    let mut k = clamp(kcfg.initial_k.k(n));
    let mut iterations = Vec::new();
    for iteration in 1..=kcfg.max_iter {
        let wrap = |e: TailError| TailError::Iteration {
            iteration,
            source: Box::new(e),
        };
        let k0 = select_k0(sample, k, ecfg).map_err(wrap)?.k0_hat;
        iterations.push(Iterate { k, k0 });
        if k0 + 2 >= n {
            return Err(wrap(TailError::Selection(format!(
                "EWST trimmed k0 = {k0} of n = {n} values"
            ))));
        }
        let next = clamp(k_opt(sample, k0, kcfg).map_err(wrap)?);
        if next.abs_diff(k) <= kcfg.tau {
            return Ok(KSelectResult {
                k0_hat: k0,
                k_hat: k,
                iterations,
                converged: true,
            });
        }
        k = next;
    }
    let last = *iterations.last().unwrap();
    Ok(KSelectResult {
        k0_hat: last.k0,
        k_hat: last.k,
        iterations,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;
    use crate::seed::SeedSpec;

    fn pareto(n: usize, idx: u64) -> OrderedSample {
        ModelSpec::pareto(1.0, 1.0)
            .unwrap()
            .sample(n, SeedSpec::new(11, idx))
            .unwrap()
    }

    fn brute(path: &TailPath, r: f64) -> Kbar {
        for k in path.ks() {
            if fluctuation(path, k) > r {
                return Kbar {
                    k,
                    saturated: false,
                };
            }
        }
        Kbar {
            k: path.n - 1,
            saturated: true,
        }
    }

    #[test]
    fn kbar_tiny_and_infinite_thresholds() {
        let s = pareto(50, 0);
        for k0 in [0, 3] {
            assert_eq!(kbar(&s, k0, 1e-300).unwrap().k, k0 + 2);
            assert_eq!(
                kbar(&s, k0, f64::INFINITY).unwrap(),
                Kbar {
                    k: 49,
                    saturated: true
                }
            );
        }
    }

    #[test]
    fn kbar_matches_brute_force() {
        for idx in 0..30 {
            let s = pareto(150, idx);
            for k0 in [0, 2, 10] {
                let path = tail_path(&s, k0).unwrap();
                for r in [0.05, 0.3, 1.0, 2.5, 5.0] {
                    assert_eq!(kbar_on_path(&path, r), brute(&path, r), "idx {idx} k0 {k0} r {r}");
                }
            }
        }
    }

    #[test]
    fn rho_ratio_fixtures() {
        // log_lambda(1) - 1/2 and log_lambda(lambda) - 1/2.
        let lam: f64 = 0.6;
        assert_eq!((1.0f64).ln() / lam.ln() - 0.5, -0.5);
        assert!((lam.ln() / lam.ln() - 0.5 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rho_hat_direct() {
        let s = pareto(500, 3);
        let path = tail_path(&s, 0).unwrap();
        let r = 2.5 * path.at(default_k(500)).unwrap() * 500f64.powf(0.25);
        match rho_hat(&s, 0, r, 0.6) {
            Ok(rho) => {
                let kb = brute(&path, r).k;
                let m = (0.6 * kb as f64).floor() as usize;
                let want = (fluctuation(&path, m) / fluctuation(&path, kb)).ln() / 0.6f64.ln() - 0.5;
                assert_eq!(rho, want);
            }
            Err(e) => assert!(matches!(e, TailError::Selection(_))),
        }
        assert!(matches!(
            rho_hat(&s, 0, f64::INFINITY, 0.6),
            Err(TailError::Selection(_))
        ));
    }

    #[test]
    fn k_opt_prefactor_and_bounds() {
        let pre = 3f64.powf(-1.0) * (2.0 * 0.5 * 1.0f64).powf(1.0 / 3.0);
        assert!((pre - 1.0 / 3.0).abs() < 1e-15);
        let cfg = KSelectConfig::default();
        for idx in 0..20 {
            let s = pareto(300, idx);
            for k0 in [0, 5] {
                let d = k_opt_detail(&s, k0, &cfg).unwrap();
                assert!(d.k > k0 && d.k < 300);
            }
        }
    }

    #[test]
    fn k_opt_direct_evaluation() {
        let s = pareto(500, 7);
        let cfg = KSelectConfig::default();
        let d = k_opt_detail(&s, 0, &cfg).unwrap();
        let path = tail_path(&s, 0).unwrap();
        let xi0 = path.at(44).unwrap();
        let r = 2.5 * xi0 * 500f64.powf(0.25);
        let a = brute(&path, r.powf(0.7)).k as f64;
        let b = brute(&path, r).k as f64;
        let rho = 1.0f64;
        let raw = (2.0 * rho + 1.0).powf(-1.0 / rho)
            * (2.0 * xi0 * rho).powf(1.0 / (2.0 * rho + 1.0))
            * (a / b.powf(0.7)).powf(1.0 / (1.0 - 0.7));
        assert_eq!(d.raw, raw);
        assert_eq!(d.k, (raw.round() as usize).clamp(1, 499));
    }

    #[test]
    fn joint_select_contract() {
        let s = pareto(500, 1);
        let res = joint_select(&s, &KSelectConfig::default(), &EwstConfig::default()).unwrap();
        assert!(!res.iterations.is_empty() && res.iterations.len() <= 20);
        assert!(res.k0_hat < res.k_hat && res.k_hat < 500);
        assert!(res.iterations.iter().all(|it| it.k0 < it.k));
        let one = KSelectConfig {
            max_iter: 1,
            ..Default::default()
        };
        let res = joint_select(&s, &one, &EwstConfig::default()).unwrap();
        assert_eq!(res.iterations.len(), 1);
        assert!(joint_select(&pareto(19, 0), &one, &EwstConfig::default()).is_err());
    }

    #[test]
    fn joint_select_stops_when_k_repeats() {
        let s = pareto(200, 4);
        let cfg = KSelectConfig {
            initial_k: InitialK::Fixed { k: 40 },
            ..Default::default()
        };
        let res = joint_select(&s, &cfg, &EwstConfig::default()).unwrap();
        if res.converged && res.iterations.len() >= 2 {
            // Restarting from the converged k reproduces it right away.
            let again = KSelectConfig {
                initial_k: InitialK::Fixed { k: res.k_hat },
                tau: 0,
                ..cfg
            };
            let k0 = res.k0_hat;
            let next = k_opt(&s, k0, &again).unwrap();
            if next == res.k_hat {
                let r2 = joint_select(&s, &again, &EwstConfig::default()).unwrap();
                assert_eq!(r2.iterations.len(), 1);
            }
        }
    }
}
