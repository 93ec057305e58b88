//! Heavy-tailed sampling models and contamination mechanisms.
//!
//! Four families are supported, each with tail index `xi`:
//!
//! | family                 | survival function `1 - F(x)`              | `xi`      |
//! |------------------------|-------------------------------------------|-----------|
//! | `Pareto(sigma, alpha)` | `(x / sigma)^(-alpha)`, `x >= sigma`      | `1/alpha` |
//! | `Frechet(alpha)`       | `1 - exp(-x^(-alpha))`                    | `1/alpha` |
//! | `Burr(eta, lambda, tau)` | `(eta / (eta + x^(tau/lambda)))^lambda` | `1/tau`   |
//! | `AbsT(dof)`            | `P(|T_dof| > x)`                          | `1/dof`   |
//!
//! Pareto, Frechet and Burr are sampled by inverse transform. `|T|` is sampled
//! as `|Z / sqrt(V / dof)|` with `Z` standard normal and `V` chi-square.
//!
//! Contamination either perturbs the top `k0` order statistics
//! deterministically (exponent or scale inflation around the pivot
//! `X_(n-k0)`), or randomly rescales a fraction of the points.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, TailError};
use crate::sample::{sort_descending, OrderedSample};
use crate::seed::SeedSpec;

/// A heavy-tailed distribution with known tail index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Pareto { sigma: f64, alpha: f64 },
    Frechet { alpha: f64 },
    Burr { eta: f64, lambda: f64, tau: f64 },
    AbsT { dof: f64 },
}

impl ModelSpec {
    pub fn pareto(sigma: f64, alpha: f64) -> Result<Self> {
        Self::Pareto { sigma, alpha }.validated()
    }

    pub fn frechet(alpha: f64) -> Result<Self> {
        Self::Frechet { alpha }.validated()
    }

    pub fn burr(eta: f64, lambda: f64, tau: f64) -> Result<Self> {
        Self::Burr { eta, lambda, tau }.validated()
    }

    pub fn abs_t(dof: f64) -> Result<Self> {
        Self::AbsT { dof }.validated()
    }

    /// Checks that every parameter is finite and strictly positive.
    pub fn validated(self) -> Result<Self> {
        let params: &[(&str, f64)] = match &self {
            ModelSpec::Pareto { sigma, alpha } => &[("sigma", *sigma), ("alpha", *alpha)],
            ModelSpec::Frechet { alpha } => &[("alpha", *alpha)],
            ModelSpec::Burr { eta, lambda, tau } => {
                &[("eta", *eta), ("lambda", *lambda), ("tau", *tau)]
            }
            ModelSpec::AbsT { dof } => &[("dof", *dof)],
        };
        for (name, v) in params {
            if !(v.is_finite() && *v > 0.0) {
                return Err(TailError::domain(format!(
                    "{self}: parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(self)
    }

    /// Tail index of the family.
    pub fn xi(&self) -> f64 {
        match *self {
            ModelSpec::Pareto { alpha, .. } | ModelSpec::Frechet { alpha } => 1.0 / alpha,
            ModelSpec::Burr { tau, .. } => 1.0 / tau,
            ModelSpec::AbsT { dof } => 1.0 / dof,
        }
    }

    /// Inverse CDF, `F^{-1}(p)` for `0 < p < 1`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.validated()?;
        if !(p > 0.0 && p < 1.0) {
            return Err(TailError::domain(format!(
                "probability must lie in (0, 1), got {p}"
            )));
        }
        Ok(match *self {
            ModelSpec::Pareto { sigma, alpha } => sigma * (1.0 - p).powf(-1.0 / alpha),
            ModelSpec::Frechet { alpha } => (-p.ln()).powf(-1.0 / alpha),
            ModelSpec::Burr { eta, lambda, tau } => burr_from_survival(eta, lambda, tau, 1.0 - p),
            ModelSpec::AbsT { dof } => abs_t_quantile(dof, p),
        })
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            ModelSpec::Pareto { sigma, alpha } => {
                if x <= sigma {
                    0.0
                } else {
                    1.0 - (x / sigma).powf(-alpha)
                }
            }
            ModelSpec::Frechet { alpha } => (-x.powf(-alpha)).exp(),
            ModelSpec::Burr { eta, lambda, tau } => {
                1.0 - (eta / (eta + x.powf(tau / lambda))).powf(lambda)
            }
            ModelSpec::AbsT { dof } => {
                if dof == 1.0 {
                    std::f64::consts::FRAC_2_PI * x.atan()
                } else {
                    2.0 * students_t(dof).cdf(x) - 1.0
                }
            }
        }
    }

    /// Maps one uniform draw `u` in (0, 1) to a variate by inverse transform.
    ///
    /// The level is a survival level for Pareto and Burr (`sigma * u^(-1/alpha)`)
    /// and a CDF level for Frechet (`(-ln u)^(-1/alpha)`); both give the correct
    /// law for uniform `u`. `|T|` has no closed form and uses [`ModelSpec::quantile`].
    pub fn from_uniform(&self, u: f64) -> f64 {
        match *self {
            ModelSpec::Pareto { sigma, alpha } => sigma * u.powf(-1.0 / alpha),
            ModelSpec::Frechet { alpha } => (-u.ln()).powf(-1.0 / alpha),
            ModelSpec::Burr { eta, lambda, tau } => burr_from_survival(eta, lambda, tau, u),
            ModelSpec::AbsT { dof } => abs_t_quantile(dof, u),
        }
    }

    /// Draws `n` independent values and returns them sorted descending.
    pub fn sample(&self, n: usize, seed: SeedSpec) -> Result<OrderedSample> {
        self.validated()?;
        if n < OrderedSample::MIN_LEN {
            return Err(TailError::Size {
                min: OrderedSample::MIN_LEN,
                got: n,
            });
        }
        let mut rng = seed.rng();
        let mut values = Vec::with_capacity(n);
        match *self {
            ModelSpec::AbsT { dof } => {
                let chi = ChiSquared::new(dof)
                    .map_err(|e| TailError::domain(format!("chi-square({dof}): {e}")))?;
                while values.len() < n {
                    let z: f64 = rng.sample(StandardNormal);
                    let v = chi.sample(&mut rng);
                    let x = (z / (v / dof).sqrt()).abs();
                    // A zero or overflowed draw has probability zero; skip it.
                    if x.is_finite() && x > 0.0 {
                        values.push(x);
                    }
                }
            }
            _ => {
                while values.len() < n {
                    let u: f64 = rng.sample(Open01);
                    let x = self.from_uniform(u);
                    if x.is_finite() && x > 0.0 {
                        values.push(x);
                    }
                }
            }
        }
        sort_descending(&mut values);
        OrderedSample::from_descending(values)
    }
}

fn burr_from_survival(eta: f64, lambda: f64, tau: f64, survival: f64) -> f64 {
    (eta * (survival.powf(-1.0 / lambda) - 1.0)).powf(lambda / tau)
}

fn students_t(dof: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, dof).expect("validated degrees of freedom")
}

fn abs_t_quantile(dof: f64, p: f64) -> f64 {
    if dof == 1.0 {
        // Half-Cauchy: F(x) = (2/pi) atan(x).
        (std::f64::consts::FRAC_PI_2 * p).tan()
    } else {
        students_t(dof).inverse_cdf(0.5 * (1.0 + p))
    }
}

/// Free-function form of [`ModelSpec::sample`].
pub fn sample(model: &ModelSpec, n: usize, seed: SeedSpec) -> Result<OrderedSample> {
    model.sample(n, seed)
}

/// Free-function form of [`ModelSpec::quantile`].
pub fn quantile(model: &ModelSpec, p: f64) -> Result<f64> {
    model.quantile(p)
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Pareto { sigma, alpha } => write!(f, "Pareto({sigma},{alpha})"),
            ModelSpec::Frechet { alpha } => write!(f, "Frechet({alpha})"),
            ModelSpec::Burr { eta, lambda, tau } => write!(f, "Burr({eta},{lambda},{tau})"),
            ModelSpec::AbsT { dof } => write!(f, "|T|({dof})"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = TailError;

    /// Parses `pareto:1,1`, `frechet:2`, `burr:1,0.5,1` or `abst:1`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| TailError::domain(format!("model '{s}': expected family:params")))?;
        let params = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| TailError::domain(format!("model '{s}': bad parameter '{a}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let arity = |want: usize| {
            if params.len() == want {
                Ok(())
            } else {
                Err(TailError::domain(format!(
                    "model '{s}': expected {want} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "pareto" => {
                arity(2)?;
                ModelSpec::pareto(params[0], params[1])
            }
            "frechet" => {
                arity(1)?;
                ModelSpec::frechet(params[0])
            }
            "burr" => {
                arity(3)?;
                ModelSpec::burr(params[0], params[1], params[2])
            }
            "abst" | "t" | "abs_t" => {
                arity(1)?;
                ModelSpec::abs_t(params[0])
            }
            other => Err(TailError::domain(format!("unknown model family '{other}'"))),
        }
    }
}

/// How a clean sample is corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contamination {
    /// `X_(n-i+1) <- X_(n-k0) + (X_(n-i+1) - X_(n-k0))^l` for the top `k0`.
    ExponentInflate { l: f64 },
    /// `X_(n-i+1) <- X_(n-k0) + c (X_(n-i+1) - X_(n-k0))` for the top `k0`.
    ScaleInflate { c: f64 },
    /// Each point is independently rescaled by `contaminant_scale` with
    /// probability `epsilon`. Applied to a `Pareto(sigma, alpha)` sample this
    /// draws from `(1 - epsilon) Pareto(sigma, alpha) + epsilon Pareto(sigma * scale, alpha)`.
    Mixture { epsilon: f64, contaminant_scale: f64 },
    /// A uniformly random subset of `round(s * n)` points is multiplied by `factor`.
    RandomMultiply { s: f64, factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    #[serde(flatten)]
    pub kind: Contamination,
    /// Number of top order statistics perturbed; ignored by the random kinds.
    #[serde(default)]
    pub k0: usize,
}

impl ContaminationSpec {
    pub fn new(kind: Contamination, k0: usize) -> Result<Self> {
        let spec = Self { kind, k0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn exponent(l: f64, k0: usize) -> Result<Self> {
        Self::new(Contamination::ExponentInflate { l }, k0)
    }

    pub fn scale(c: f64, k0: usize) -> Result<Self> {
        Self::new(Contamination::ScaleInflate { c }, k0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(TailError::domain(format!("{name} must be positive, got {v}")))
            }
        };
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(TailError::domain(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        match self.kind {
            Contamination::ExponentInflate { l } => positive("L", l),
            Contamination::ScaleInflate { c } => positive("C", c),
            Contamination::Mixture {
                epsilon,
                contaminant_scale,
            } => unit("epsilon", epsilon).and(positive("contaminant scale", contaminant_scale)),
            Contamination::RandomMultiply { s, factor } => {
                unit("s", s).and(positive("factor", factor))
            }
        }
    }

    /// True when the outcome does not depend on the random stream.
    pub fn is_deterministic(&self) -> bool {
        matches!(
            self.kind,
            Contamination::ExponentInflate { .. } | Contamination::ScaleInflate { .. }
        )
    }

    /// Number of top order statistics that are outliers by construction.
    pub fn planted_outliers(&self) -> usize {
        if self.is_deterministic() {
            self.k0
        } else {
            0
        }
    }
}

impl fmt::Display for ContaminationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Contamination::ExponentInflate { l } => write!(f, "L={l},k0={}", self.k0),
            Contamination::ScaleInflate { c } => write!(f, "C={c},k0={}", self.k0),
            Contamination::Mixture {
                epsilon,
                contaminant_scale,
            } => write!(f, "mixture(eps={epsilon},scale={contaminant_scale})"),
            Contamination::RandomMultiply { s, factor } => {
                write!(f, "multiply(s={s},factor={factor})")
            }
        }
    }
}

/// Applies `spec` and returns the corrupted sample, re-sorted descending.
pub fn contaminate(
    sample: &OrderedSample,
    spec: &ContaminationSpec,
    seed: SeedSpec,
) -> Result<OrderedSample> {
    contaminate_counted(sample, spec, seed).map(|(s, _)| s)
}

/// Like [`contaminate`] but also reports how many points were altered.
pub fn contaminate_counted(
    sample: &OrderedSample,
    spec: &ContaminationSpec,
    seed: SeedSpec,
) -> Result<(OrderedSample, usize)> {
    spec.validate()?;
    let n = sample.len();
    let mut values = sample.values().to_vec();
    let touched = match spec.kind {
        Contamination::ExponentInflate { l } => {
            perturb_top(&mut values, spec.k0, |d| d.powf(l))?;
            spec.k0
        }
        Contamination::ScaleInflate { c } => {
            perturb_top(&mut values, spec.k0, |d| c * d)?;
            spec.k0
        }
        Contamination::Mixture {
            epsilon,
            contaminant_scale,
        } => {
            let mut rng = seed.rng();
            let mut count = 0;
            for x in values.iter_mut() {
                if rng.random::<f64>() < epsilon {
                    *x *= contaminant_scale;
                    count += 1;
                }
            }
            count
        }
        Contamination::RandomMultiply { s, factor } => {
            let mut rng = seed.rng();
            let m = ((s * n as f64).round() as usize).min(n);
            for i in rand::seq::index::sample(&mut rng, n, m) {
                values[i] *= factor;
            }
            m
        }
    };
    sort_descending(&mut values);
    Ok((OrderedSample::from_descending(values)?, touched))
}

fn perturb_top(values: &mut [f64], k0: usize, map: impl Fn(f64) -> f64) -> Result<()> {
    let n = values.len();
    if k0 >= n {
        return Err(TailError::index(format!(
            "contamination needs k0 < n, got k0 = {k0}, n = {n}"
        )));
    }
    let base = values[k0];
    for x in &mut values[..k0] {
        *x = base + map(*x - base);
    }
    Ok(())
}
