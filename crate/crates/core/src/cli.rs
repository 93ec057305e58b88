//! Command implementations behind the `trimhill` binary. Each returns a
//! serializable result; the binary adds the manifest and picks the format.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::estimators::{alpha_trim, plot_series, trim_path, trimmed_hill, PlotRow};
use crate::ewst::{flag_outliers, select_k0, EwstConfig, EwstStep, Outlier};
use crate::kselect::{default_k, joint_select, Iterate, KSelectConfig};
use crate::manifest::RunManifest;
use crate::sample::OrderedSample;

/// `k` used when none is given: `floor(2 sqrt(n))`, capped at `n - 1`.
pub fn resolve_k(sample: &OrderedSample, k: Option<usize>) -> usize {
    k.unwrap_or_else(|| default_k(sample.len()).min(sample.len() - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub xi_hat: f64,
    pub se: f64,
    /// `(1 - 2/n) / xi(k0, n-1)`; null when that estimate is zero.
    pub alpha_trim: Option<f64>,
    pub k0: usize,
    pub k: usize,
    pub n: usize,
}

pub fn cmd_fit(sample: &OrderedSample, k0: usize, k: Option<usize>) -> Result<FitOutput> {
    let k = resolve_k(sample, k);
    let est = trimmed_hill(sample, k0, k)?;
    Ok(FitOutput {
        xi_hat: est.xi_hat,
        se: est.se,
        alpha_trim: alpha_trim(sample, k0).ok(),
        k0,
        k,
        n: est.n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptOutput {
    pub k0_hat: usize,
    pub k: usize,
    pub xi_hat: f64,
    pub se: f64,
    pub outliers: Vec<Outlier>,
    pub trace: Vec<EwstStep>,
}

pub fn cmd_adapt(sample: &OrderedSample, k: Option<usize>, cfg: &EwstConfig) -> Result<AdaptOutput> {
    cfg.validate()?;
    let k = resolve_k(sample, k);
    let outcome = select_k0(sample, k, cfg)?;
    let est = trimmed_hill(sample, outcome.k0_hat, k)?;
    Ok(AdaptOutput {
        k0_hat: outcome.k0_hat,
        k,
        xi_hat: est.xi_hat,
        se: est.se,
        outliers: flag_outliers(sample, &outcome),
        trace: outcome.trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectOutput {
    pub k0_hat: usize,
    pub k: usize,
    pub outliers: Vec<Outlier>,
}

pub fn cmd_detect(sample: &OrderedSample, k: Option<usize>, cfg: &EwstConfig) -> Result<DetectOutput> {
    let a = cmd_adapt(sample, k, cfg)?;
    Ok(DetectOutput {
        k0_hat: a.k0_hat,
        k: a.k,
        outliers: a.outliers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoOutput {
    pub k0_hat: usize,
    pub k_hat: usize,
    pub xi_hat: f64,
    pub se: f64,
    pub iterations: Vec<Iterate>,
    pub converged: bool,
}

pub fn cmd_auto(sample: &OrderedSample, kcfg: &KSelectConfig, ecfg: &EwstConfig) -> Result<AutoOutput> {
    let sel = joint_select(sample, kcfg, ecfg)?;
    let est = trimmed_hill(sample, sel.k0_hat, sel.k_hat)?;
    Ok(AutoOutput {
        k0_hat: sel.k0_hat,
        k_hat: sel.k_hat,
        xi_hat: est.xi_hat,
        se: est.se,
        iterations: sel.iterations,
        converged: sel.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotOutput {
    pub k: usize,
    pub rows: Vec<PlotRow>,
}

pub fn cmd_plot(sample: &OrderedSample, k: Option<usize>) -> Result<PlotOutput> {
    let k = resolve_k(sample, k);
    Ok(PlotOutput {
        k,
        rows: plot_series(&trim_path(sample, k)?),
    })
}

/// A result together with the manifest of the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub manifest: RunManifest,
    #[serde(flatten)]
    pub result: T,
}

pub fn to_json<T: Serialize>(doc: &Document<T>) -> Result<String> {
    serde_json::to_string_pretty(doc)
        .map(|s| s + "\n")
        .map_err(|e| TailError::Io(e.to_string()))
}

/// `# manifest: {...}` comment line leading CSV output.
pub fn manifest_comment(m: &RunManifest) -> Result<String> {
    serde_json::to_string(m)
        .map(|s| format!("# manifest: {s}\n"))
        .map_err(|e| TailError::Io(e.to_string()))
}

/// Plot rows under the fixed header `k0,xi,lo,hi`.
pub fn plot_csv(plot: &PlotOutput) -> String {
    let mut out = String::from("k0,xi,lo,hi\n");
    for r in &plot.rows {
        out.push_str(&format!("{},{},{},{}\n", r.k0, r.xi, r.lo, r.hi));
    }
    out
}

/// Header line plus one data line from named scalar fields.
pub fn summary_csv(fields: &[(&str, String)]) -> String {
    let names: Vec<&str> = fields.iter().map(|(n, _)| *n).collect();
    let values: Vec<&str> = fields.iter().map(|(_, v)| v.as_str()).collect();
    format!("{}\n{}\n", names.join(","), values.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> OrderedSample {
        OrderedSample::new(vec![10.0, 8.0, 4.0, 2.0, 1.0]).unwrap()
    }

    #[test]
    fn fit_fixture() {
        let f = cmd_fit(&fixture(), 1, Some(4)).unwrap();
        assert!((f.xi_hat - 3.0 * 2f64.ln()).abs() < 1e-12);
        let h = cmd_fit(&fixture(), 0, None).unwrap();
        assert_eq!(h.k, 4);
        assert_eq!(h.xi_hat, crate::estimators::hill(&fixture(), 4).unwrap().xi_hat);
        assert!(cmd_fit(&fixture(), 0, Some(5)).unwrap_err().is_validation());
    }

    #[test]
    fn adapt_fixture() {
        let a = cmd_adapt(&fixture(), None, &EwstConfig::default()).unwrap();
        assert_eq!((a.k0_hat, a.k), (0, 4));
        assert!((a.xi_hat - 1.615367).abs() < 5e-7);
        assert_eq!(a.trace.len(), 3);
        let bad = EwstConfig { q: 1.5, ..EwstConfig::default() };
        assert!(cmd_adapt(&fixture(), None, &bad).unwrap_err().is_validation());
    }

    #[test]
    fn plot_rows() {
        let p = cmd_plot(&fixture(), Some(4)).unwrap();
        let csv = plot_csv(&p);
        assert!(csv.starts_with("k0,xi,lo,hi\n"));
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(cmd_plot(&fixture(), Some(1)).unwrap().rows.len(), 1);
    }

    #[test]
    fn documents_round_trip() {
        let m = RunManifest::new("fit", 1).flag("k", 4);
        let doc = Document {
            manifest: m.clone(),
            result: cmd_fit(&fixture(), 1, Some(4)).unwrap(),
        };
        let back: Document<FitOutput> = serde_json::from_str(&to_json(&doc).unwrap()).unwrap();
        assert_eq!(back, doc);
        let doc = Document {
            manifest: m.clone(),
            result: cmd_adapt(&fixture(), None, &EwstConfig::default()).unwrap(),
        };
        let back: Document<AdaptOutput> = serde_json::from_str(&to_json(&doc).unwrap()).unwrap();
        assert_eq!(back, doc);
        let big = crate::models::ModelSpec::pareto(1.0, 1.0)
            .unwrap()
            .sample(300, crate::seed::SeedSpec::new(1, 1))
            .unwrap();
        let doc = Document {
            manifest: m,
            result: cmd_auto(&big, &KSelectConfig::default(), &EwstConfig::default()).unwrap(),
        };
        let back: Document<AutoOutput> = serde_json::from_str(&to_json(&doc).unwrap()).unwrap();
        assert_eq!(back, doc);
    }
}
