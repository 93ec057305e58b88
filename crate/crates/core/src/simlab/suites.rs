//! Named experiment grids reproducing the simulation tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::kselect::RhoMode;
use crate::models::{Contamination, ContaminationSpec, ModelSpec};

use super::{
    run_experiment_cached, EstimatorSpec, ExperimentConfig, KPolicy, KStarCache, MetricsReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    H0Table,
    InflatedL,
    InflatedC,
    DeflatedL,
    DeflatedC,
    XiSweep,
    K0Sweep,
    JointK0K,
}

impl SuiteName {
    pub const ALL: [SuiteName; 8] = [
        SuiteName::H0Table,
        SuiteName::InflatedL,
        SuiteName::InflatedC,
        SuiteName::DeflatedL,
        SuiteName::DeflatedC,
        SuiteName::XiSweep,
        SuiteName::K0Sweep,
        SuiteName::JointK0K,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteName::H0Table => "h0-table",
            SuiteName::InflatedL => "inflated-l",
            SuiteName::InflatedC => "inflated-c",
            SuiteName::DeflatedL => "deflated-l",
            SuiteName::DeflatedC => "deflated-c",
            SuiteName::XiSweep => "xi-sweep",
            SuiteName::K0Sweep => "k0-sweep",
            SuiteName::JointK0K => "joint-k0-k",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = TailError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str().replace('-', "") == norm || format!("{n:?}").to_ascii_lowercase() == norm)
            .ok_or_else(|| {
                let names: Vec<&str> = SuiteName::ALL.iter().map(|n| n.as_str()).collect();
                TailError::domain(format!(
                    "unknown suite '{s}'; valid suites: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Replication budget of a suite run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl Scale {
    pub fn replications(&self) -> usize {
        match self {
            Scale::Desk => 2000,
            Scale::Paper => 5000,
        }
    }

    /// Factor by which Monte Carlo tolerance bands widen relative to paper scale.
    pub fn band_factor(&self) -> f64 {
        (Scale::Paper.replications() as f64 / self.replications() as f64).sqrt()
    }
}

impl FromStr for Scale {
    type Err = TailError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(TailError::domain(format!("unknown scale '{s}'; use desk or paper"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

/// Quantity read off a report into a table cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// ARE against the classic Hill estimator, in percent.
    AreHillPercent,
    AreTrim,
    AreHill,
}

impl Metric {
    pub fn label(&self) -> &'static str {
        match self {
            Metric::AreHillPercent => "ARE_HILL(%)",
            Metric::AreTrim => "ARE_TRIM",
            Metric::AreHill => "ARE_HILL",
        }
    }

    pub fn read(&self, report: &MetricsReport) -> Option<f64> {
        match self {
            Metric::AreHillPercent => report.are_hill.map(|e| 100.0 * e.value),
            Metric::AreTrim => report.are_trim.map(|e| e.value),
            Metric::AreHill => report.are_hill.map(|e| e.value),
        }
    }
}

/// One grid point of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub row: String,
    pub column: String,
    pub metrics: Vec<Metric>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCell {
    pub row: String,
    pub column: String,
    pub metrics: Vec<Metric>,
    pub report: Option<MetricsReport>,
    /// Diagnostic when the cell's experiment aborted.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: SuiteName,
    pub scale: Scale,
    pub master_seed: u64,
    pub row_header: String,
    pub cells: Vec<SuiteCell>,
}

impl SuiteReport {
    pub fn cell(&self, row: &str, column: &str) -> Option<&SuiteCell> {
        self.cells.iter().find(|c| c.row == row && c.column == column)
    }

    pub fn value(&self, row: &str, column: &str, metric: Metric) -> Option<f64> {
        self.cell(row, column)?.report.as_ref().and_then(|r| metric.read(r))
    }

    /// Wide table: one line per (row, metric), one column per grid column.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(&str, Metric)> = Vec::new();
        let mut columns: Vec<&str> = Vec::new();
        for c in &self.cells {
            for &m in &c.metrics {
                if !rows.contains(&(c.row.as_str(), m)) {
                    rows.push((c.row.as_str(), m));
                }
            }
            if !columns.contains(&c.column.as_str()) {
                columns.push(&c.column);
            }
        }
        let mut out = String::new();
        out.push_str(&csv_field(&self.row_header));
        out.push_str(",metric");
        for col in &columns {
            out.push(',');
            out.push_str(&csv_field(col));
        }
        out.push('\n');
        for (row, metric) in rows {
            out.push_str(&csv_field(row));
            out.push(',');
            out.push_str(metric.label());
            for col in &columns {
                out.push(',');
                let v = self
                    .cell(row, col)
                    .filter(|c| c.metrics.contains(&metric))
                    .and_then(|c| c.report.as_ref())
                    .and_then(|r| metric.read(r));
                match v {
                    Some(v) => out.push_str(&format!("{v:.4}")),
                    None if self.cell(row, col).is_some_and(|c| c.metrics.contains(&metric)) => {
                        out.push_str("NA")
                    }
                    None => {}
                }
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Default master seed for suite runs.
pub const SUITE_SEED: u64 = 20_180_101;

const SIZES: [usize; 3] = [100, 200, 500];

fn unit_models() -> [ModelSpec; 4] {
    [
        ModelSpec::Pareto {
            sigma: 1.0,
            alpha: 1.0,
        },
        ModelSpec::Frechet { alpha: 1.0 },
        ModelSpec::Burr {
            eta: 1.0,
            lambda: 0.5,
            tau: 1.0,
        },
        ModelSpec::AbsT { dof: 1.0 },
    ]
}

fn with_tail(model: ModelSpec, xi: f64) -> ModelSpec {
    let a = 1.0 / xi;
    match model {
        ModelSpec::Pareto { sigma, .. } => ModelSpec::Pareto { sigma, alpha: a },
        ModelSpec::Frechet { .. } => ModelSpec::Frechet { alpha: a },
        ModelSpec::Burr { eta, lambda, .. } => ModelSpec::Burr { eta, lambda, tau: a },
        ModelSpec::AbsT { .. } => ModelSpec::AbsT { dof: a },
    }
}

fn family(model: &ModelSpec) -> &'static str {
    match model {
        ModelSpec::Pareto { .. } => "Pareto",
        ModelSpec::Frechet { .. } => "Frechet",
        ModelSpec::Burr { .. } => "Burr",
        ModelSpec::AbsT { .. } => "|T|",
    }
}

fn fixed_k_config(
    suite: SuiteName,
    model: ModelSpec,
    n: usize,
    contamination: Option<ContaminationSpec>,
    scale: Scale,
    seed: u64,
    tag: &str,
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        format!("{suite}-{model}-n{n}-{tag}"),
        model,
        n,
        KPolicy::OracleKStar,
    );
    cfg.contamination = contamination;
    cfg.replications = scale.replications();
    cfg.master_seed = seed;
    cfg
}

/// The grid of a suite, without running it.
pub fn suite_cells(name: SuiteName, scale: Scale, seed: u64) -> Vec<CellSpec> {
    let mut cells = Vec::new();
    let mut push = |row: String, column: String, metrics: Vec<Metric>, config: ExperimentConfig| {
        cells.push(CellSpec {
            row,
            column,
            metrics,
            config,
        })
    };
    let top = |kind: Contamination, k0: usize| Some(ContaminationSpec { kind, k0 });
    match name {
        SuiteName::H0Table => {
            for n in SIZES {
                for model in unit_models() {
                    let cfg = fixed_k_config(name, model, n, None, scale, seed, "h0");
                    push(n.to_string(), model.to_string(), vec![Metric::AreHillPercent], cfg);
                }
            }
        }
        SuiteName::InflatedL | SuiteName::InflatedC | SuiteName::DeflatedL | SuiteName::DeflatedC => {
            let (grid, symbol): (&[f64], &str) = match name {
                SuiteName::InflatedL => (&[1.2, 1.5, 5.0, 20.0], "L"),
                SuiteName::InflatedC => (&[2.0, 10.0, 20.0, 100.0], "C"),
                SuiteName::DeflatedL => (&[0.005, 0.05, 0.5], "L"),
                _ => (&[0.001, 0.1, 0.5], "C"),
            };
            let metrics = match name {
                SuiteName::InflatedL | SuiteName::InflatedC => vec![Metric::AreTrim, Metric::AreHill],
                _ => vec![Metric::AreTrim],
            };
            for model in unit_models() {
                for n in SIZES {
                    for &v in grid {
                        let kind = if symbol == "L" {
                            Contamination::ExponentInflate { l: v }
                        } else {
                            Contamination::ScaleInflate { c: v }
                        };
                        let tag = format!("{symbol}{v}");
                        let cfg = fixed_k_config(name, model, n, top(kind, 10), scale, seed, &tag);
                        push(model.to_string(), format!("n={n} {symbol}={v}"), metrics.clone(), cfg);
                    }
                }
            }
        }
        SuiteName::XiSweep => {
            for model in unit_models() {
                for n in [100, 500] {
                    for xi in [0.5, 0.67, 1.0, 2.0, 5.0] {
                        let m = with_tail(model, xi);
                        let c = top(Contamination::ExponentInflate { l: 5.0 }, 10);
                        let cfg = fixed_k_config(name, m, n, c, scale, seed, &format!("xi{xi}"));
                        push(
                            format!("{} n={n}", family(&model)),
                            format!("xi={xi}"),
                            vec![Metric::AreTrim],
                            cfg,
                        );
                    }
                }
            }
        }
        SuiteName::K0Sweep => {
            let n = 500;
            for model in unit_models() {
                for k0 in [1, 5, 10, 15, 20, 40] {
                    let c = top(Contamination::ExponentInflate { l: 5.0 }, k0);
                    let cfg = fixed_k_config(name, model, n, c, scale, seed, &format!("k0{k0}"));
                    push(model.to_string(), format!("k0={k0}"), vec![Metric::AreTrim], cfg);
                }
                for frac in [0.01, 0.02, 0.05, 0.1, 0.2] {
                    // k0 is a fraction of the outlier-free optimal k; the
                    // reference k stays at that value.
                    // Placeholder k0 = 0 is resolved before the cell runs.
                    let c = top(Contamination::ExponentInflate { l: 5.0 }, 0);
                    let cfg = fixed_k_config(name, model, n, c, scale, seed, &format!("frac{frac}"));
                    push(model.to_string(), format!("k0/k={frac}"), vec![Metric::AreTrim], cfg);
                }
            }
        }
        SuiteName::JointK0K => {
            let models = [
                ModelSpec::Frechet { alpha: 5.0 },
                ModelSpec::Frechet { alpha: 2.0 },
                ModelSpec::Frechet { alpha: 1.0 },
                ModelSpec::AbsT { dof: 4.0 },
                ModelSpec::AbsT { dof: 10.0 },
            ];
            for l in [5.0, 20.0] {
                for n in SIZES {
                    for model in models {
                        for (rho, tag) in [(RhoMode::Fixed { rho: 1.0 }, "rho=1"), (RhoMode::Estimated, "rho=est")] {
                            let c = top(Contamination::ExponentInflate { l }, 10);
                            let mut cfg =
                                fixed_k_config(name, model, n, c, scale, seed, &format!("L{l}-{tag}"));
                            cfg.k_policy = KPolicy::JointSelect;
                            cfg.estimators = vec![EstimatorSpec::TrimmedOracle, EstimatorSpec::JointAdaptive];
                            cfg.kselect.rho_mode = rho;
                            push(
                                format!("L={l} n={n}"),
                                format!("{model} {tag}"),
                                vec![Metric::AreTrim],
                                cfg,
                            );
                        }
                    }
                }
            }
        }
    }
    cells
}

/// Resolves cells whose `k0` is a fraction of the clean optimal `k`.
fn resolve_fraction(cell: &mut CellSpec, cache: &KStarCache) -> Result<()> {
    let Some(frac) = cell.column.strip_prefix("k0/k=") else {
        return Ok(());
    };
    let frac: f64 = frac.parse().map_err(|_| TailError::domain("bad fraction"))?;
    let mut clean = cell.config.clone();
    clean.contamination = None;
    let k = cache.get(&clean.kstar_key())?;
    let k0 = ((frac * k as f64).round() as usize).clamp(1, k.saturating_sub(3).max(1));
    if let Some(c) = cell.config.contamination.as_mut() {
        c.k0 = k0;
    }
    cell.config.k_policy = KPolicy::Fixed { k };
    Ok(())
}

/// Runs every cell of a suite; failed cells carry a diagnostic instead of
/// a report.
pub fn table_suite_with(name: SuiteName, scale: Scale, seed: u64, cache: &KStarCache) -> SuiteReport {
    let row_header = match name {
        SuiteName::H0Table => "n",
        SuiteName::JointK0K => "setting",
        _ => "model",
    }
    .to_string();
    let cells = suite_cells(name, scale, seed)
        .into_iter()
        .map(|mut cell| {
            let outcome = resolve_fraction(&mut cell, cache)
                .and_then(|_| run_experiment_cached(&cell.config, cache));
            let (report, error) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SuiteCell {
                row: cell.row,
                column: cell.column,
                metrics: cell.metrics,
                report,
                error,
            }
        })
        .collect();
    SuiteReport {
        name,
        scale,
        master_seed: seed,
        row_header,
        cells,
    }
}

pub fn table_suite(name: SuiteName, scale: Scale) -> SuiteReport {
    table_suite_with(name, scale, SUITE_SEED, &KStarCache::in_memory())
}
