use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use trimhill::cli::{self, Document};
use trimhill::ewst::{EwstConfig, StartRule};
use trimhill::io::{ingest, Column};
use trimhill::kselect::{KSelectConfig, RRule, RhoMode};
use trimhill::manifest::RunManifest;
use trimhill::models::{contaminate, Contamination, ContaminationSpec, ModelSpec};
use trimhill::sample::OrderedSample;
use trimhill::seed::SeedSpec;
use trimhill::simlab::{self, store, KStarCache, Scale, SuiteName};
use trimhill::TailError;

#[derive(Parser)]
#[command(name = "trimhill", version, about = "Robust tail-index estimation with the trimmed Hill estimator")]
struct Cli {
    /// Master seed for simulation and sampling commands.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// Input file (newline-delimited numbers or CSV); stdin when omitted or "-".
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// CSV column to read, by header name or 0-based index.
    #[arg(long, global = true)]
    column: Option<String>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Trimmed Hill estimate at fixed (k0, k).
    Fit {
        #[arg(long, default_value_t = 0)]
        k0: usize,
        /// Tail size; defaults to floor(2 sqrt(n)).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Select k0 by sequential testing and refit.
    Adapt(EwstArgs),
    /// Like adapt, but report only the flagged outliers.
    Detect(EwstArgs),
    /// Jointly select k0 and k.
    Auto(AutoArgs),
    /// Trimmed Hill plot data: k0, estimate and one-standard-error band.
    Plot {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run a named simulation suite or an experiment config file.
    Simulate {
        /// Suite name (h0-table, inflated-l, inflated-c, deflated-l, deflated-c, xi-sweep, k0-sweep, joint-k0-k).
        #[arg(long, conflicts_with = "config")]
        suite: Option<String>,
        /// JSON experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        scale: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Directory for cached oracle k* searches.
        #[arg(long)]
        kstar_cache: Option<PathBuf>,
    },
    /// Draw a sample from a model, optionally contaminated.
    Sample {
        /// e.g. pareto:1,1  frechet:1  burr:1,0.5,1  abst:1
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        /// Inflate the top k0 values by exponent L.
        #[arg(long, conflicts_with = "c")]
        l: Option<f64>,
        /// Inflate the top k0 values by factor C.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 0)]
        k0: usize,
    },
}

#[derive(Args)]
struct EwstArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    #[arg(long, default_value_t = 1.2)]
    a: f64,
    /// Start the scan at min(k - 2, ceil(FCAP sqrt(k))) instead of k - 2.
    #[arg(long, num_args = 0..=1, default_missing_value = "10")]
    fcap: Option<f64>,
}

impl EwstArgs {
    fn config(&self) -> Result<EwstConfig, TailError> {
        let rule = match self.fcap {
            Some(scale) => StartRule::Capped { scale },
            None => StartRule::Full,
        };
        EwstConfig::new(self.q, self.a, rule)
    }

    fn record(&self, m: RunManifest) -> RunManifest {
        let m = m.flag("q", self.q).flag("a", self.a);
        let m = match self.k {
            Some(k) => m.flag("k", k),
            None => m,
        };
        match self.fcap {
            Some(f) => m.flag("fcap", f),
            None => m,
        }
    }
}

#[derive(Args)]
struct AutoArgs {
    /// Fixed second-order parameter.
    #[arg(long, default_value_t = 1.0, conflicts_with = "estimate_rho")]
    rho: f64,
    /// Estimate rho from the data instead.
    #[arg(long)]
    estimate_rho: bool,
    #[arg(long, default_value_t = 0.6)]
    lambda: f64,
    #[arg(long, default_value_t = 0.7)]
    eps: f64,
    #[arg(long, default_value_t = 2)]
    tau: usize,
    #[arg(long, default_value_t = 20)]
    max_iter: usize,
    /// Threshold r = R_SCALE * xi0 * n^(1/4).
    #[arg(long, default_value_t = 2.5)]
    r_scale: f64,
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    #[arg(long, default_value_t = 1.2)]
    a: f64,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<TailError> for Failure {
    fn from(e: TailError) -> Self {
        Failure {
            code: if e.is_validation() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        TailError::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_input(cli: &Cli) -> Result<(OrderedSample, Vec<u8>), TailError> {
    let column = cli.column.as_deref().map(Column::parse);
    match &cli.input {
        Some(p) if p.as_os_str() != "-" => {
            let file = File::open(p).map_err(|e| TailError::Io(format!("{}: {e}", p.display())))?;
            ingest(file, column.as_ref())
        }
        _ => ingest(io::stdin().lock(), column.as_ref()),
    }
}

fn manifest(cli: &Cli, command: &str) -> RunManifest {
    let mut m = RunManifest::new(command, cli.seed);
    if let Some(p) = &cli.input {
        m = m.flag("input", p.display());
    }
    if let Some(c) = &cli.column {
        m = m.flag("column", c);
    }
    m
}

fn emit(text: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn emit_doc<T: Serialize>(
    m: RunManifest,
    result: T,
    format: Format,
    csv: impl FnOnce(&T) -> String,
) -> Result<(), Failure> {
    let text = match format {
        Format::Json => cli::to_json(&Document { manifest: m, result })?,
        Format::Csv => cli::manifest_comment(&m)? + &csv(&result),
    };
    emit(&text)
}

fn outliers_field(list: &[trimhill::ewst::Outlier]) -> String {
    list.iter()
        .map(|o| o.value.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn run(cli: Cli) -> Result<(), Failure> {
    let json = cli.format.unwrap_or(Format::Json);
    match &cli.command {
        Command::Fit { k0, k } => {
            let (sample, bytes) = read_input(&cli)?;
            let mut m = manifest(&cli, "fit").with_input(&bytes).flag("k0", k0);
            if let Some(k) = k {
                m = m.flag("k", k);
            }
            let out = cli::cmd_fit(&sample, *k0, *k)?;
            emit_doc(m, out, json, |o| {
                cli::summary_csv(&[
                    ("xi_hat", o.xi_hat.to_string()),
                    ("se", o.se.to_string()),
                    ("alpha_trim", o.alpha_trim.map_or(String::new(), |a| a.to_string())),
                    ("k0", o.k0.to_string()),
                    ("k", o.k.to_string()),
                    ("n", o.n.to_string()),
                ])
            })
        }
        Command::Adapt(args) | Command::Detect(args) => {
            let detect = matches!(cli.command, Command::Detect(_));
            let cfg = args.config()?;
            let (sample, bytes) = read_input(&cli)?;
            let name = if detect { "detect" } else { "adapt" };
            let m = args.record(manifest(&cli, name).with_input(&bytes));
            if detect {
                let out = cli::cmd_detect(&sample, args.k, &cfg)?;
                emit_doc(m, out, json, |o| {
                    let mut s = String::from("rank,value\n");
                    for x in &o.outliers {
                        s.push_str(&format!("{},{}\n", x.rank, x.value));
                    }
                    s
                })
            } else {
                let out = cli::cmd_adapt(&sample, args.k, &cfg)?;
                emit_doc(m, out, json, |o| {
                    cli::summary_csv(&[
                        ("k0_hat", o.k0_hat.to_string()),
                        ("k", o.k.to_string()),
                        ("xi_hat", o.xi_hat.to_string()),
                        ("se", o.se.to_string()),
                        ("outliers", outliers_field(&o.outliers)),
                    ])
                })
            }
        }
        Command::Auto(a) => {
            let ecfg = EwstConfig::new(a.q, a.a, StartRule::Full)?;
            let kcfg = KSelectConfig {
                r_rule: RRule::Scaled { scale: a.r_scale },
                epsilon: a.eps,
                lambda: a.lambda,
                rho_mode: if a.estimate_rho {
                    RhoMode::Estimated
                } else {
                    RhoMode::Fixed { rho: a.rho }
                },
                tau: a.tau,
                max_iter: a.max_iter,
                ..KSelectConfig::default()
            };
            kcfg.validate()?;
            let (sample, bytes) = read_input(&cli)?;
            let m = manifest(&cli, "auto")
                .with_input(&bytes)
                .flag("rho", if a.estimate_rho { "estimated".to_string() } else { a.rho.to_string() })
                .flag("lambda", a.lambda)
                .flag("eps", a.eps)
                .flag("tau", a.tau)
                .flag("max_iter", a.max_iter)
                .flag("r_scale", a.r_scale)
                .flag("q", a.q)
                .flag("a", a.a);
            let out = cli::cmd_auto(&sample, &kcfg, &ecfg)?;
            emit_doc(m, out, json, |o| {
                cli::summary_csv(&[
                    ("k0_hat", o.k0_hat.to_string()),
                    ("k_hat", o.k_hat.to_string()),
                    ("xi_hat", o.xi_hat.to_string()),
                    ("se", o.se.to_string()),
                    ("iterations", o.iterations.len().to_string()),
                    ("converged", o.converged.to_string()),
                ])
            })
        }
        Command::Plot { k } => {
            let (sample, bytes) = read_input(&cli)?;
            let mut m = manifest(&cli, "plot").with_input(&bytes);
            if let Some(k) = k {
                m = m.flag("k", k);
            }
            let out = cli::cmd_plot(&sample, *k)?;
            emit_doc(m, out, cli.format.unwrap_or(Format::Csv), cli::plot_csv)
        }
        Command::Simulate {
            suite,
            config,
            scale,
            out,
            kstar_cache,
        } => {
            let scale: Scale = scale.parse()?;
            let cache = match kstar_cache {
                Some(dir) => KStarCache::with_dir(dir),
                None => KStarCache::in_memory(),
            };
            let mut m = manifest(&cli, "simulate")
                .flag("scale", scale)
                .flag("out", out.display());
            let files = match (suite, config) {
                (Some(name), None) => {
                    let name: SuiteName = name.parse()?;
                    m = m.flag("suite", name);
                    let report = simlab::suites::table_suite_with(name, scale, cli.seed, &cache);
                    store::write_suite(out, &report, Some(&m))?
                }
                (None, Some(path)) => {
                    let text = std::fs::read(path)
                        .map_err(|e| TailError::Io(format!("{}: {e}", path.display())))?;
                    let cfg: simlab::ExperimentConfig = serde_json::from_slice(&text)
                        .map_err(|e| TailError::Parse {
                            line: e.line(),
                            message: e.to_string(),
                        })?;
                    m = m.flag("config", path.display()).with_input(&text);
                    let report = simlab::run_experiment_cached(&cfg, &cache)?;
                    vec![store::write_report(out, &report, Some(&m))?]
                }
                _ => {
                    let names: Vec<&str> = SuiteName::ALL.iter().map(|s| s.as_str()).collect();
                    return Err(TailError::Domain(format!(
                        "simulate needs --suite or --config; suites: {}",
                        names.join(", ")
                    ))
                    .into());
                }
            };
            #[derive(Serialize)]
            struct Written {
                files: Vec<String>,
            }
            let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
            emit_doc(m, Written { files }, json, |w| {
                let mut s = String::from("file\n");
                for f in &w.files {
                    s.push_str(f);
                    s.push('\n');
                }
                s
            })
        }
        Command::Sample { model, n, l, c, k0 } => {
            let spec: ModelSpec = model.parse()?;
            let seed = SeedSpec::new(cli.seed, 0);
            let mut sample = spec.sample(*n, seed)?;
            let mut m = manifest(&cli, "sample")
                .flag("model", spec)
                .flag("n", n);
            let kind = match (l, c) {
                (Some(l), _) => Some(Contamination::ExponentInflate { l: *l }),
                (_, Some(c)) => Some(Contamination::ScaleInflate { c: *c }),
                _ => None,
            };
            if let Some(kind) = kind {
                let cs = ContaminationSpec::new(kind, *k0)?;
                m = m.flag("contamination", cs);
                sample = contaminate(&sample, &cs, seed.derive(1))?;
            }
            #[derive(Serialize)]
            struct Values {
                values: Vec<f64>,
            }
            match cli.format {
                Some(Format::Json) => emit(&cli::to_json(&Document {
                    manifest: m,
                    result: Values {
                        values: sample.into_values(),
                    },
                })?),
                _ => {
                    let mut s = cli::manifest_comment(&m)?;
                    for v in sample.values() {
                        s.push_str(&format!("{v}\n"));
                    }
                    emit(&s)
                }
            }
        }
    }
}
