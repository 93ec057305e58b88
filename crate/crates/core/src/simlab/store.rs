//! JSON and CSV persistence of experiment results.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Result, TailError};

use super::{config_hash, MetricsReport, SuiteReport};

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| TailError::Io(e.to_string()))
}

/// File name `<name>-<config hash>.json` of a report.
pub fn report_file_name(report: &MetricsReport) -> String {
    format!("{}-{}.json", sanitize(&report.config.name), report.config.hash())
}

/// Keeps names filesystem-friendly.
pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// A serialized document: the payload plus an optional manifest.
#[derive(Serialize)]
struct Document<'a, T: Serialize, M: Serialize> {
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<&'a M>,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_report<M: Serialize>(
    dir: &Path,
    report: &MetricsReport,
    manifest: Option<&M>,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(report_file_name(report));
    let doc = Document {
        manifest,
        body: report,
    };
    std::fs::write(&path, to_json(&doc)? + "\n")?;
    Ok(path)
}

/// Writes every cell report, the suite JSON and the rendered CSV table.
/// A manifest, if given, leads the CSV as a `# manifest: ` comment line.
pub fn write_suite<M: Serialize>(
    dir: &Path,
    suite: &SuiteReport,
    manifest: Option<&M>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for cell in &suite.cells {
        if let Some(r) = &cell.report {
            written.push(write_report(dir, r, manifest)?);
        }
    }
    let stem = format!("{}-{}-{}", suite.name, suite.scale, config_hash(&(suite.name, suite.scale, suite.master_seed)));
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(
        &json,
        to_json(&Document {
            manifest,
            body: suite,
        })? + "\n",
    )?;
    written.push(json);
    let csv = dir.join(format!("{stem}.csv"));
    let mut text = String::new();
    if let Some(m) = manifest {
        let line = serde_json::to_string(m).map_err(|e| TailError::Io(e.to_string()))?;
        text.push_str(&format!("# manifest: {line}\n"));
    }
    text.push_str(&suite.to_csv());
    std::fs::write(&csv, text)?;
    written.push(csv);
    Ok(written)
}
