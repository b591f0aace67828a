//! Artifact emission: deterministic JSON reports, RFC-4180 CSV files, and
//! the separate nondeterministic run record.
//!
//! Every JSON and CSV artifact is a pure function of the resolved config;
//! `run_meta.json` carries wall-clock runtime and is the only file allowed
//! to differ between identical runs.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::ResolvedConfig;
use crate::CliError;

/// Collects the artifacts of one run: creates the output directory, tracks
/// the CSV manifest, and serializes JSON with a fixed layout (pretty, LF,
/// one trailing newline) so equal values give equal bytes.
pub struct Artifacts {
    dir: PathBuf,
    csv_files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv_files: Vec::new(),
        })
    }

    /// Opens a CSV artifact (comma-separated, LF line endings) and records
    /// it in the manifest.
    pub fn csv(&mut self, name: &str) -> Result<csv::Writer<fs::File>, CliError> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.csv_files.push(name.to_string());
        Ok(csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file))
    }

    /// CSV file names written so far, in emission order.
    pub fn manifest(&self) -> &[String] {
        &self.csv_files
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Top-level layout of every `report.json`: the config echo, the CSV
/// manifest, then the subcommand's own fields.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentReport<'a, T: Serialize> {
    pub config: &'a ResolvedConfig,
    pub csv_manifest: &'a [String],
    #[serde(flatten)]
    pub body: T,
}

/// Number formatting shared by all CSV artifacts: shortest round-trip
/// decimal with a '.' separator. Negative zero collapses to plain zero.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x}")
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn vector_entries(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RunMeta<'a> {
    subcommand: &'a str,
    runtime_seconds: f64,
    version: &'a str,
}

/// Writes the wall-clock record next to the report.
pub fn write_run_meta(
    dir: &Path,
    subcommand: &str,
    runtime_seconds: f64,
) -> Result<(), CliError> {
    let meta = RunMeta {
        subcommand,
        runtime_seconds,
        version: env!("CARGO_PKG_VERSION"),
    };
    let mut text = serde_json::to_string_pretty(&meta).expect("serializable");
    text.push('\n');
    let path = dir.join("run_meta.json");
    fs::write(&path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
