//! Output files and the run manifest.

use std::path::{Path, PathBuf};

use entropic_core::Backend;
use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Version of every JSON and CSV layout written by this tool.
pub const SCHEMA_VERSION: &str = "entropic/1";

/// What a subcommand produced.
pub struct Outcome {
    /// Printed on standard output and written as `summary.json`.
    pub summary: Value,
    pub files: Vec<(String, Vec<u8>)>,
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    /// Effective configuration; running it again reproduces the outputs.
    pub config: Value,
    /// Set when the computation finished but did not reach its target.
    pub failure: Option<String>,
}

impl Outcome {
    pub fn new(summary: Value, config: Value) -> Self {
        Outcome { summary, files: Vec::new(), seed: None, backend: None, config, failure: None }
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        let text = serde_json::to_vec_pretty(value).expect("outputs serialize");
        self.files.push((name.to_string(), text));
    }

    pub fn csv(&mut self, name: &str, table: Table) {
        self.files.push((name.to_string(), table.finish()));
    }
}

/// A CSV table with a header row.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header.iter().map(AsRef::as_ref)).expect("in-memory write");
        Table { writer }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    fn finish(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

/// Header names `prefix0, prefix1, ...`.
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn fmt(values: &[f64]) -> impl Iterator<Item = String> + '_ {
    values.iter().map(f64::to_string)
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: &'static str,
    tool: &'static str,
    tool_version: &'static str,
    subcommand: &'a str,
    input: Option<&'a Path>,
    output_dir: &'a Path,
    seed: Option<u64>,
    jobs: usize,
    backend: Option<&'a Backend>,
    wall_clock_seconds: f64,
    /// Effective configuration, also written as `config.json`.
    config: &'a Value,
    files: Vec<&'a str>,
}

pub struct RunInfo<'a> {
    pub subcommand: &'a str,
    pub input: Option<&'a Path>,
    pub out: &'a Path,
    pub jobs: usize,
    pub wall_clock_seconds: f64,
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(&path, bytes).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn create_dir(out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", out.display())))
}

/// Writes the outputs, `summary.json`, `config.json` and `manifest.json`.
pub fn write_outcome(outcome: &Outcome, run: &RunInfo) -> Result<(), Failure> {
    create_dir(run.out)?;
    for (name, bytes) in &outcome.files {
        write(run.out.join(name), bytes)?;
    }
    write(run.out.join("summary.json"), &serde_json::to_vec_pretty(&outcome.summary).expect("summary serializes"))?;
    write(run.out.join("config.json"), &serde_json::to_vec_pretty(&outcome.config).expect("config serializes"))?;
    let mut files: Vec<&str> = outcome.files.iter().map(|(n, _)| n.as_str()).collect();
    files.extend(["summary.json", "config.json"]);
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        subcommand: run.subcommand,
        input: run.input,
        output_dir: run.out,
        seed: outcome.seed,
        jobs: run.jobs,
        backend: outcome.backend.as_ref(),
        wall_clock_seconds: run.wall_clock_seconds,
        config: &outcome.config,
        files,
    };
    write(run.out.join("manifest.json"), &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"))
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    schema_version: &'static str,
    subcommand: &'a str,
    error: &'a str,
    config: Option<&'a Value>,
}

/// Writes `diagnostics.json` after a numerical failure.
pub fn write_diagnostics(out: &Path, subcommand: &str, error: &str, config: Option<&Value>) -> Result<(), Failure> {
    create_dir(out)?;
    let d = Diagnostics { schema_version: SCHEMA_VERSION, subcommand, error, config };
    write(out.join("diagnostics.json"), &serde_json::to_vec_pretty(&d).expect("diagnostics serialize"))
}
