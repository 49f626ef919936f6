//! `entropic`: file-driven experiments with the entropic barrier.
//!
//! Every subcommand reads its inputs from flags and an optional JSON config
//! (`--config`), with flags taking precedence over file values. Outputs go to
//! `--out` as CSV and JSON together with `summary.json`, `config.json` (the
//! effective configuration, which reproduces the run when passed back as
//! `--config`) and `manifest.json`. The summary is also printed on standard
//! output.
//!
//! Exit codes: 0 on success, 1 on a configuration error (one line on standard
//! error), 2 on a numerical failure (with `diagnostics.json` in the output
//! directory).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{
    BanditArgs, BarrierEvalArgs, CentralPathArgs, MomentsArgs, SampleArgs, SolveLpArgs, VerifyLemmasArgs,
    VerifyScArgs,
};
use config::ConfigFile;
use output::{write_diagnostics, write_outcome, Outcome, RunInfo};

const DEFAULT_OUT: &str = "entropic-out";

const AFTER_HELP: &str = "\
Bodies are JSON objects:
  {\"type\": \"axis_box\", \"lower\": [-1, -1], \"upper\": [1, 1]}
  {\"type\": \"simplex\", \"dim\": 3}
  {\"type\": \"h_polytope\", \"a\": [[1, 0], [0, 1], [-1, -1]], \"b\": [1, 1, 1]}
  {\"type\": \"ball\", \"center\": [0, 0], \"radius\": 1}
  {\"type\": \"affine_image\", \"inner\": {...}, \"matrix\": [[2, 0], [0, 1]], \"shift\": [0, 0]}
Backends are a kind name or a JSON object:
  closed_form | tensor_quadrature | grid_quadrature
  {\"kind\": \"tensor_quadrature\", \"order\": 64}
  {\"kind\": \"grid_quadrature\", \"resolution\": 200}
  {\"kind\": \"monte_carlo\", \"samples\": 100000, \"burn_in\": null, \"thinning\": null, \"seed\": 0}
Every flag has a config key of the same name with underscores; `out` and
`jobs` may also be set in the config. Flags override the config file.
All JSON outputs carry \"schema_version\".";

#[derive(Debug, Parser)]
#[command(name = "entropic", version, about = "Entropic barrier experiments", after_long_help = AFTER_HELP)]
struct Cli {
    /// JSON config with the subcommand's keys.
    #[arg(long, global = true, visible_alias = "problem", visible_alias = "experiment")]
    config: Option<PathBuf>,
    /// Output directory (default `entropic-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for scans and replicates (default 1).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    BarrierEval(BarrierEvalArgs),
    Moments(MomentsArgs),
    SolveLp(SolveLpArgs),
    CentralPath(CentralPathArgs),
    VerifySc(VerifyScArgs),
    VerifyLemmas(VerifyLemmasArgs),
    Sample(SampleArgs),
    Bandit(BanditArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::BarrierEval(_) => "barrier-eval",
            Command::Moments(_) => "moments",
            Command::SolveLp(_) => "solve-lp",
            Command::CentralPath(_) => "central-path",
            Command::VerifySc(_) => "verify-sc",
            Command::VerifyLemmas(_) => "verify-lemmas",
            Command::Sample(_) => "sample",
            Command::Bandit(_) => "bandit",
        }
    }
}

/// Why a run stopped.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn reason(self) -> String {
        match self {
            Failure::Config(r) | Failure::Numerical(r) => r,
        }
    }
}

impl From<entropic_core::Error> for Failure {
    fn from(e: entropic_core::Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn dispatch(command: Command, file: ConfigFile) -> Result<Outcome, Failure> {
    match command {
        Command::BarrierEval(a) => {
            let (a, base) = file.merge(&a)?;
            commands::barrier_eval(a, &base)
        }
        Command::Moments(a) => {
            let (a, base) = file.merge(&a)?;
            commands::moments_cmd(a, &base)
        }
        Command::SolveLp(a) => {
            let (a, base) = file.merge(&a)?;
            commands::solve_lp_cmd(a, &base)
        }
        Command::CentralPath(a) => {
            let (a, base) = file.merge(&a)?;
            commands::central_path(a, &base)
        }
        Command::VerifySc(a) => {
            let (a, base) = file.merge(&a)?;
            commands::verify_sc(a, &base)
        }
        Command::VerifyLemmas(a) => {
            let (a, _) = file.merge(&a)?;
            commands::verify_lemmas(a)
        }
        Command::Sample(a) => {
            let (a, base) = file.merge(&a)?;
            commands::sample_cmd(a, &base)
        }
        Command::Bandit(a) => {
            let (a, base) = file.merge(&a)?;
            commands::bandit(a, &base)
        }
    }
}

fn config_error(reason: &str) -> ExitCode {
    eprintln!("error: {reason}");
    ExitCode::from(1)
}

fn run(cli: Cli) -> ExitCode {
    let started = Instant::now();
    let subcommand = cli.command.name();
    let mut file = match ConfigFile::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => return config_error(&e.reason()),
    };
    let shared = file.take::<PathBuf>("out").and_then(|o| Ok((o, file.take::<usize>("jobs")?)));
    let (file_out, file_jobs) = match shared {
        Ok(v) => v,
        Err(e) => return config_error(&e.reason()),
    };
    let out = cli.out.or(file_out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let jobs = cli.jobs.or(file_jobs).unwrap_or(1);
    if jobs == 0 {
        return config_error("jobs must be at least 1");
    }
    let input = file.path.clone();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => return config_error(&format!("cannot start {jobs} worker threads: {e}")),
    };
    let result = pool.install(|| dispatch(cli.command, file));
    let outcome = match result {
        Ok(o) => o,
        Err(Failure::Config(r)) => return config_error(&r),
        Err(Failure::Numerical(r)) => {
            eprintln!("numerical failure: {r}");
            if let Err(e) = write_diagnostics(&out, subcommand, &r, None) {
                eprintln!("error: {}", e.reason());
            }
            return ExitCode::from(2);
        }
    };
    let info = RunInfo {
        subcommand,
        input: input.as_deref(),
        out: &out,
        jobs,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    if let Err(e) = write_outcome(&outcome, &info) {
        return config_error(&e.reason());
    }
    println!("{}", serde_json::to_string_pretty(&outcome.summary).expect("summary serializes"));
    if let Some(reason) = &outcome.failure {
        eprintln!("numerical failure: {reason}");
        if let Err(e) = write_diagnostics(&out, subcommand, reason, Some(&outcome.config)) {
            eprintln!("error: {}", e.reason());
        }
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            ExitCode::SUCCESS
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", line.trim());
            ExitCode::from(1)
        }
    }
}
