//! Subcommand arguments and their implementations.

use std::path::Path;
use std::str::FromStr;

use clap::Args;
use entropic_core::bandit::{run_experiment, Adversary, BanditConfig, BanditTrace, Feedback};
use entropic_core::dualmap::{barrier_with, DualMapOptions, DEFAULT_MAX_ITERATIONS};
use entropic_core::ipm::{central_path_point, solve_lp_with, LpOptions, PathMode, SolveStatus};
use entropic_core::logpartition::moments;
use entropic_core::sampling::{sample_moments, sample_sharded, ChainParams};
use entropic_core::scverify::{
    dirac_branch, lemma2_extremal_scan, lemma2_monotone_in_r, lemma4_check, lemma5_check, sc_scan, Density1d,
    Profile, ScanReport,
};
use entropic_core::{Backend, ConvexBody};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{load_body, parse_backend, BodySource, Json, Vector};
use crate::output::{fmt, indexed, Outcome, Table, SCHEMA_VERSION};
use crate::Failure;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn backend_for(given: Option<Json<Backend>>, body: &ConvexBody) -> Result<Backend, Failure> {
    let backend = given.map_or_else(|| Backend::default_for(body), |b| b.0);
    backend.check_applicable(body)?;
    Ok(backend)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("configs serialize")
}

fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count).map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64)).collect()
}

/// Barrier value `f*(x)`, `θ(x) = ∇f*(x)` and `∇²f*(x)` at one interior point.
///
/// Config keys: `body` (inline body or path), `point` (array), `backend`
/// (optional, JSON or kind name), `tol` (optional residual tolerance),
/// `max_iterations` (optional).
/// Writes `barrier.json` and `newton_trace.csv`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierEvalArgs {
    /// Body JSON file or inline JSON.
    #[arg(long)]
    pub body: Option<BodySource>,
    /// Interior point as a JSON array.
    #[arg(long)]
    pub point: Option<Vector>,
    /// Moment backend: a kind name or JSON object.
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Json<Backend>>,
    /// Residual tolerance on the mean map (default 1e-8 times the diameter).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

pub fn barrier_eval(args: BarrierEvalArgs, base: &Path) -> Result<Outcome, Failure> {
    let (body, spec) = load_body(args.body, base)?;
    let x = args.point.ok_or_else(|| Failure::Config("missing point".into()))?.to_dvector(body.dim(), "point")?;
    let backend = backend_for(args.backend, &body)?;
    let options = DualMapOptions {
        tol: args.tol,
        max_iterations: args.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
        start: None,
    };
    let eval = barrier_with(&body, &x, &backend, &options)?;
    let config = json!({
        "body": spec, "point": vec_of(&x), "backend": backend, "tol": args.tol,
        "max_iterations": options.max_iterations,
    });
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "value": eval.value,
        "theta": vec_of(&eval.theta),
        "residual": eval.residual,
        "newton_iterations": eval.newton_trace.len() - 1,
    });
    let mut out = Outcome::new(summary, config);
    out.json(
        "barrier.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "x": vec_of(&eval.x),
            "value": eval.value,
            "theta": vec_of(&eval.theta),
            "hessian": rows(&eval.hessian),
            "residual": eval.residual,
        }),
    );
    let n = body.dim();
    let mut header = vec!["iteration".to_string(), "decrement".into()];
    header.extend(indexed("theta", n));
    let mut table = Table::new(&header);
    for (k, step) in eval.newton_trace.iter().enumerate() {
        table.row([k.to_string(), step.decrement.to_string()].into_iter().chain(fmt(&step.theta)));
    }
    out.csv("newton_trace.csv", table);
    out.backend = Some(backend);
    Ok(out)
}

/// `f(θ)`, mean, covariance and optional third directional moment of `p_θ`.
///
/// Config keys: `body`, `theta` (array), `direction` (optional array `h`),
/// `backend` (optional). Writes `moments.json`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsArgs {
    #[arg(long)]
    pub body: Option<BodySource>,
    /// Tilt as a JSON array.
    #[arg(long)]
    pub theta: Option<Vector>,
    /// Direction `h` for the third moment.
    #[arg(long)]
    pub direction: Option<Vector>,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Json<Backend>>,
}

pub fn moments_cmd(args: MomentsArgs, base: &Path) -> Result<Outcome, Failure> {
    let (body, spec) = load_body(args.body, base)?;
    let n = body.dim();
    let theta = args.theta.ok_or_else(|| Failure::Config("missing theta".into()))?.to_dvector(n, "theta")?;
    let h = args.direction.map(|h| h.to_dvector(n, "direction")).transpose()?;
    let backend = backend_for(args.backend, &body)?;
    let report = moments(&body, &theta, h.as_ref(), &backend)?;
    let config = json!({ "body": spec, "theta": vec_of(&theta), "direction": h.as_ref().map(vec_of), "backend": backend });
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "f_value": report.f_value,
        "mean": vec_of(&report.mean),
        "covariance": rows(&report.covariance),
        "third_directional": report.third_directional,
        "error_estimate": report.error_estimate,
        "backend": report.backend,
    });
    let mut out = Outcome::new(summary.clone(), config);
    out.json("moments.json", &summary);
    out.seed = match backend {
        Backend::MonteCarlo { seed, .. } => Some(seed),
        _ => None,
    };
    out.backend = Some(backend);
    Ok(out)
}

/// Minimizes `⟨c, x⟩` over the body by path following with the entropic barrier.
///
/// Config keys: `body`, `c` (array), `epsilon` (default 1e-3), `backend`,
/// `gamma` (optional step constant), `max_iterations` (optional).
/// Writes `solution.json` and `central_path.csv`. Exits 2 when the solver
/// stops short of the certified accuracy.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveLpArgs {
    #[arg(long)]
    pub body: Option<BodySource>,
    /// Cost vector as a JSON array.
    #[arg(long)]
    pub c: Option<Vector>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Json<Backend>>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

pub fn solve_lp_cmd(args: SolveLpArgs, base: &Path) -> Result<Outcome, Failure> {
    let (body, spec) = load_body(args.body, base)?;
    let n = body.dim();
    let c = args.c.ok_or_else(|| Failure::Config("missing c".into()))?.to_dvector(n, "c")?;
    let epsilon = args.epsilon.unwrap_or(1e-3);
    let backend = backend_for(args.backend, &body)?;
    let defaults = LpOptions::default();
    let options = LpOptions {
        gamma: args.gamma.unwrap_or(defaults.gamma),
        max_iterations: args.max_iterations.unwrap_or(defaults.max_iterations),
        ..defaults
    };
    let (x, trace) = solve_lp_with(&body, &c, epsilon, &backend, &options)?;
    let objective = c.dot(&x);
    let config = json!({
        "body": spec, "c": vec_of(&c), "epsilon": epsilon, "backend": backend,
        "gamma": options.gamma, "max_iterations": options.max_iterations,
    });
    let final_gap = trace.records.last().map(|r| r.gap_bound);
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "objective": objective,
        "x": vec_of(&x),
        "status": trace.status,
        "gap_bound": final_gap,
        "nu": trace.nu,
        "newton_steps": trace.newton_steps,
        "path_points": trace.records.len(),
        "message": trace.message,
    });
    let mut out = Outcome::new(summary.clone(), config);
    out.json("solution.json", &summary);
    let mut header = vec!["t".to_string(), "objective".into(), "gap_bound".into(), "newton_decrement".into()];
    header.extend(indexed("x", n));
    let mut table = Table::new(&header);
    for r in &trace.records {
        table.row(
            [r.t.to_string(), r.objective.to_string(), r.gap_bound.to_string(), r.newton_decrement.to_string()]
                .into_iter()
                .chain(fmt(&r.x)),
        );
    }
    out.csv("central_path.csv", table);
    if trace.status != SolveStatus::Converged {
        out.failure = Some(format!(
            "solver stopped with status {:?}: {}",
            trace.status,
            trace.message.clone().unwrap_or_default()
        ));
    }
    out.backend = Some(backend);
    Ok(out)
}

/// Comma-separated path modes, e.g. `mean_map,newton_minimize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Modes(pub Vec<PathMode>);

impl FromStr for Modes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|m| serde_json::from_value(Value::String(m.trim().to_string())).map_err(|e| format!("mode {m}: {e}")))
            .collect::<Result<_, _>>()
            .map(Modes)
    }
}

/// Central-path points `x(t)` for a list of `t`, by one or both constructions.
///
/// Config keys: `body`, `c`, `t_values` (array) or `t_min`, `t_max`, `count`
/// (log-spaced, default 0.1 to 100 with 7 points), `modes` (default both of
/// `mean_map` and `newton_minimize`), `backend`.
/// Writes `central_path.csv` with one row per `(t, mode)`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentralPathArgs {
    #[arg(long)]
    pub body: Option<BodySource>,
    #[arg(long)]
    pub c: Option<Vector>,
    /// Explicit path parameters as a JSON array.
    #[arg(long)]
    pub t_values: Option<Vector>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub modes: Option<Modes>,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Json<Backend>>,
}

pub fn central_path(args: CentralPathArgs, base: &Path) -> Result<Outcome, Failure> {
    let (body, spec) = load_body(args.body, base)?;
    let n = body.dim();
    let c = args.c.ok_or_else(|| Failure::Config("missing c".into()))?.to_dvector(n, "c")?;
    let ts = match args.t_values {
        Some(v) => v.0,
        None => {
            let (lo, hi, count) = (args.t_min.unwrap_or(0.1), args.t_max.unwrap_or(100.0), args.count.unwrap_or(7));
            if !(lo > 0.0 && lo <= hi) || count == 0 {
                return Err(Failure::Config("need 0 < t_min <= t_max and count >= 1".into()));
            }
            logspace(lo, hi, count)
        }
    };
    let modes = args.modes.map_or_else(|| vec![PathMode::MeanMap, PathMode::NewtonMinimize], |m| m.0);
    if modes.is_empty() {
        return Err(Failure::Config("modes must not be empty".into()));
    }
    let backend = backend_for(args.backend, &body)?;
    let jobs: Vec<(f64, PathMode)> = ts.iter().flat_map(|&t| modes.iter().map(move |&m| (t, m))).collect();
    let points: Vec<DVector<f64>> = jobs
        .par_iter()
        .map(|&(t, m)| central_path_point(&body, &c, t, &backend, m))
        .collect::<Result<_, _>>()?;
    let mut header = vec!["t".to_string(), "mode".into(), "objective".into()];
    header.extend(indexed("x", n));
    let mut table = Table::new(&header);
    for ((t, m), x) in jobs.iter().zip(&points) {
        let mode = to_value(m).as_str().unwrap_or_default().to_string();
        table.row([t.to_string(), mode, c.dot(x).to_string()].into_iter().chain(fmt(x.as_slice())));
    }
    // largest distance between the constructions at the same t
    let disagreement = points
        .chunks(modes.len())
        .map(|group| group.iter().map(|x| (x - &group[0]).norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let config = json!({ "body": spec, "c": vec_of(&c), "t_values": ts, "modes": modes, "backend": backend });
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "points": points.len(),
        "t_values": ts,
        "max_mode_disagreement": disagreement,
        "diameter": body.diameter(),
    });
    let mut out = Outcome::new(summary, config);
    out.csv("central_path.csv", table);
    out.backend = Some(backend);
    Ok(out)
}

/// Scan of `|∇³f[h,h,h]| / ∇²f[h,h]^{3/2}` at random `(θ, h)` against 2.
///
/// Config keys: `body`, `samples` (default 500), `seed` (default 0),
/// `max_theta` (default 50; `|θ|` is log-uniform on `[1e-2, max_theta]`),
/// `backend`. Writes `scan.json` (the report) and `scan.csv` (one row per point).
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyScArgs {
    #[arg(long)]
    pub body: Option<BodySource>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_theta: Option<f64>,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Json<Backend>>,
}

fn scan_summary(report: &ScanReport) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "quantity": report.quantity,
        "grid": report.grid,
        "worst_case_value": report.worst_case_value,
        "worst_case_input": report.worst_case_input,
        "bound": report.bound,
        "margin": report.margin,
        "seed": report.seed,
        "points": report.records.len(),
        "skipped": report.skipped(),
    })
}

fn scan_table(report: &ScanReport, header: Vec<String>) -> Table {
    let mut header = header;
    header.extend(["value".to_string(), "note".into()]);
    let mut table = Table::new(&header);
    for r in &report.records {
        let width = header.len() - 2;
        let mut fields: Vec<String> = fmt(&r.input).collect();
        fields.resize(width, String::new());
        fields.push(r.value.map_or_else(String::new, |v| v.to_string()));
        fields.push(r.note.clone().unwrap_or_default());
        table.row(fields);
    }
    table
}

pub fn verify_sc(args: VerifyScArgs, base: &Path) -> Result<Outcome, Failure> {
    let (body, spec) = load_body(args.body, base)?;
    let n = body.dim();
    let samples = args.samples.unwrap_or(500);
    let seed = args.seed.unwrap_or(0);
    let max_theta = args.max_theta.unwrap_or(50.0);
    if samples == 0 || !(max_theta > 1e-2) {
        return Err(Failure::Config("need samples >= 1 and max_theta > 1e-2".into()));
    }
    let backend = backend_for(args.backend, &body)?;
    let report = sc_scan(&body, samples, max_theta, seed, &backend);
    let config = json!({ "body": spec, "samples": samples, "seed": seed, "max_theta": max_theta, "backend": backend });
    let mut out = Outcome::new(scan_summary(&report), config);
    out.json("scan.json", &report);
    let header = indexed("theta", n).into_iter().chain(indexed("h", n)).collect();
    out.csv("scan.csv", scan_table(&report, header));
    if report.skipped() == samples {
        out.failure = Some("no point of the scan could be evaluated".into());
    }
    out.seed = Some(seed);
    out.backend = Some(backend);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma4Case {
    pub density: Density1d,
    pub x0: f64,
    pub x1: f64,
    pub x2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma5Case {
    pub profile: Profile,
    pub n: u32,
    pub a: f64,
    pub b: f64,
}

fn default_lemma4() -> Vec<Lemma4Case> {
    vec![
        Lemma4Case { density: Density1d::Gaussian { mean: 0.0, sd: 1.0 }, x0: 0.0, x1: -5.0, x2: Some(5.0) },
        Lemma4Case { density: Density1d::Laplace { location: 0.0, scale: 1.0 }, x0: 0.0, x1: -10.0, x2: Some(10.0) },
    ]
}

fn default_lemma5() -> Vec<Lemma5Case> {
    vec![
        Lemma5Case { profile: Profile::OneMinusSquare, n: 1, a: -1.0, b: 1.0 },
        Lemma5Case { profile: Profile::ExpSquare, n: 1, a: 0.0, b: 1.0 },
        Lemma5Case { profile: Profile::OneMinusPower { power: 3.0 }, n: 3, a: 0.0, b: 1.0 },
    ]
}

/// The one-dimensional inequalities behind the self-concordance proof.
///
/// Config keys: `a_grid` (default -1 to 1 in steps of 0.1) and `r_grid`
/// (default 121 log-spaced values on `[1e-6, 1e6]`) for the extremal family
/// `H(a, r) <= 2`; `lemma4` (list of `{density, x0, x1, x2}` with densities
/// `{"type": "gaussian", "mean", "sd"}`, `{"type": "laplace", "location",
/// "scale"}` or `{"type": "tilted_uniform", "lower", "upper", "rate"}`);
/// `lemma5` (list of `{profile, n, a, b}` with profiles `{"type":
/// "one_minus_square"}`, `{"type": "exp_square"}` or `{"type":
/// "one_minus_power", "power"}`); `spacing` (default 1e-3).
/// Writes `lemmas.json` and `extremal.csv`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyLemmasArgs {
    #[arg(long)]
    pub a_grid: Option<Vector>,
    #[arg(long)]
    pub r_grid: Option<Vector>,
    /// Density cases as a JSON array.
    #[arg(long)]
    pub lemma4: Option<Json<Vec<Lemma4Case>>>,
    /// Profile cases as a JSON array.
    #[arg(long)]
    pub lemma5: Option<Json<Vec<Lemma5Case>>>,
    #[arg(long)]
    pub spacing: Option<f64>,
}

/// Tolerance on the extremal-family bound 2.
const EXTREMAL_SLACK: f64 = 1e-6;

pub fn verify_lemmas(args: VerifyLemmasArgs) -> Result<Outcome, Failure> {
    let a_grid = args.a_grid.map_or_else(|| (0..=20).map(|k| -1.0 + 0.1 * k as f64).collect(), |v| v.0);
    let r_grid = args.r_grid.map_or_else(|| logspace(1e-6, 1e6, 121), |v| v.0);
    let cases4 = args.lemma4.map_or_else(default_lemma4, |c| c.0);
    let cases5 = args.lemma5.map_or_else(default_lemma5, |c| c.0);
    let spacing = args.spacing.unwrap_or(1e-3);

    let extremal = lemma2_extremal_scan(&a_grid, &r_grid)?;
    let (dirac_x, dirac_value) = dirac_branch();
    let monotone = lemma2_monotone_in_r(-1.0, &r_grid.iter().copied().filter(|&r| r <= 1.0).collect::<Vec<_>>());
    let reports4 = cases4
        .iter()
        .map(|c| lemma4_check(&c.density, c.x0, c.x1, c.x2))
        .collect::<Result<Vec<_>, _>>()?;
    let reports5 = cases5
        .iter()
        .map(|c| lemma5_check(&|x| c.profile.eval(x), c.n, c.a, c.b, spacing))
        .collect::<Result<Vec<_>, _>>()?;

    let extremal_holds = extremal.margin >= -EXTREMAL_SLACK;
    let lemma4_holds = reports4.iter().all(|r| r.pass);
    let lemma5_holds = reports5.iter().all(|r| r.equivalent);
    let config = json!({
        "a_grid": a_grid, "r_grid": r_grid, "lemma4": cases4, "lemma5": cases5, "spacing": spacing,
    });
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "extremal_max": extremal.worst_case_value,
        "extremal_margin": extremal.margin,
        "extremal_skipped": extremal.skipped(),
        "dirac_branch": { "x": dirac_x, "value": dirac_value },
        "monotone_in_r_at_a_minus_one": monotone,
        "lemma4_pass": reports4.iter().map(|r| r.pass).collect::<Vec<_>>(),
        "lemma5_equivalent": reports5.iter().map(|r| r.equivalent).collect::<Vec<_>>(),
        "all_hold": extremal_holds && lemma4_holds && lemma5_holds,
    });
    let mut out = Outcome::new(summary, config);
    out.json(
        "lemmas.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "extremal": extremal,
            "dirac_branch": { "x": dirac_x, "value": dirac_value },
            "monotone_in_r_at_a_minus_one": monotone,
            "lemma4": cases4.iter().zip(&reports4).map(|(c, r)| json!({ "case": c, "report": r })).collect::<Vec<_>>(),
            "lemma5": cases5.iter().zip(&reports5).map(|(c, r)| json!({ "case": c, "report": r })).collect::<Vec<_>>(),
        }),
    );
    out.csv("extremal.csv", scan_table(&extremal, vec!["a_or_x".into(), "r".into()]));
    Ok(out)
}

/// Hit-and-run samples from `p_θ`.
///
/// Config keys: `body`, `theta` (default 0), `count` (default 10000),
/// `burn_in` (default `100 n²`), `thinning` (default `n`), `seed` (default 0),
/// `shards` (independent chains, default 1; the output depends on `shards`
/// but not on `--jobs`), `direction` (optional `h` for the third moment).
/// Writes `samples.csv` and `sample_moments.json`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    #[arg(long)]
    pub body: Option<BodySource>,
    #[arg(long)]
    pub theta: Option<Vector>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thinning: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shards: Option<usize>,
    #[arg(long)]
    pub direction: Option<Vector>,
}

pub fn sample_cmd(args: SampleArgs, base: &Path) -> Result<Outcome, Failure> {
    let (body, spec) = load_body(args.body, base)?;
    let n = body.dim();
    let theta = args.theta.map_or_else(|| Ok(DVector::zeros(n)), |t| t.to_dvector(n, "theta"))?;
    let h = args.direction.map(|h| h.to_dvector(n, "direction")).transpose()?;
    let count = args.count.unwrap_or(10_000);
    let seed = args.seed.unwrap_or(0);
    let shards = args.shards.unwrap_or(1).max(1);
    let params = ChainParams { burn_in: args.burn_in, thinning: args.thinning, seed };
    let set = sample_sharded(&body, &theta, count, params, shards)?;
    let config = json!({
        "body": spec, "theta": vec_of(&theta), "count": count, "burn_in": set.burn_in,
        "thinning": set.thinning, "seed": seed, "shards": shards, "direction": h.as_ref().map(vec_of),
    });
    let stats = sample_moments(&set.points, h.as_ref()).ok();
    let moments_json = stats.as_ref().map(|m| {
        json!({
            "mean": vec_of(&m.mean),
            "mean_se": vec_of(&m.mean_se),
            "covariance": rows(&m.covariance),
            "covariance_se": rows(&m.covariance_se),
            "third": m.third,
            "third_se": m.third_se,
        })
    });
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "count": set.points.len(),
        "steps": set.steps,
        "rejected": set.rejected,
        "burn_in": set.burn_in,
        "thinning": set.thinning,
        "moments": moments_json,
    });
    let mut out = Outcome::new(summary.clone(), config);
    out.json("sample_moments.json", &summary);
    let mut table = Table::new(&indexed("x", n));
    for p in &set.points {
        table.row(fmt(p.as_slice()));
    }
    out.csv("samples.csv", table);
    out.seed = Some(seed);
    Ok(out)
}

/// Seeds as a JSON array or a comma-separated list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seeds(pub Vec<u64>);

impl FromStr for Seeds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.starts_with('[') {
            return serde_json::from_str(s).map(Seeds).map_err(|e| e.to_string());
        }
        s.split(',').map(|v| v.trim().parse::<u64>().map_err(|e| format!("seed {v}: {e}"))).collect::<Result<_, _>>().map(Seeds)
    }
}

/// Bandit linear optimization with entropic-barrier mirror descent.
///
/// Config keys: `body`, `horizon` (alias `T`), `eta` (default
/// `eta_scale · √(n log T / T)`), `eta_scale` (default 1), `adversary`
/// (`{"type": "zero"}`, `{"type": "fixed", "cost": [...]}` or `{"type":
/// "sequence", "costs": [[...], ...]}`), `mu` (exploration weight, default 0),
/// `feedback` (`bandit` or `full_information`), `backend`, `seeds` (array,
/// default `[seed]`), `seed` (default 0), `chain_steps`, `record_rounds`
/// (default true). Writes `bandit.json` and `trace_seed<S>.csv` per seed.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditArgs {
    #[arg(long)]
    pub body: Option<BodySource>,
    #[arg(long, visible_alias = "T")]
    #[serde(alias = "T")]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub eta_scale: Option<f64>,
    /// Adversary as JSON.
    #[arg(long)]
    pub adversary: Option<Json<Adversary>>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub feedback: Option<Json<Feedback>>,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Json<Backend>>,
    #[arg(long)]
    pub seeds: Option<Seeds>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chain_steps: Option<usize>,
    #[arg(long)]
    pub record_rounds: Option<bool>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn trace_table(trace: &BanditTrace, n: usize) -> Table {
    let mut header = vec!["round".to_string(), "loss".into(), "cumulative_loss".into(), "flagged".into()];
    header.extend(indexed("theta", n));
    header.extend(indexed("action", n));
    header.extend(indexed("estimate", n));
    let mut table = Table::new(&header);
    for r in &trace.records {
        table.row(
            [r.round.to_string(), r.loss.to_string(), r.cumulative_loss.to_string(), r.flagged.to_string()]
                .into_iter()
                .chain(fmt(&r.theta))
                .chain(fmt(&r.action))
                .chain(fmt(&r.estimate)),
        );
    }
    table
}

pub fn bandit(args: BanditArgs, base: &Path) -> Result<Outcome, Failure> {
    let (body, spec) = load_body(args.body, base)?;
    let n = body.dim();
    let horizon = args.horizon.ok_or_else(|| Failure::Config("missing horizon".into()))?;
    let adversary = args.adversary.ok_or_else(|| Failure::Config("missing adversary".into()))?.0;
    let seeds = args.seeds.map_or_else(|| vec![args.seed.unwrap_or(0)], |s| s.0);
    if seeds.is_empty() {
        return Err(Failure::Config("seeds must not be empty".into()));
    }
    let mut template = BanditConfig::new(body, horizon, adversary, seeds[0]);
    template.eta = args.eta;
    template.eta_scale = args.eta_scale.unwrap_or(1.0);
    template.mu = args.mu.unwrap_or(0.0);
    template.feedback = args.feedback.map_or(Feedback::Bandit, |f| f.0);
    template.backend = Some(args.backend.map_or_else(|| Backend::default_for(&template.body), |b| b.0));
    template.chain_steps = args.chain_steps;
    template.record_rounds = args.record_rounds.unwrap_or(true);
    template.validate()?;

    let traces: Vec<BanditTrace> = seeds
        .par_iter()
        .map(|&seed| run_experiment(&BanditConfig { seed, ..template.clone() }))
        .collect::<Result<_, _>>()?;
    let regrets: Vec<f64> = traces.iter().map(|t| t.regret).collect();
    let normalized: Vec<f64> = traces.iter().map(|t| t.normalized_regret).collect();
    let config = json!({
        "body": spec, "horizon": horizon, "eta": template.eta, "eta_scale": template.eta_scale,
        "adversary": template.adversary, "mu": template.mu, "feedback": template.feedback,
        "backend": template.backend, "seeds": seeds, "chain_steps": template.chain_steps,
        "record_rounds": template.record_rounds,
    });
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "horizon": horizon,
        "eta": template.learning_rate(),
        "seeds": seeds,
        "R_T": regrets,
        "R_T_over_sqrtTlogT": normalized,
        "median_R_T_over_sqrtTlogT": median(&normalized),
        "flagged_rounds": traces.iter().map(|t| t.flagged_rounds).collect::<Vec<_>>(),
    });
    let mut out = Outcome::new(summary, config);
    out.json(
        "bandit.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "runs": traces.iter().map(|t| json!({
                "seed": t.seed,
                "eta": t.eta,
                "regret": t.regret,
                "normalized_regret": t.normalized_regret,
                "cumulative_loss": t.cumulative_loss,
                "best_fixed_loss": t.best_fixed_loss,
                "final_theta": t.final_theta,
                "flagged_rounds": t.flagged_rounds,
            })).collect::<Vec<_>>(),
        }),
    );
    if template.record_rounds {
        for t in &traces {
            out.csv(&format!("trace_seed{}.csv", t.seed), trace_table(t, n));
        }
    }
    out.seed = Some(seeds[0]);
    out.backend = template.backend;
    Ok(out)
}
