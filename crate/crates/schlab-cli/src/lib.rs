//! Library side of the `schlab` command: configuration, field files and the
//! four subcommands. `main.rs` only parses arguments and maps errors to exit
//! codes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod field_io;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use schlab::detectors::{blowup_extrapolate_with, exiting_time};
use schlab::ensemble::{run_ensemble, run_path, stability_probe, workers_from_env, EnsembleOptions};
use schlab::experiments::{
    approximate_solution, default_parameters, localized_profile, run_experiment, ExperimentReport,
};
use schlab::stepper::{Status, TrajectoryRecord};
use schlab::SpectralField;

use config::{ConfigError, Equation, InitialData, RawConfig, RunConfig};
use field_io::FieldIoError;

pub const TRAJECTORY_SCHEMA: &str = "schlab-trajectory/1";
pub const SUMMARY_SCHEMA: &str = "schlab-summary/1";
pub const ENSEMBLE_SCHEMA: &str = "schlab-ensemble/1";
pub const PROBE_SCHEMA: &str = "schlab-probe/1";
pub const REPORT_SCHEMA: &str = "schlab-report/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BREAKDOWN: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("initial data: {0}")]
    Field(#[from] FieldIoError),
    #[error(transparent)]
    Model(#[from] schlab::Error),
    #[error("breakdown at t = {t_detect} with guards.forbid_breakdown = true ({reason})")]
    ForbiddenBreakdown { t_detect: f64, reason: String },
    #[error("run failed: {0}")]
    RunFailed(String),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Field(_) | CliError::Model(_) => EXIT_INVALID,
            CliError::ForbiddenBreakdown { .. } => EXIT_BREAKDOWN,
            CliError::RunFailed(_) | CliError::Io(..) => EXIT_FAILED,
        }
    }
}

/// Reads and validates a config file, applying `key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let mut raw = RawConfig::parse(&text)?;
    for kv in overrides {
        raw.apply_override(kv)?;
    }
    let mut cfg = RunConfig::from_raw(&raw)?;
    // relative field paths are read next to the config file
    if let InitialData::File(p) = &cfg.initial {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.initial = InitialData::File(dir.join(p));
            }
        }
    }
    Ok(cfg)
}

pub fn initial_field(cfg: &RunConfig) -> Result<SpectralField, CliError> {
    let n = cfg.resolution;
    let f = match (&cfg.initial, cfg.equation) {
        (&InitialData::Trig { a, m, b, n: k }, Equation::Ch1d) => {
            SpectralField::from_fn_1d(n, |x| a * (m * x).sin() + b * (k * x).cos())?
        }
        (&InitialData::Trig { a, m, b, n: k }, Equation::Ep2d) => SpectralField::from_fn_2d(n, 2, |x, y| {
            vec![
                a * (m * y).sin() + b * (k * y).cos(),
                a * (m * x).sin() + b * (k * x).cos(),
            ]
        })?,
        (&InitialData::Approximate { l, n: k, s }, _) => approximate_solution(n, l, k, s, 0.0)?,
        (&InitialData::Localized { a, kappa }, _) => localized_profile(n, a, kappa)?,
        (InitialData::File(p), eq) => {
            let f = field_io::read_field(p)?;
            let (dim, comps) = match eq {
                Equation::Ch1d => (1, 1),
                Equation::Ep2d => (2, 2),
            };
            if f.dim() != dim || f.components() != comps || f.resolution() != n {
                return Err(ConfigError {
                    key: "u0.path".into(),
                    message: format!(
                        "file holds dim {} with {} components at N = {}; the run needs dim {dim}, {comps} components, N = {n}",
                        f.dim(),
                        f.components(),
                        f.resolution()
                    ),
                }
                .into());
            }
            f
        }
    };
    Ok(f)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn to_json<T: Serialize>(schema: &str, body: &T) -> String {
    let mut v = serde_json::to_value(body).expect("output serializes");
    if let Value::Object(m) = &mut v {
        m.insert("schema".into(), Value::String(schema.into()));
    }
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

/// Trajectory table: a `#` schema line, then t, hs_norm, w1inf, min_slope,
/// beta, status_flag. Every row but the last is flagged `running`.
pub fn trajectory_csv(rec: &TrajectoryRecord) -> String {
    let mut out = format!("# {TRAJECTORY_SCHEMA}\nt,hs_norm,w1inf,min_slope,beta,status_flag\n");
    let last = rec.len().saturating_sub(1);
    for i in 0..rec.len() {
        let flag = if i == last { rec.status.flag() } else { "running" };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            rec.times[i], rec.hs_norm_series[i], rec.w1inf_series[i], rec.min_slope_series[i], rec.beta_series[i], flag
        )
        .expect("writing to a String");
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitTime {
    pub level: f64,
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub status: Status,
    pub final_time: f64,
    pub seed: u64,
    pub fingerprint: String,
    pub sobolev_s: f64,
    pub exit_times: Vec<ExitTime>,
    pub rate_fit: Option<schlab::detectors::RateFit>,
}

fn summarize(cfg: &RunConfig, rec: &TrajectoryRecord) -> RunSummary {
    let exit_times = cfg
        .exit_levels
        .iter()
        .map(|&level| ExitTime {
            level,
            time: exiting_time(rec, level, rec.sobolev_s).ok().flatten(),
        })
        .collect();
    let rate_fit = if rec.status.is_breakdown() && cfg.equation == Equation::Ch1d {
        blowup_extrapolate_with(rec, cfg.rate_window).ok()
    } else {
        None
    };
    RunSummary {
        status: rec.status.clone(),
        final_time: rec.times.last().copied().unwrap_or(0.0),
        seed: rec.seed,
        fingerprint: rec.fingerprint.clone(),
        sobolev_s: rec.sobolev_s,
        exit_times,
        rate_fit,
    }
}

/// `schlab run`: one trajectory from the config seed. Writes
/// `trajectory.csv` and `summary.json` into `out`.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    let u0 = initial_field(cfg)?;
    let rec = run_path(
        &u0,
        cfg.horizon,
        &cfg.step,
        cfg.equation.drift(),
        &cfg.noise,
        cfg.seed,
        cfg.modes,
    );
    write(&out.join("trajectory.csv"), &trajectory_csv(&rec))?;
    let summary = summarize(cfg, &rec);
    write(&out.join("summary.json"), &to_json(SUMMARY_SCHEMA, &summary))?;
    if let Status::Failed { message } = &rec.status {
        return Err(CliError::RunFailed(message.clone()));
    }
    check_breakdown(cfg, &rec.status)?;
    Ok(summary)
}

fn check_breakdown(cfg: &RunConfig, status: &Status) -> Result<(), CliError> {
    match status {
        Status::Breakdown { t_detect, reason } if cfg.forbid_breakdown => Err(CliError::ForbiddenBreakdown {
            t_detect: *t_detect,
            reason: reason.clone(),
        }),
        _ => Ok(()),
    }
}

/// Ensemble statistics as written by `schlab ensemble`.
pub fn ensemble_json(
    cfg: &RunConfig,
    workers: Option<usize>,
) -> Result<(String, schlab::ensemble::EnsembleStats), CliError> {
    let u0 = initial_field(cfg)?;
    let opts = EnsembleOptions {
        exit_levels: cfg.exit_levels.clone(),
        rate_window: cfg.rate_window,
        modes: cfg.modes,
        workers,
        keep_records: false,
    };
    let stats = run_ensemble(
        &u0,
        cfg.horizon,
        &cfg.step,
        cfg.equation.drift(),
        &cfg.noise,
        cfg.paths,
        cfg.seed,
        &opts,
    )?;
    Ok((to_json(ENSEMBLE_SCHEMA, &stats), stats))
}

/// `schlab ensemble`: `cfg.paths` paths from seeds `cfg.seed + i`, written
/// to `ensemble.json`.
pub fn cmd_ensemble(cfg: &RunConfig, out: &Path) -> Result<schlab::ensemble::EnsembleStats, CliError> {
    let (text, stats) = ensemble_json(cfg, workers_from_env())?;
    write(&out.join("ensemble.json"), &text)?;
    if cfg.forbid_breakdown {
        if let Some(p) = stats.per_path.iter().find(|p| p.status.is_breakdown()) {
            check_breakdown(cfg, &p.status)?;
        }
    }
    Ok(stats)
}

/// The perturbation 1/n + n^{−s}cos(n·) added to u₀; in 2-D component i
/// oscillates along the other axis so the added field stays divergence-free.
pub fn probe_perturbation(u0: &SpectralField, n: usize, s: f64) -> Result<SpectralField, CliError> {
    let big_n = u0.resolution();
    let (nf, amp) = (n as f64, (n as f64).powf(-s));
    let p = if u0.dim() == 1 {
        SpectralField::from_fn_1d(big_n, |x| 1.0 / nf + amp * (nf * x).cos())?
    } else {
        SpectralField::from_fn_2d(big_n, 2, |x, y| {
            vec![1.0 / nf + amp * (nf * y).cos(), 1.0 / nf + amp * (nf * x).cos()]
        })?
    };
    Ok(u0.add(&p)?)
}

/// `schlab probe-stability`: exiting times at `probe.level` for u₀ and for
/// each perturbation in `probe.n_values`, all on one path.
pub fn cmd_probe(cfg: &RunConfig, out: &Path) -> Result<schlab::ensemble::StabilityReport, CliError> {
    let level = cfg.probe_level.ok_or_else(|| ConfigError {
        key: "probe.level".into(),
        message: "missing".into(),
    })?;
    if cfg.probe_n_values.is_empty() {
        return Err(ConfigError {
            key: "probe.n_values".into(),
            message: "missing".into(),
        }
        .into());
    }
    let u0 = initial_field(cfg)?;
    let perturbed = cfg
        .probe_n_values
        .iter()
        .map(|&n| Ok((format!("n={n}"), probe_perturbation(&u0, n, cfg.probe_s)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = stability_probe(
        &u0,
        &perturbed,
        level,
        cfg.horizon,
        &cfg.step,
        cfg.equation.drift(),
        &cfg.noise,
        cfg.seed,
    )?;
    write(&out.join("stability.json"), &to_json(PROBE_SCHEMA, &report))?;
    Ok(report)
}

/// Parses `key=value` overrides for an experiment; values are read as JSON
/// and fall back to plain strings.
pub fn experiment_overrides(kvs: &[String]) -> Result<Map<String, Value>, CliError> {
    let mut m = Map::new();
    for kv in kvs {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override {kv:?} must look like key=value")))?;
        let v = v.trim();
        let value = serde_json::from_str(v).unwrap_or_else(|_| json!(v));
        m.insert(k.trim().to_string(), value);
    }
    Ok(m)
}

/// `schlab experiment`: runs one named experiment and writes `<name>.json`.
pub fn cmd_experiment(name: &str, overrides: &[String], out: &Path) -> Result<ExperimentReport, CliError> {
    let mut m = experiment_overrides(overrides)?;
    let defaults = default_parameters(name)?;
    if let Some(w) = workers_from_env() {
        if defaults.get("workers").is_some() {
            m.entry("workers").or_insert(json!(w));
        }
    }
    let report = run_experiment(name, &m)?;
    write(&out.join(format!("{name}.json")), &to_json(REPORT_SCHEMA, &report))?;
    Ok(report)
}
