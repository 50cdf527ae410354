//! Seeded Monte Carlo over many trajectories.
//!
//! Path i always uses seed `base_seed + i`, and results are collected by
//! index, so the statistics do not depend on how paths are scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{blowup_extrapolate_with, exiting_time, RateFit, RateWindow};
use crate::dynamics::DriftKind;
use crate::noise::{sample_brownian, NoiseSpec};
use crate::spectral::SpectralField;
use crate::stats::Proportion;
use crate::stepper::{integrate, Status, StepConfig, TrajectoryRecord};
use crate::{Error, Result};

/// Environment variable capping the worker pool.
pub const WORKERS_ENV: &str = "SCHLAB_WORKERS";

/// Worker count from `SCHLAB_WORKERS`, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
}

/// Knobs of an ensemble run beyond the trajectory configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    /// H^s levels R at which exiting times are collected.
    pub exit_levels: Vec<f64>,
    pub rate_window: RateWindow,
    /// Brownian modes per path.
    pub modes: usize,
    /// Worker pool size; `None` uses `SCHLAB_WORKERS` or all cores.
    pub workers: Option<usize>,
    /// Keep full records in the output (large).
    pub keep_records: bool,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            exit_levels: Vec::new(),
            rate_window: RateWindow::default(),
            modes: 1,
            workers: None,
            keep_records: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub index: usize,
    pub seed: u64,
    pub status: Status,
    pub final_time: f64,
    pub exit_times: Vec<Option<f64>>,
    pub rate_fit: Option<RateFit>,
    pub record: Option<TrajectoryRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tallies {
    pub completed: usize,
    pub breakdown: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub paths: usize,
    pub base_seed: u64,
    pub breaking_fraction: Proportion,
    pub tallies: Tallies,
    pub exit_levels: Vec<f64>,
    /// `exiting_time_samples[j][i]`: exiting time of path i at level j.
    pub exiting_time_samples: Vec<Vec<Option<f64>>>,
    pub rate_fits: Vec<RateFit>,
    pub per_path: Vec<PathSummary>,
}

/// Runs `f` in a pool of `workers` threads (or the default pool).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers.or_else(workers_from_env) {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Integrates one path of an ensemble; errors become a FAILED status.
pub fn run_path(
    u0: &SpectralField,
    horizon: f64,
    cfg: &StepConfig,
    drift: DriftKind,
    spec: &NoiseSpec,
    seed: u64,
    modes: usize,
) -> TrajectoryRecord {
    let attempt = || -> Result<TrajectoryRecord> {
        let path = sample_brownian(horizon, cfg.dt / 2.0, seed, modes)?;
        integrate(u0, horizon, cfg, drift, spec, &path)
    };
    attempt().unwrap_or_else(|e| TrajectoryRecord {
        times: Vec::new(),
        sobolev_s: cfg.sobolev_s,
        hs_norm_series: Vec::new(),
        h1_norm_series: Vec::new(),
        w1inf_series: Vec::new(),
        min_slope_series: Vec::new(),
        beta_series: Vec::new(),
        guard_w1inf_series: Vec::new(),
        tail_fraction_series: Vec::new(),
        w1inf_cap: f64::INFINITY,
        tail_cap: cfg.guards.tail_energy_fraction,
        status: Status::Failed { message: e.to_string() },
        fingerprint: cfg.fingerprint(drift, spec, u0.resolution()),
        seed,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    u0: &SpectralField,
    horizon: f64,
    cfg: &StepConfig,
    drift: DriftKind,
    spec: &NoiseSpec,
    paths: usize,
    base_seed: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleStats> {
    if paths == 0 {
        return Err(Error::Parameter("an ensemble needs at least one path".into()));
    }
    cfg.validate()?;
    spec.validate()?;
    drift.check(u0)?;
    let summaries: Vec<PathSummary> = with_workers(opts.workers, || {
        (0..paths)
            .into_par_iter()
            .map(|i| {
                let seed = base_seed.wrapping_add(i as u64);
                let rec = run_path(u0, horizon, cfg, drift, spec, seed, opts.modes);
                summarize(i, seed, rec, opts)
            })
            .collect()
    });
    Ok(aggregate(summaries, base_seed, opts, spec.is_deterministic()))
}

fn summarize(index: usize, seed: u64, rec: TrajectoryRecord, opts: &EnsembleOptions) -> PathSummary {
    let exit_times = opts
        .exit_levels
        .iter()
        .map(|&r| exiting_time(&rec, r, rec.sobolev_s).ok().flatten())
        .collect();
    let rate_fit = if rec.status.is_breakdown() {
        blowup_extrapolate_with(&rec, opts.rate_window).ok()
    } else {
        None
    };
    PathSummary {
        index,
        seed,
        status: rec.status.clone(),
        final_time: rec.times.last().copied().unwrap_or(0.0),
        exit_times,
        rate_fit,
        record: opts.keep_records.then_some(rec),
    }
}

/// With `exact` set every path is the same trajectory, so the fraction
/// carries no sampling error and its interval collapses to a point.
fn aggregate(per_path: Vec<PathSummary>, base_seed: u64, opts: &EnsembleOptions, exact: bool) -> EnsembleStats {
    let mut tallies = Tallies::default();
    for p in &per_path {
        match p.status {
            Status::Completed => tallies.completed += 1,
            Status::Breakdown { .. } => tallies.breakdown += 1,
            Status::Failed { .. } => tallies.failed += 1,
        }
    }
    let exiting_time_samples = (0..opts.exit_levels.len())
        .map(|j| per_path.iter().map(|p| p.exit_times[j]).collect())
        .collect();
    let rate_fits = per_path.iter().filter_map(|p| p.rate_fit.clone()).collect();
    let mut breaking_fraction = Proportion::new(tallies.breakdown, per_path.len());
    if exact {
        breaking_fraction.ci_low = breaking_fraction.estimate;
        breaking_fraction.ci_high = breaking_fraction.estimate;
    }
    EnsembleStats {
        paths: per_path.len(),
        base_seed,
        breaking_fraction,
        tallies,
        exit_levels: opts.exit_levels.clone(),
        exiting_time_samples,
        rate_fits,
        per_path,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub theta: f64,
    pub a: f64,
    pub breaking: Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub thetas: Vec<f64>,
    pub a_values: Vec<f64>,
    pub cells: Vec<SweepCell>,
    /// Per θ: no significant increase of the fraction between consecutive a
    /// values (the lower bound at the larger a never exceeds the upper bound
    /// at the smaller a).
    pub non_increasing_in_a: Vec<bool>,
}

impl SweepTable {
    pub fn cell(&self, theta: f64, a: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| (c.theta - theta).abs() < 1e-12 && (c.a - a).abs() < 1e-12)
    }
}

/// Breaking fractions over the (θ, a) grid under power noise. Every cell
/// reuses the same seeds, so cells differ only through (θ, a).
#[allow(clippy::too_many_arguments)]
pub fn theta_sweep(
    u0: &SpectralField,
    horizon: f64,
    cfg: &StepConfig,
    thetas: &[f64],
    a_values: &[f64],
    paths: usize,
    base_seed: u64,
    workers: Option<usize>,
) -> Result<SweepTable> {
    let opts = EnsembleOptions {
        workers,
        ..EnsembleOptions::default()
    };
    let mut cells = Vec::new();
    for &theta in thetas {
        for &a in a_values {
            let spec = NoiseSpec::Power { a, theta };
            let stats = run_ensemble(u0, horizon, cfg, DriftKind::Ch1d, &spec, paths, base_seed, &opts)?;
            cells.push(SweepCell {
                theta,
                a,
                breaking: stats.breaking_fraction,
            });
        }
    }
    let mut sorted_a = a_values.to_vec();
    sorted_a.sort_by(f64::total_cmp);
    let non_increasing_in_a = thetas
        .iter()
        .map(|&theta| {
            sorted_a.windows(2).all(|w| {
                let lo = cells.iter().find(|c| c.theta == theta && c.a == w[0]);
                let hi = cells.iter().find(|c| c.theta == theta && c.a == w[1]);
                match (lo, hi) {
                    (Some(l), Some(h)) => h.breaking.ci_low <= l.breaking.ci_high,
                    _ => true,
                }
            })
        })
        .collect();
    Ok(SweepTable {
        thetas: thetas.to_vec(),
        a_values: a_values.to_vec(),
        cells,
        non_increasing_in_a,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub label: String,
    pub tau: Option<f64>,
    /// |τ_n − τ| when both exist.
    pub gap: Option<f64>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub level: f64,
    pub sobolev_s: f64,
    pub tau_reference: Option<f64>,
    pub entries: Vec<ProbeEntry>,
    /// Gaps shrink along the perturbation list (vacuous if any gap is missing).
    pub gaps_shrinking: bool,
}

/// Exiting times of u₀ and of each perturbation at H^s level R, all driven by
/// the same Brownian path.
#[allow(clippy::too_many_arguments)]
pub fn stability_probe(
    u0: &SpectralField,
    perturbations: &[(String, SpectralField)],
    r: f64,
    horizon: f64,
    cfg: &StepConfig,
    drift: DriftKind,
    spec: &NoiseSpec,
    seed: u64,
) -> Result<StabilityReport> {
    let path = sample_brownian(horizon, cfg.dt / 2.0, seed, 1)?;
    let reference = integrate(u0, horizon, cfg, drift, spec, &path)?;
    let tau_ref = exiting_time(&reference, r, cfg.sobolev_s)?;
    let mut entries = Vec::new();
    for (label, p) in perturbations {
        let rec = integrate(p, horizon, cfg, drift, spec, &path)?;
        let tau = exiting_time(&rec, r, cfg.sobolev_s)?;
        let gap = match (tau, tau_ref) {
            (Some(a), Some(b)) => Some((a - b).abs()),
            _ => None,
        };
        entries.push(ProbeEntry {
            label: label.clone(),
            tau,
            gap,
            status: rec.status,
        });
    }
    let gaps: Vec<Option<f64>> = entries.iter().map(|e| e.gap).collect();
    let gaps_shrinking = gaps.iter().all(|g| g.is_some()) && gaps.windows(2).all(|w| w[1].unwrap() <= w[0].unwrap());
    Ok(StabilityReport {
        level: r,
        sobolev_s: cfg.sobolev_s,
        tau_reference: tau_ref,
        entries,
        gaps_shrinking,
    })
}
