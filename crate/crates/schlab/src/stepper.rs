//! Time integration: Euler–Maruyama for the Itô SPDE, classical RK4 for the
//! random-coefficient v-equation, the mollified cut-off drift, and a guarded
//! trajectory driver that records diagnostics every step.
//!
//! The v-route writes u = βv. For linear noise β is the exponential
//! martingale of the path. For power noise β solves
//! dβ = a(1 + β‖v‖_{W^{1,∞}})^θ β dW, advanced by a log-Euler step on each
//! half interval of the path grid; since the drifts are quadratic, v then
//! obeys v_t = β·drift(v) with no stochastic integral.

use serde::{Deserialize, Serialize};

use crate::dynamics::DriftKind;
use crate::noise::{beta_process, noise_increment, step_count, BrownianPath, NoiseSpec};
use crate::spectral::{dealias_cutoff, hs_norm, mollify_j, partial, rho, w1inf_norm, SpectralField};
use crate::{Error, Result};

/// Below this value of β the v-update per step is under 1e−14 relative and
/// the RK4 stages are skipped.
const BETA_FROZEN: f64 = 1e-14;

/// Largest admitted β·Δt·sup|v|·K per RK4 step before the step is split.
const CFL_LIMIT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    Rk4Random,
}

/// Breakdown guards. The W^{1,∞} cap is `w1inf_factor` times the initial
/// value unless an absolute cap is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guards {
    pub w1inf_factor: f64,
    pub w1inf_cap: Option<f64>,
    pub tail_energy_fraction: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            w1inf_factor: 50.0,
            w1inf_cap: None,
            tail_energy_fraction: 0.05,
        }
    }
}

/// Parameters of the regularized drift χ_R(‖u‖_{W^{1,∞}}){J_ε[(J_εu·∇)J_εu] + F(u)}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mollify {
    pub eps: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub guards: Guards,
    pub mollify: Option<Mollify>,
    /// Sobolev index of the recorded H^s series.
    pub sobolev_s: f64,
}

impl StepConfig {
    pub fn new(dt: f64, scheme: Scheme) -> Self {
        Self {
            dt,
            scheme,
            guards: Guards::default(),
            mollify: None,
            sobolev_s: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Parameter(format!("Δt = {} must be positive", self.dt)));
        }
        let g = &self.guards;
        if !(g.w1inf_factor > 0.0) || g.w1inf_cap.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Parameter("W^{1,∞} cap must be positive".into()));
        }
        if !(g.tail_energy_fraction > 0.0 && g.tail_energy_fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "tail energy fraction {} must lie in (0, 1)",
                g.tail_energy_fraction
            )));
        }
        if let Some(m) = self.mollify {
            check_mollify(m.eps, m.r)?;
        }
        Ok(())
    }

    /// Stable text identifying the configuration, stored in every record.
    pub fn fingerprint(&self, drift: DriftKind, spec: &NoiseSpec, n: usize) -> String {
        format!(
            "dt={:e};scheme={:?};guards={:?};mollify={:?};s={};drift={:?};noise={:?};N={}",
            self.dt, self.scheme, self.guards, self.mollify, self.sobolev_s, drift, spec, n
        )
    }
}

fn check_mollify(eps: f64, r: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("mollifier ε = {eps} must lie in (0, 1)")));
    }
    if !(r > 1.0) {
        return Err(Error::Parameter(format!("cut-off radius R = {r} must exceed 1")));
    }
    Ok(())
}

/// How a trajectory ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Completed,
    Breakdown { t_detect: f64, reason: String },
    Failed { message: String },
}

impl Status {
    pub fn is_breakdown(&self) -> bool {
        matches!(self, Status::Breakdown { .. })
    }

    pub fn flag(&self) -> &'static str {
        match self {
            Status::Completed => "completed",
            Status::Breakdown { .. } => "breakdown",
            Status::Failed { .. } => "failed",
        }
    }
}

/// Per-step diagnostics of the physical solution u. `guard_w1inf` and
/// `tail_fraction` are the quantities compared against the caps (on v for
/// the v-route, on u otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub sobolev_s: f64,
    pub hs_norm_series: Vec<f64>,
    pub h1_norm_series: Vec<f64>,
    pub w1inf_series: Vec<f64>,
    pub min_slope_series: Vec<f64>,
    pub beta_series: Vec<f64>,
    pub guard_w1inf_series: Vec<f64>,
    pub tail_fraction_series: Vec<f64>,
    pub w1inf_cap: f64,
    pub tail_cap: f64,
    pub status: Status,
    pub fingerprint: String,
    pub seed: u64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Guard soundness, derivable from the record alone: a breakdown must end
    /// on a sample that exceeds one of the caps.
    pub fn guards_consistent(&self) -> bool {
        match self.status {
            Status::Breakdown { .. } => {
                let w = *self.guard_w1inf_series.last().unwrap_or(&0.0);
                let f = *self.tail_fraction_series.last().unwrap_or(&0.0);
                w >= self.w1inf_cap || f >= self.tail_cap
            }
            _ => true,
        }
    }
}

/// Fraction of the H¹ energy carried by modes with N/6 < max_j |k_j|.
pub fn tail_energy_fraction(f: &SpectralField) -> f64 {
    let n = f.resolution();
    let edge = n as f64 / 6.0;
    let b = f.block_len();
    let (mut top, mut all) = (0.0, 0.0);
    for (idx, c) in f.coeffs().iter().enumerate() {
        let k = f.k_of(idx % b);
        let e = (1.0 + (k[0] * k[0] + k[1] * k[1]) as f64) * c.norm_sqr();
        all += e;
        if (k[0].abs().max(k[1].abs())) as f64 > edge {
            top += e;
        }
    }
    if all > 0.0 {
        top / all
    } else {
        0.0
    }
}

/// The drift evaluated by the steppers: plain or mollified with cut-off.
fn drift_eval(u: &SpectralField, drift: DriftKind, mollify: Option<Mollify>) -> Result<SpectralField> {
    match mollify {
        None => drift.eval(u),
        Some(m) => mollified_drift(u, m.eps, m.r, drift),
    }
}

/// −χ_R(‖u‖_{W^{1,∞}}){J_ε[(J_εu·∇)J_εu] + F(u)}, with q in place of F in 1-D.
pub fn mollified_drift(u: &SpectralField, eps: f64, r: f64, drift: DriftKind) -> Result<SpectralField> {
    check_mollify(eps, r)?;
    drift.check(u)?;
    let chi = rho(w1inf_norm(u) / r);
    if chi == 0.0 {
        return Ok(u.scale(0.0));
    }
    let ju = mollify_j(u, eps)?;
    let transport = mollify_j(&drift.transport(&ju)?, eps)?;
    let nonlocal = drift.nonlocal(u)?;
    Ok(transport.add(&nonlocal)?.scale(-chi))
}

/// u + Δt·drift(u) + noise_increment(u, ΔW).
pub fn em_step(
    u: &SpectralField,
    t: f64,
    dt: f64,
    dw: &[f64],
    drift: DriftKind,
    spec: &NoiseSpec,
) -> Result<SpectralField> {
    em_step_with(u, t, dt, dw, drift, spec, None)
}

fn em_step_with(
    u: &SpectralField,
    t: f64,
    dt: f64,
    dw: &[f64],
    drift: DriftKind,
    spec: &NoiseSpec,
    mollify: Option<Mollify>,
) -> Result<SpectralField> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("Δt = {dt} must be positive")));
    }
    let d = drift_eval(u, drift, mollify)?;
    let g = noise_increment(spec, u, t, dw)?;
    Ok(SpectralField::linear_combination(&[(1.0, u), (dt, &d), (1.0, &g)])?.dealiased())
}

/// β sampled on a uniform grid (node i at time i·dt).
#[derive(Debug, Clone, PartialEq)]
pub struct BetaGrid {
    pub dt: f64,
    pub values: Vec<f64>,
}

/// Classical RK4 for v_t = β(t)·drift(v), stage β read at the grid nodes t,
/// t + Δt/2 and t + Δt (no interpolation).
pub fn rk4_random_step(v: &SpectralField, t: f64, dt: f64, beta: &BetaGrid, drift: DriftKind) -> Result<SpectralField> {
    let stride = (dt / beta.dt).round() as usize;
    if stride < 2 || !stride.is_multiple_of(2) || ((stride as f64) * beta.dt - dt).abs() > 1e-9 * dt {
        return Err(Error::Parameter(format!(
            "β grid step {} too coarse for Δt = {dt}: need Δt/2 or finer",
            beta.dt
        )));
    }
    let i = (t / beta.dt).round() as usize;
    if i + stride >= beta.values.len() {
        return Err(Error::Parameter(format!("β grid does not reach t + Δt = {}", t + dt)));
    }
    let b = [beta.values[i], beta.values[i + stride / 2], beta.values[i + stride]];
    rk4_stages(v, dt, b, drift, None)
}

/// One deterministic RK4 step (β ≡ 1) of the plain or mollified drift.
pub fn rk4_step(v: &SpectralField, dt: f64, drift: DriftKind, mollify: Option<Mollify>) -> Result<SpectralField> {
    rk4_stages(v, dt, [1.0; 3], drift, mollify)
}

/// RK4 stage combination with stage coefficients b = (β(t), β(t+Δt/2), β(t+Δt)).
pub fn rk4_stages(
    v: &SpectralField,
    dt: f64,
    b: [f64; 3],
    drift: DriftKind,
    mollify: Option<Mollify>,
) -> Result<SpectralField> {
    let f = |x: &SpectralField| drift_eval(x, drift, mollify);
    let k1 = f(v)?.scale(b[0]);
    let k2 = f(&v.axpy(0.5 * dt, &k1)?)?.scale(b[1]);
    let k3 = f(&v.axpy(0.5 * dt, &k2)?)?.scale(b[1]);
    let k4 = f(&v.axpy(dt, &k3)?)?.scale(b[2]);
    Ok(SpectralField::linear_combination(&[
        (1.0, v),
        (dt / 6.0, &k1),
        (dt / 3.0, &k2),
        (dt / 3.0, &k3),
        (dt / 6.0, &k4),
    ])?
    .dealiased())
}

/// Autonomous RK4 in the time-changed variable s = ∫β, used when one step at
/// the current β would violate the transport CFL limit.
fn rk4_time_changed(
    v: &SpectralField,
    ds: f64,
    substeps: usize,
    drift: DriftKind,
    mollify: Option<Mollify>,
) -> Result<SpectralField> {
    let h = ds / substeps as f64;
    let mut x = v.clone();
    for _ in 0..substeps {
        x = rk4_stages(&x, h, [1.0; 3], drift, mollify)?;
    }
    Ok(x)
}

struct Diag {
    hs: f64,
    h1: f64,
    w1inf: f64,
    sup: f64,
    min_slope: f64,
    tail: f64,
}

fn diagnostics(f: &SpectralField, s: f64) -> Diag {
    let sup_of = |g: &SpectralField| {
        g.to_physical_refined(2)
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let sup = sup_of(f);
    let (w1inf, min_slope) = if f.dim() == 1 && f.components() == 1 {
        let d = partial(f, 0).to_physical_refined(2).remove(0);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for v in d {
            lo = lo.min(v);
            hi = hi.max(v.abs());
        }
        (sup.max(hi), lo)
    } else {
        (w1inf_norm(f), f64::NAN)
    };
    Diag {
        hs: hs_norm(f, s),
        h1: hs_norm(f, 1.0),
        w1inf,
        sup,
        min_slope,
        tail: tail_energy_fraction(f),
    }
}

struct Recorder {
    rec: TrajectoryRecord,
}

impl Recorder {
    fn push(&mut self, t: f64, d: &Diag, beta: f64, guard_w: f64) {
        let r = &mut self.rec;
        r.times.push(t);
        r.hs_norm_series.push(beta * d.hs);
        r.h1_norm_series.push(beta * d.h1);
        r.w1inf_series.push(beta * d.w1inf);
        // NaN is not representable in JSON: 2-D runs record 0 for the 1-D slope
        r.min_slope_series
            .push(if d.min_slope.is_nan() { 0.0 } else { beta * d.min_slope });
        r.beta_series.push(beta);
        r.guard_w1inf_series.push(guard_w);
        r.tail_fraction_series.push(d.tail);
    }

    /// Returns the breakdown reason if a cap is reached.
    fn check(&self, guard_w: f64, tail: f64) -> Option<String> {
        if guard_w >= self.rec.w1inf_cap {
            Some(format!("W1inf {guard_w:.6e} reached cap {:.6e}", self.rec.w1inf_cap))
        } else if tail >= self.rec.tail_cap {
            Some(format!(
                "tail energy fraction {tail:.6e} reached {:.6e}",
                self.rec.tail_cap
            ))
        } else {
            None
        }
    }
}

/// Integrates from u₀ to T (or until a guard fires), recording diagnostics
/// after every step.
pub fn integrate(
    u0: &SpectralField,
    horizon: f64,
    cfg: &StepConfig,
    drift: DriftKind,
    spec: &NoiseSpec,
    path: &BrownianPath,
) -> Result<TrajectoryRecord> {
    integrate_with_state(u0, horizon, cfg, drift, spec, path).map(|(rec, _)| rec)
}

/// As [`integrate`], also returning the last state u (β·v on the v-route).
pub fn integrate_with_state(
    u0: &SpectralField,
    horizon: f64,
    cfg: &StepConfig,
    drift: DriftKind,
    spec: &NoiseSpec,
    path: &BrownianPath,
) -> Result<(TrajectoryRecord, SpectralField)> {
    cfg.validate()?;
    spec.validate()?;
    drift.check(u0)?;
    if !(horizon > 0.0) {
        return Err(Error::Parameter(format!("horizon {horizon} must be positive")));
    }
    let steps = step_count(horizon, cfg.dt);
    let ratio = (cfg.dt / path.dt).round() as usize;
    if ratio == 0 || ((ratio as f64) * path.dt - cfg.dt).abs() > 1e-9 * cfg.dt {
        return Err(Error::Parameter(format!(
            "path step {} does not divide Δt = {}",
            path.dt, cfg.dt
        )));
    }
    if cfg.scheme == Scheme::Rk4Random && !ratio.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "RK4 route needs the path at Δt/2 or finer (path step {}, Δt {})",
            path.dt, cfg.dt
        )));
    }
    if path.steps() < steps * ratio {
        return Err(Error::Parameter(format!(
            "path horizon {} shorter than requested {horizon}",
            path.horizon
        )));
    }
    if matches!(spec, NoiseSpec::FBounded) && cfg.scheme == Scheme::Rk4Random {
        return Err(Error::Parameter(
            "F-bounded noise has no β transform; use the Euler–Maruyama scheme".into(),
        ));
    }
    let u0 = u0.clone().dealiased();
    let d0 = diagnostics(&u0, cfg.sobolev_s);
    let cap = cfg
        .guards
        .w1inf_cap
        .unwrap_or(cfg.guards.w1inf_factor * d0.w1inf.max(f64::MIN_POSITIVE));
    let mut recorder = Recorder {
        rec: TrajectoryRecord {
            times: Vec::with_capacity(steps + 1),
            sobolev_s: cfg.sobolev_s,
            hs_norm_series: Vec::with_capacity(steps + 1),
            h1_norm_series: Vec::with_capacity(steps + 1),
            w1inf_series: Vec::with_capacity(steps + 1),
            min_slope_series: Vec::with_capacity(steps + 1),
            beta_series: Vec::with_capacity(steps + 1),
            guard_w1inf_series: Vec::with_capacity(steps + 1),
            tail_fraction_series: Vec::with_capacity(steps + 1),
            w1inf_cap: cap,
            tail_cap: cfg.guards.tail_energy_fraction,
            status: Status::Completed,
            fingerprint: cfg.fingerprint(drift, spec, u0.resolution()),
            seed: path.seed,
        },
    };
    recorder.push(0.0, &d0, 1.0, d0.w1inf);
    let (status, last) = match cfg.scheme {
        Scheme::EulerMaruyama => run_em(&u0, steps, ratio, cfg, drift, spec, path, &mut recorder)?,
        Scheme::Rk4Random => run_rk4(&u0, d0, steps, ratio, cfg, drift, spec, path, &mut recorder)?,
    };
    recorder.rec.status = status;
    Ok((recorder.rec, last))
}

fn summed_increments(path: &BrownianPath, start: usize, len: usize) -> Vec<f64> {
    path.increments
        .iter()
        .map(|inc| inc[start..start + len].iter().sum())
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_em(
    u0: &SpectralField,
    steps: usize,
    ratio: usize,
    cfg: &StepConfig,
    drift: DriftKind,
    spec: &NoiseSpec,
    path: &BrownianPath,
    recorder: &mut Recorder,
) -> Result<(Status, SpectralField)> {
    let beta_ref = match spec {
        NoiseSpec::Linear { b } => Some(beta_process(path, b)),
        _ => None,
    };
    let mut u = u0.clone();
    for i in 0..steps {
        let t = i as f64 * cfg.dt;
        let dw = summed_increments(path, i * ratio, ratio);
        u = em_step_with(&u, t, cfg.dt, &dw, drift, spec, cfg.mollify)?;
        let t1 = (i + 1) as f64 * cfg.dt;
        let d = diagnostics(&u, cfg.sobolev_s);
        if !(d.hs.is_finite() && d.w1inf.is_finite()) {
            let message = format!("non-finite state at t = {t1}");
            return Ok((Status::Failed { message }, u));
        }
        // the record stores u itself, so β enters only as a reference column
        let beta = beta_ref.as_ref().map_or(1.0, |b| b[(i + 1) * ratio]);
        recorder.push(t1, &d, 1.0, d.w1inf);
        *recorder.rec.beta_series.last_mut().expect("just pushed") = beta;
        if let Some(reason) = recorder.check(d.w1inf, d.tail) {
            return Ok((Status::Breakdown { t_detect: t1, reason }, u));
        }
    }
    Ok((Status::Completed, u))
}

#[allow(clippy::too_many_arguments)]
fn run_rk4(
    v0: &SpectralField,
    d0: Diag,
    steps: usize,
    ratio: usize,
    cfg: &StepConfig,
    drift: DriftKind,
    spec: &NoiseSpec,
    path: &BrownianPath,
    recorder: &mut Recorder,
) -> Result<(Status, SpectralField)> {
    let half = ratio / 2;
    let linear_beta = match spec {
        NoiseSpec::Linear { b } => Some(beta_process(path, b)),
        _ => None,
    };
    let cutoff = dealias_cutoff(v0.resolution()) as f64;
    let mut v = v0.clone();
    let mut d = d0;
    let mut beta = 1.0;
    for i in 0..steps {
        let stage = match (spec, &linear_beta) {
            (NoiseSpec::Linear { .. }, Some(b)) => [b[i * ratio], b[i * ratio + half], b[(i + 1) * ratio]],
            (NoiseSpec::Power { a, theta }, _) => {
                let advance = |b0: f64, start: usize| {
                    let g = a * (1.0 + b0 * d.w1inf).powf(*theta);
                    let dw: f64 = path.increments[0][start..start + half].iter().sum();
                    b0 * (g * dw - 0.5 * g * g * cfg.dt * 0.5).exp()
                };
                let bh = advance(beta, i * ratio);
                let b1 = advance(bh, i * ratio + half);
                [beta, bh, b1]
            }
            _ => [1.0; 3],
        };
        let bmax = stage.iter().cloned().fold(0.0f64, f64::max);
        if bmax >= BETA_FROZEN {
            let cfl = bmax * cfg.dt * d.sup * cutoff;
            v = if cfl > CFL_LIMIT {
                let ds = cfg.dt / 6.0 * (stage[0] + 4.0 * stage[1] + stage[2]);
                rk4_time_changed(&v, ds, (cfl / CFL_LIMIT).ceil() as usize, drift, cfg.mollify)?
            } else {
                rk4_stages(&v, cfg.dt, stage, drift, cfg.mollify)?
            };
            d = diagnostics(&v, cfg.sobolev_s);
        }
        beta = stage[2];
        let t1 = (i + 1) as f64 * cfg.dt;
        if !(d.hs.is_finite() && d.w1inf.is_finite() && beta.is_finite()) {
            let message = format!("non-finite state at t = {t1}");
            return Ok((Status::Failed { message }, v.scale(beta)));
        }
        recorder.push(t1, &d, beta, d.w1inf);
        if let Some(reason) = recorder.check(d.w1inf, d.tail) {
            return Ok((Status::Breakdown { t_detect: t1, reason }, v.scale(beta)));
        }
    }
    Ok((Status::Completed, v.scale(beta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ch_drift;
    use crate::noise::sample_brownian;

    #[test]
    fn zero_state_is_fixed() {
        let z = SpectralField::zeros(1, 1, 32).unwrap();
        let out = em_step(&z, 0.0, 0.01, &[0.3], DriftKind::Ch1d, &NoiseSpec::Zero).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn one_deterministic_em_step() {
        let u = SpectralField::from_fn_1d(64, |x| x.cos()).unwrap();
        let out = em_step(&u, 0.0, 0.01, &[0.0], DriftKind::Ch1d, &NoiseSpec::Zero).unwrap();
        let expect = SpectralField::from_fn_1d(64, |x| x.cos() + 0.006 * (2.0 * x).sin()).unwrap();
        assert!(hs_norm(&out.sub(&expect).unwrap(), 0.0) < 1e-14);
    }

    #[test]
    fn rk4_rejects_coarse_beta_grid() {
        let v = SpectralField::from_fn_1d(32, |x| x.sin()).unwrap();
        let grid = BetaGrid {
            dt: 0.01,
            values: vec![1.0; 11],
        };
        assert!(rk4_random_step(&v, 0.0, 0.01, &grid, DriftKind::Ch1d).is_err());
        let fine = BetaGrid {
            dt: 0.005,
            values: vec![1.0; 21],
        };
        let out = rk4_random_step(&v, 0.0, 0.01, &fine, DriftKind::Ch1d).unwrap();
        let plain = rk4_stages(&v, 0.01, [1.0; 3], DriftKind::Ch1d, None).unwrap();
        assert_eq!(out, plain);
    }

    #[test]
    fn rk4_step_matches_manual_stages() {
        let v = SpectralField::from_fn_1d(32, |x| x.sin()).unwrap();
        let grid = BetaGrid {
            dt: 0.005,
            values: (0..21).map(|i| 1.0 + 0.01 * i as f64).collect(),
        };
        let out = rk4_random_step(&v, 0.02, 0.01, &grid, DriftKind::Ch1d).unwrap();
        let b = [1.04, 1.05, 1.06];
        let dt = 0.01;
        let k1 = ch_drift(&v).unwrap().scale(b[0]);
        let k2 = ch_drift(&v.axpy(dt / 2.0, &k1).unwrap()).unwrap().scale(b[1]);
        let k3 = ch_drift(&v.axpy(dt / 2.0, &k2).unwrap()).unwrap().scale(b[1]);
        let k4 = ch_drift(&v.axpy(dt, &k3).unwrap()).unwrap().scale(b[2]);
        let manual = SpectralField::linear_combination(&[
            (1.0, &v),
            (dt / 6.0, &k1),
            (dt / 3.0, &k2),
            (dt / 3.0, &k3),
            (dt / 6.0, &k4),
        ])
        .unwrap();
        assert!(hs_norm(&out.sub(&manual).unwrap(), 0.0) < 1e-15);
    }

    #[test]
    fn cutoff_freezes_large_states() {
        let u = SpectralField::from_fn_1d(64, |x| 3.0 * x.sin()).unwrap();
        let d = mollified_drift(&u, 0.1, 1.2, DriftKind::Ch1d).unwrap();
        assert!(d.coeffs().iter().all(|c| c.norm() == 0.0));
        assert!(mollified_drift(&u, 0.1, 0.5, DriftKind::Ch1d).is_err());
        assert!(mollified_drift(&u, 1.5, 4.0, DriftKind::Ch1d).is_err());
    }

    #[test]
    fn mollified_equals_plain_below_band_threshold() {
        let u = SpectralField::from_fn_1d(64, |x| 0.5 * x.sin() + 0.1 * (2.0 * x).cos()).unwrap();
        let a = mollified_drift(&u, 1.0 / 64.0, 10.0, DriftKind::Ch1d).unwrap();
        assert_eq!(a, ch_drift(&u).unwrap());
    }

    #[test]
    fn zero_data_stays_zero_under_noise() {
        let z = SpectralField::zeros(1, 1, 32).unwrap();
        let path = sample_brownian(0.5, 0.005, 3, 1).unwrap();
        for scheme in [Scheme::EulerMaruyama, Scheme::Rk4Random] {
            let cfg = StepConfig::new(0.01, scheme);
            let spec = NoiseSpec::Power { a: 1.0, theta: 0.5 };
            let rec = integrate(&z, 0.5, &cfg, DriftKind::Ch1d, &spec, &path).unwrap();
            assert_eq!(rec.status, Status::Completed);
            assert!(rec.hs_norm_series.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn integrate_rejects_mismatched_path() {
        let u = SpectralField::from_fn_1d(32, |x| x.sin()).unwrap();
        let path = sample_brownian(0.5, 0.01, 3, 1).unwrap();
        let cfg = StepConfig::new(0.01, Scheme::Rk4Random);
        assert!(integrate(&u, 0.5, &cfg, DriftKind::Ch1d, &NoiseSpec::Zero, &path).is_err());
        let short = sample_brownian(0.2, 0.005, 3, 1).unwrap();
        assert!(integrate(&u, 0.5, &cfg, DriftKind::Ch1d, &NoiseSpec::Zero, &short).is_err());
    }
}
