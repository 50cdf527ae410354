//! Trajectory diagnostics: exiting times, the minimal slope, the breaking
//! threshold, and the blow-up time / rate extrapolation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::spectral::{hs_norm, SpectralField};
use crate::stats::line_fit;
use crate::stepper::TrajectoryRecord;
use crate::{Error, Result};

pub use crate::spectral::min_slope;

/// Sharp constant in max f² ≤ λ‖f‖²_{H¹} under the spectral-sum norm:
/// λ = G_T(0)/(2π) = coth(π)/(4π), attained by f̂(k) ∝ 1/(1+k²).
pub fn lambda_sharp() -> f64 {
    1.0 / (PI.tanh() * 4.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub lambda: f64,
    /// Fitted drift constant D̂.
    pub d_hat: f64,
    /// K = (λ/2)‖u₀‖²_{H¹}.
    pub k: f64,
}

impl ModelConstants {
    pub fn new(lambda: f64, d_hat: f64, u0: &SpectralField) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Parameter(format!("λ = {lambda} must be positive")));
        }
        Ok(Self {
            lambda,
            d_hat,
            k: 0.5 * lambda * hs_norm(u0, 1.0).powi(2),
        })
    }
}

/// First recorded time with ‖u‖_{H^s} > R; `None` if the level is never
/// exceeded. `s` must be the record's own index or 1.
pub fn exiting_time(rec: &TrajectoryRecord, r: f64, s: f64) -> Result<Option<f64>> {
    let series = if (s - rec.sobolev_s).abs() < 1e-12 {
        &rec.hs_norm_series
    } else if (s - 1.0).abs() < 1e-12 {
        &rec.h1_norm_series
    } else {
        return Err(Error::Parameter(format!(
            "record holds H^{} and H^1 norms, not H^{s}",
            rec.sobolev_s
        )));
    };
    Ok(series.iter().position(|&v| v > r).map(|i| rec.times[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdVerdict {
    PredictsBreaking,
    Inconclusive,
}

/// Right-hand side −½√(b*²/c² + 4λ‖u₀‖²_{H¹}) − b*/(2c) of the slope test.
pub fn threshold_level(u0: &SpectralField, b_star: f64, c: f64, lambda: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Parameter(format!("c = {c} must lie in (0, 1)")));
    }
    if !(b_star >= 0.0) || !(lambda > 0.0) {
        return Err(Error::Parameter("need b* ≥ 0 and λ > 0".into()));
    }
    let h1 = hs_norm(u0, 1.0);
    Ok(-0.5 * ((b_star / c).powi(2) + 4.0 * lambda * h1 * h1).sqrt() - b_star / (2.0 * c))
}

pub fn breaking_threshold(u0: &SpectralField, b_star: f64, c: f64, lambda: f64) -> Result<ThresholdVerdict> {
    let level = threshold_level(u0, b_star, c, lambda)?;
    Ok(if min_slope(u0)? < level {
        ThresholdVerdict::PredictsBreaking
    } else {
        ThresholdVerdict::Inconclusive
    })
}

/// Slope band used for the asymptotic fit: |M| between `min_abs` and
/// `max_frac`·max|M|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateWindow {
    pub min_abs: f64,
    pub max_frac: f64,
}

impl Default for RateWindow {
    fn default() -> Self {
        Self {
            min_abs: 10.0,
            max_frac: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub window: [f64; 2],
    pub samples: usize,
    /// Window average of M(t)·∫ₜ^{τ̂}β / β(τ̂).
    pub estimate: f64,
    /// RMS spread of the per-sample rate values around `estimate`.
    pub residual: f64,
    pub tau_hat: f64,
    /// Fitted κ in −1/M(t) = κ(B(τ̂) − B(t)); ½/β(τ*) asymptotically.
    pub slope: f64,
    /// β(τ̂), extrapolated flat from the last sample.
    pub beta_tau: f64,
}

/// B(t_i) = ∫₀^{t_i} β by the trapezoid rule on the record grid.
pub fn cumulative_beta(rec: &TrajectoryRecord) -> Vec<f64> {
    let mut out = Vec::with_capacity(rec.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..rec.len() {
        acc += 0.5 * (rec.beta_series[i] + rec.beta_series[i - 1]) * (rec.times[i] - rec.times[i - 1]);
        out.push(acc);
    }
    out
}

/// Least-squares fit of −1/M(t) = κ(B(τ̂) − B(t)) over the window, with κ and
/// B(τ̂) both free; τ̂ follows by extending B past the last sample at the
/// last recorded β.
pub fn blowup_extrapolate(rec: &TrajectoryRecord) -> Result<RateFit> {
    blowup_extrapolate_with(rec, RateWindow::default())
}

pub fn blowup_extrapolate_with(rec: &TrajectoryRecord, window: RateWindow) -> Result<RateFit> {
    let m = &rec.min_slope_series;
    let peak = m.iter().fold(0.0f64, |a, v| a.max(-v));
    let idx: Vec<usize> = (0..rec.len())
        .filter(|&i| -m[i] >= window.min_abs && -m[i] <= window.max_frac * peak)
        .collect();
    if idx.len() < 8 {
        return Err(Error::Fit(format!(
            "only {} samples with |M| in [{}, {}·max|M|]; need 8",
            idx.len(),
            window.min_abs,
            window.max_frac
        )));
    }
    let big_b = cumulative_beta(rec);
    let x: Vec<f64> = idx.iter().map(|&i| big_b[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| -1.0 / m[i]).collect();
    let fit = line_fit(&x, &y).ok_or_else(|| Error::Fit("degenerate window".into()))?;
    let kappa = -fit.slope;
    if !(kappa > 0.0) {
        return Err(Error::Fit(format!(
            "−1/M does not decrease along the window (κ = {kappa})"
        )));
    }
    let b_tau = fit.intercept / kappa;
    let last = rec.len() - 1;
    let beta_last = rec.beta_series[last];
    let tau_hat = if b_tau >= big_b[last] {
        rec.times[last] + (b_tau - big_b[last]) / beta_last
    } else {
        // zero crossing inside the record: interpolate B
        let j = big_b.iter().position(|&b| b >= b_tau).unwrap_or(last).max(1);
        let (b0, b1) = (big_b[j - 1], big_b[j]);
        let w = if b1 > b0 { (b_tau - b0) / (b1 - b0) } else { 0.0 };
        rec.times[j - 1] + w * (rec.times[j] - rec.times[j - 1])
    };
    let rates: Vec<f64> = idx.iter().map(|&i| m[i] * (b_tau - big_b[i]) / beta_last).collect();
    let estimate = rates.iter().sum::<f64>() / rates.len() as f64;
    let residual = (rates.iter().map(|r| (r - estimate).powi(2)).sum::<f64>() / rates.len() as f64).sqrt();
    Ok(RateFit {
        window: [rec.times[idx[0]], rec.times[*idx.last().expect("non-empty")]],
        samples: idx.len(),
        estimate,
        residual,
        tau_hat,
        slope: kappa,
        beta_tau: beta_last,
    })
}

/// Terminal-window average of M(t)·∫ₜ^{τ̂}β / β(τ̂) for a given fit.
pub fn breaking_rate(rec: &TrajectoryRecord, fit: &RateFit) -> Result<f64> {
    if !fit.tau_hat.is_finite() || fit.samples < 8 {
        return Err(Error::Fit("rate needs a valid blow-up fit".into()));
    }
    let big_b = cumulative_beta(rec);
    let b_tau = {
        let last = rec.len() - 1;
        if fit.tau_hat >= rec.times[last] {
            big_b[last] + (fit.tau_hat - rec.times[last]) * fit.beta_tau
        } else {
            let j = rec.times.iter().position(|&t| t >= fit.tau_hat).unwrap_or(last).max(1);
            let w = (fit.tau_hat - rec.times[j - 1]) / (rec.times[j] - rec.times[j - 1]);
            big_b[j - 1] + w * (big_b[j] - big_b[j - 1])
        }
    };
    let vals: Vec<f64> = (0..rec.len())
        .filter(|&i| rec.times[i] >= fit.window[0] && rec.times[i] <= fit.window[1])
        .map(|i| rec.min_slope_series[i] * (b_tau - big_b[i]) / fit.beta_tau)
        .collect();
    if vals.is_empty() {
        return Err(Error::Fit("empty rate window".into()));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}
