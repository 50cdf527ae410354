//! Brownian paths, the exponential martingale β and the multiplicative noise
//! coefficients.
//!
//! All stochastic integrals use left-point (Itô) sums.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DriftKind;
use crate::spectral::{w1inf_norm, SpectralField};
use crate::stats::Proportion;
use crate::{Error, Result};

/// Sampled Wiener path(s) on the uniform grid t_i = iΔt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianPath {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    /// `increments[m][i]` is W_m(t_{i+1}) − W_m(t_i).
    pub increments: Vec<Vec<f64>>,
}

/// Number of grid steps covering [0, T] at step Δt.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    (horizon / dt + 1e-9).floor() as usize
}

/// Draws `modes` independent paths from one seeded stream (mode-major).
pub fn sample_brownian(horizon: f64, dt: f64, seed: u64, modes: usize) -> Result<BrownianPath> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::Parameter(format!(
            "Brownian path needs T > 0 and Δt > 0 (got T = {horizon}, Δt = {dt})"
        )));
    }
    if modes == 0 {
        return Err(Error::Parameter("at least one Brownian mode required".into()));
    }
    let steps = step_count(horizon, dt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = dt.sqrt();
    let increments = (0..modes)
        .map(|_| {
            (0..steps)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sd * z
                })
                .collect()
        })
        .collect();
    Ok(BrownianPath {
        horizon,
        dt,
        seed,
        increments,
    })
}

impl BrownianPath {
    pub fn modes(&self) -> usize {
        self.increments.len()
    }

    pub fn steps(&self) -> usize {
        self.increments[0].len()
    }

    /// W_m(t_i) for i = 0..=steps.
    pub fn values(&self, mode: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.steps() + 1);
        let mut acc = 0.0;
        w.push(0.0);
        for d in &self.increments[mode] {
            acc += d;
            w.push(acc);
        }
        w
    }

    /// The same path observed on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return Err(Error::Parameter(format!(
                "cannot coarsen {} steps by {factor}",
                self.steps()
            )));
        }
        Ok(BrownianPath {
            horizon: self.horizon,
            dt: self.dt * factor as f64,
            seed: self.seed,
            increments: self
                .increments
                .iter()
                .map(|inc| inc.chunks(factor).map(|c| c.iter().sum()).collect())
                .collect(),
        })
    }

    /// Halves the step by Brownian-bridge midpoints drawn from `bridge_seed`;
    /// coarsening the result by 2 recovers this path up to round-off.
    pub fn refine(&self, bridge_seed: u64) -> BrownianPath {
        let mut rng = ChaCha8Rng::seed_from_u64(bridge_seed);
        let sd = (self.dt / 4.0).sqrt();
        BrownianPath {
            horizon: self.horizon,
            dt: self.dt / 2.0,
            seed: self.seed,
            increments: self
                .increments
                .iter()
                .map(|inc| {
                    inc.iter()
                        .flat_map(|&d| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            let first = 0.5 * d + sd * z;
                            [first, d - first]
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Deterministic noise amplitude b(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum TimeFunction {
    Constant {
        b0: f64,
    },
    /// b0·e^{−γt}
    Exponential {
        b0: f64,
        gamma: f64,
    },
}

impl TimeFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeFunction::Constant { b0 } => b0,
            TimeFunction::Exponential { b0, gamma } => b0 * (-gamma * t).exp(),
        }
    }

    /// b* = sup_t b²(t) (t ≥ 0, γ ≥ 0).
    pub fn b_star(&self) -> f64 {
        match *self {
            TimeFunction::Constant { b0 } => b0 * b0,
            TimeFunction::Exponential { b0, .. } => b0 * b0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            TimeFunction::Constant { b0 } | TimeFunction::Exponential { b0, .. } => b0 == 0.0,
        }
    }
}

/// Active multiplicative noise coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Zero,
    /// b(t)·u dW
    Linear {
        b: TimeFunction,
    },
    /// a(1 + ‖u‖_{W^{1,∞}})^θ·u dW
    Power {
        a: f64,
        theta: f64,
    },
    /// F(u) dW₁ (2-D Euler–Poincaré only)
    FBounded,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Power { theta, .. } if theta < 0.0 => {
                Err(Error::Parameter(format!("power noise needs θ ≥ 0, got {theta}")))
            }
            NoiseSpec::Linear {
                b: TimeFunction::Exponential { gamma, .. },
            } if gamma < 0.0 => Err(Error::Parameter(format!(
                "exponential b(t) needs γ ≥ 0 so that b² stays bounded, got {gamma}"
            ))),
            _ => Ok(()),
        }
    }

    /// b* for linear noise, 0 otherwise.
    pub fn b_star(&self) -> f64 {
        match self {
            NoiseSpec::Linear { b } => b.b_star(),
            _ => 0.0,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match *self {
            NoiseSpec::Zero => true,
            NoiseSpec::Linear { b } => b.is_zero(),
            NoiseSpec::Power { a, .. } => a == 0.0,
            NoiseSpec::FBounded => false,
        }
    }
}

/// β(t_i) = exp(Σ_{j<i} b(t_j)ΔW_j − ½ Σ_{j<i} b²(t_j)Δt) on the path grid,
/// driven by the first mode.
pub fn beta_process(path: &BrownianPath, b: &TimeFunction) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.steps() + 1);
    let mut log = 0.0;
    out.push(1.0);
    for (j, dw) in path.increments[0].iter().enumerate() {
        let bj = b.eval(j as f64 * path.dt);
        log += bj * dw - 0.5 * bj * bj * path.dt;
        out.push(log.exp());
    }
    out
}

/// Stochastic increment of one step: the noise coefficient applied to u and
/// multiplied by ΔW.
pub fn noise_increment(spec: &NoiseSpec, u: &SpectralField, t: f64, dw: &[f64]) -> Result<SpectralField> {
    let first = || {
        dw.first()
            .copied()
            .ok_or_else(|| Error::Dimension("no Brownian increment supplied".into()))
    };
    match *spec {
        NoiseSpec::Zero => Ok(u.scale(0.0)),
        NoiseSpec::Linear { b } => Ok(u.scale(b.eval(t) * first()?)),
        NoiseSpec::Power { a, theta } => Ok(u.scale(a * (1.0 + w1inf_norm(u)).powf(theta) * first()?)),
        NoiseSpec::FBounded => {
            if u.dim() != 2 {
                return Err(Error::Dimension(
                    "F-bounded noise is defined only for the 2-D Euler–Poincaré state".into(),
                ));
            }
            Ok(DriftKind::Ep2d.nonlocal(u)?.scale(first()?))
        }
    }
}

/// Monte Carlo estimate of P{exp(∫₀ᵗ b dW) > c for every grid t ≤ horizon}.
/// Path i is drawn from seed `seed + i`.
pub fn min_exp_martingale_prob(
    b: &TimeFunction,
    c: f64,
    horizon: f64,
    paths: usize,
    dt: f64,
    seed: u64,
) -> Result<Proportion> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Parameter(format!("c = {c} must lie in (0, 1)")));
    }
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::Parameter("horizon and Δt must be positive".into()));
    }
    let level = c.ln();
    let steps = step_count(horizon, dt);
    let sd = dt.sqrt();
    let hits: usize = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let mut acc = 0.0;
            for j in 0..steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                acc += b.eval(j as f64 * dt) * sd * z;
                if acc <= level {
                    return 0;
                }
            }
            1
        })
        .sum();
    Ok(Proportion::new(hits, paths))
}
