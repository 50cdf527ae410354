//! Deterministic drifts: Camassa–Holm with its nonlocal term q, the
//! two-dimensional Euler–Poincaré drift with F, the β-scaled v-equation and
//! the momentum map m = (1 − Δ)u.
//!
//! Products are formed on the native grid and truncated by the 2/3 rule, so
//! each drift is the Galerkin projection of the continuum expression onto the
//! retained band.

use crate::spectral::{
    gradient, helmholtz_inverse, hs_inner, hs_norm, mollify_t, partial, random_trig_field, w1inf_norm, SpectralField,
};
use crate::{Error, Result};

/// Which deterministic right-hand side to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    /// u_t = −(u u_x + q(u)) on T¹.
    Ch1d,
    /// u_t = −((u·∇)u + F(u)) on T².
    Ep2d,
    /// v_t = β·ch_drift(v); the β value is supplied per evaluation.
    VEquation,
    /// No drift (pure-noise runs).
    Null,
}

impl DriftKind {
    /// Checks a field against the shape this drift needs.
    pub fn check(&self, u: &SpectralField) -> Result<()> {
        let ok = match self {
            DriftKind::Ch1d | DriftKind::VEquation => u.dim() == 1 && u.components() == 1,
            DriftKind::Ep2d => u.dim() == 2 && u.components() == 2,
            DriftKind::Null => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{self:?} cannot act on a field with dim {} and {} components",
                u.dim(),
                u.components()
            )))
        }
    }

    /// Unscaled drift (β = 1 for the v-equation).
    pub fn eval(&self, u: &SpectralField) -> Result<SpectralField> {
        match self {
            DriftKind::Ch1d | DriftKind::VEquation => ch_drift(u),
            DriftKind::Ep2d => ep_drift(u),
            DriftKind::Null => Ok(u.scale(0.0)),
        }
    }

    /// Transport part (u·∇)u of the drift.
    pub fn transport(&self, u: &SpectralField) -> Result<SpectralField> {
        self.check(u)?;
        match self {
            DriftKind::Ch1d | DriftKind::VEquation => Ok(ch_transport(u)),
            DriftKind::Ep2d => Ok(ep_transport(u)),
            DriftKind::Null => Ok(u.scale(0.0)),
        }
    }

    /// Nonlocal part: q(u) in 1-D, F(u) in 2-D.
    pub fn nonlocal(&self, u: &SpectralField) -> Result<SpectralField> {
        self.check(u)?;
        match self {
            DriftKind::Ch1d | DriftKind::VEquation => Ok(ch_q(u)),
            DriftKind::Ep2d => Ok(ep_f(u)),
            DriftKind::Null => Ok(u.scale(0.0)),
        }
    }
}

fn pointwise(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn to_field(dim: usize, n: usize, vals: Vec<f64>) -> SpectralField {
    SpectralField::from_physical(dim, n, &[vals])
        .expect("grid samples have the field's shape")
        .dealiased()
}

fn require_1d(u: &SpectralField) -> Result<()> {
    DriftKind::Ch1d.check(u)
}

fn ch_transport(u: &SpectralField) -> SpectralField {
    let n = u.resolution();
    let p = u.to_physical().remove(0);
    let px = partial(u, 0).to_physical().remove(0);
    to_field(1, n, pointwise(&p, &px))
}

/// q(u) = (1 − ∂²)^{−1} ∂_x (u² + ½u_x²).
fn ch_q(u: &SpectralField) -> SpectralField {
    let n = u.resolution();
    let p = u.to_physical().remove(0);
    let px = partial(u, 0).to_physical().remove(0);
    let e: Vec<f64> = p.iter().zip(&px).map(|(a, b)| a * a + 0.5 * b * b).collect();
    helmholtz_inverse(&partial(&to_field(1, n, e), 0))
}

/// −(u u_x + (1 − ∂²)^{−1} ∂_x(u² + ½u_x²)).
pub fn ch_drift(u: &SpectralField) -> Result<SpectralField> {
    require_1d(u)?;
    let n = u.resolution();
    let p = u.to_physical().remove(0);
    let px = partial(u, 0).to_physical().remove(0);
    let uux = to_field(1, n, pointwise(&p, &px));
    let e: Vec<f64> = p.iter().zip(&px).map(|(a, b)| a * a + 0.5 * b * b).collect();
    let q = helmholtz_inverse(&partial(&to_field(1, n, e), 0));
    Ok(uux.add(&q)?.scale(-1.0))
}

/// β·ch_drift(v).
pub fn v_rhs(v: &SpectralField, beta: f64) -> Result<SpectralField> {
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("β = {beta} must be positive")));
    }
    Ok(ch_drift(v)?.scale(beta))
}

/// m = (1 − Δ)u.
pub fn momentum(u: &SpectralField) -> SpectralField {
    u.map_multiplier(|k| 1.0 + (k[0] * k[0] + k[1] * k[1]) as f64)
}

/// L² norm of the band-projected residual V_t + βvV_x + 2βVv_x, with
/// V = v − v_xx built from derivatives.
pub fn v_momentum_residual(v: &SpectralField, v_t: &SpectralField, beta: f64) -> Result<f64> {
    require_1d(v)?;
    require_1d(v_t)?;
    let n = v.resolution();
    let dxx = |f: &SpectralField| partial(&partial(f, 0), 0);
    let big_v = v.sub(&dxx(v))?;
    let big_vt = v_t.sub(&dxx(v_t))?;
    let pv = v.to_physical().remove(0);
    let pvx = partial(v, 0).to_physical().remove(0);
    let pbig = big_v.to_physical().remove(0);
    let pbigx = partial(&big_v, 0).to_physical().remove(0);
    let r: Vec<f64> = (0..pv.len())
        .map(|i| beta * (pv[i] * pbigx[i] + 2.0 * pbig[i] * pvx[i]))
        .collect();
    let res = big_vt.add(&to_field(1, n, r))?;
    Ok(hs_norm(&res, 0.0))
}

/// Physical samples of u_i and of the Jacobian J_ij = ∂_j u_i.
fn ep_parts(u: &SpectralField) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let up = u.to_physical();
    let g = gradient(u).to_physical();
    let jac = (0..2).map(|i| (0..2).map(|j| g[2 * i + j].clone()).collect()).collect();
    (up, jac)
}

fn ep_transport(u: &SpectralField) -> SpectralField {
    let n = u.resolution();
    let (up, jac) = ep_parts(u);
    let parts: Vec<SpectralField> = (0..2)
        .map(|i| {
            let vals = (0..n * n)
                .map(|p| up[0][p] * jac[i][0][p] + up[1][p] * jac[i][1][p])
                .collect();
            to_field(2, n, vals)
        })
        .collect();
    SpectralField::stack(&parts).expect("two components")
}

/// F(u) = (I − Δ)^{−1} div F₁(u) + (I − Δ)^{−1} F₂(u) with ∇u the Jacobian
/// (∇u)_ij = ∂_j u_i, div taken along rows and |∇u|² the Frobenius norm.
// index loops mirror the matrix formula
#[allow(clippy::needless_range_loop)]
fn ep_f(u: &SpectralField) -> SpectralField {
    let n = u.resolution();
    let (up, jac) = ep_parts(u);
    let len = n * n;
    let mut f1 = vec![vec![vec![0.0; len]; 2]; 2];
    let mut f2 = vec![vec![0.0; len]; 2];
    for p in 0..len {
        let a = [[jac[0][0][p], jac[0][1][p]], [jac[1][0][p], jac[1][1][p]]];
        let div = a[0][0] + a[1][1];
        let frob = a.iter().flatten().map(|x| x * x).sum::<f64>();
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for k in 0..2 {
                    v += a[i][k] * (a[k][j] + a[j][k]) - a[k][i] * a[k][j];
                }
                v -= a[i][j] * div;
                if i == j {
                    v += 0.5 * frob;
                }
                f1[i][j][p] = v;
            }
            // u div u + (∇u)^T u, the latter being Σ_j u_j ∂_i u_j
            f2[i][p] = up[i][p] * div + up[0][p] * a[0][i] + up[1][p] * a[1][i];
        }
    }
    let parts: Vec<SpectralField> = (0..2)
        .map(|i| {
            let mut acc = to_field(2, n, std::mem::take(&mut f2[i]));
            for j in 0..2 {
                let fij = to_field(2, n, std::mem::take(&mut f1[i][j]));
                acc = acc.add(&partial(&fij, j)).expect("same shape");
            }
            helmholtz_inverse(&acc)
        })
        .collect();
    SpectralField::stack(&parts).expect("two components")
}

/// −((u·∇)u + F(u)) for a 2-D vector field.
pub fn ep_drift(u: &SpectralField) -> Result<SpectralField> {
    DriftKind::Ep2d.check(u)?;
    Ok(ep_transport(u).add(&ep_f(u))?.scale(-1.0))
}

/// |(T_ε(u u_x), T_ε u)_{H^s}| + |(T_ε q(u), T_ε u)_{H^s}| divided by
/// ‖u‖²_{H^s}‖u‖_{W^{1,∞}} for a 1-D field.
pub fn drift_bound_ratio(u: &SpectralField, s: f64, eps: f64) -> Result<f64> {
    require_1d(u)?;
    let tu = mollify_t(u, eps)?;
    let a = hs_inner(&mollify_t(&ch_transport(u), eps)?, &tu, s)?;
    let b = hs_inner(&mollify_t(&ch_q(u), eps)?, &tu, s)?;
    let denom = hs_norm(u, s).powi(2) * w1inf_norm(u);
    if !(denom > 0.0) {
        return Err(Error::Parameter("drift bound ratio of the zero field".into()));
    }
    Ok((a.abs() + b.abs()) / denom)
}

/// Observed maxima of [`drift_bound_ratio`] over random smooth fields.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DriftBound {
    pub s: f64,
    pub eps: Vec<f64>,
    /// Maximum ratio over the field draws, per ε.
    pub max_ratio: Vec<f64>,
    /// D̂: the maximum over everything.
    pub d_hat: f64,
}

/// Fits D̂ from `fields` random trigonometric fields of degree 16 at
/// resolution `n`, normalized to ‖u‖_{H^s} = 1.
pub fn estimate_drift_constant(n: usize, s: f64, eps: &[f64], fields: usize, seed: u64) -> Result<DriftBound> {
    let draws: Vec<SpectralField> = (0..fields)
        .map(|i| {
            let f = random_trig_field(n, 16, s + 1.0, seed.wrapping_add(i as u64))?;
            let norm = hs_norm(&f, s);
            Ok(f.scale(1.0 / norm))
        })
        .collect::<Result<_>>()?;
    let mut max_ratio = Vec::with_capacity(eps.len());
    for &e in eps {
        let mut m = 0.0f64;
        for f in &draws {
            m = m.max(drift_bound_ratio(f, s, e)?);
        }
        max_ratio.push(m);
    }
    let d_hat = max_ratio.iter().cloned().fold(0.0, f64::max);
    Ok(DriftBound {
        s,
        eps: eps.to_vec(),
        max_ratio,
        d_hat,
    })
}
