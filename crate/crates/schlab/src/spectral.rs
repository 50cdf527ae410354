//! Fourier-side Sobolev calculus on the periodic torus T^d, d ∈ {1, 2}.
//!
//! Convention: f̂(k) = ∫ f(x) e^{−ik·x} dx and f(x) = (2π)^{−d} Σ_k f̂(k) e^{ik·x},
//! so a constant 1 has f̂(0) = (2π)^d and every norm below carries those
//! factors of 2π. Coefficients are stored in FFT order per axis (index j maps
//! to k = j for j < N/2 and k = j − N otherwise), components outermost.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized in-place FFT of one component block (N or N×N, row-major).
fn fft_block(buf: &mut [Complex64], dim: usize, n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    if dim == 1 {
        fft.process(buf);
        return;
    }
    // rows (axis 1 is contiguous), then columns through a transpose
    fft.process(buf);
    let mut t = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = buf[i * n + j];
        }
    }
    fft.process(&mut t);
    for i in 0..n {
        for j in 0..n {
            buf[i * n + j] = t[j * n + i];
        }
    }
}

/// Signed wavenumber of FFT index `j` on an axis of length `n`.
#[inline]
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[inline]
fn index_of(k: i64, n: usize) -> usize {
    if k >= 0 {
        k as usize
    } else {
        (k + n as i64) as usize
    }
}

/// Largest retained |k_j| under the 2/3 rule: the biggest K with 3K < N, so
/// every quadratic product of band-limited fields is alias-free after
/// truncation.
#[inline]
pub fn dealias_cutoff(n: usize) -> i64 {
    ((n - 1) / 3) as i64
}

/// A real field on T^d stored through its Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    dim: usize,
    components: usize,
    n: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    fn check_shape(dim: usize, components: usize, n: usize) -> Result<()> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(format!("dim must be 1 or 2, got {dim}")));
        }
        if components == 0 {
            return Err(Error::Dimension("at least one component required".into()));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::Resolution(n));
        }
        Ok(())
    }

    pub fn zeros(dim: usize, components: usize, n: usize) -> Result<Self> {
        Self::check_shape(dim, components, n)?;
        Ok(Self {
            dim,
            components,
            n,
            coeffs: vec![Complex64::new(0.0, 0.0); components * n.pow(dim as u32)],
        })
    }

    /// Builds a field from coefficients already in FFT order.
    pub fn from_coeffs(dim: usize, components: usize, n: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        Self::check_shape(dim, components, n)?;
        let expect = components * n.pow(dim as u32);
        if coeffs.len() != expect {
            return Err(Error::Dimension(format!(
                "expected {expect} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self {
            dim,
            components,
            n,
            coeffs,
        })
    }

    /// Transforms grid samples (one slice per component, x_j = 2πj/N, row-major
    /// in 2-D) into coefficients. No truncation is applied.
    pub fn from_physical(dim: usize, n: usize, values: &[Vec<f64>]) -> Result<Self> {
        Self::check_shape(dim, values.len().max(1), n)?;
        let block = n.pow(dim as u32);
        let scale = (2.0 * PI / n as f64).powi(dim as i32);
        let mut coeffs = Vec::with_capacity(values.len() * block);
        for comp in values {
            if comp.len() != block {
                return Err(Error::Dimension(format!(
                    "component has {} samples, expected {block}",
                    comp.len()
                )));
            }
            let mut buf: Vec<Complex64> = comp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft_block(&mut buf, dim, n, false);
            coeffs.extend(buf.into_iter().map(|c| c * scale));
        }
        Self::from_coeffs(dim, values.len(), n, coeffs)
    }

    /// Samples a scalar function on the 1-D grid and dealiases.
    pub fn from_fn_1d(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let vals: Vec<f64> = (0..n).map(|j| f(grid_point(j, n))).collect();
        Ok(Self::from_physical(1, n, &[vals])?.dealiased())
    }

    /// Samples a `components`-vector function on the 2-D grid and dealiases.
    pub fn from_fn_2d(n: usize, components: usize, f: impl Fn(f64, f64) -> Vec<f64>) -> Result<Self> {
        let mut vals = vec![vec![0.0; n * n]; components];
        for i in 0..n {
            for j in 0..n {
                let v = f(grid_point(i, n), grid_point(j, n));
                for (c, comp) in vals.iter_mut().enumerate() {
                    comp[i * n + j] = v[c];
                }
            }
        }
        Ok(Self::from_physical(2, n, &vals)?.dealiased())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    /// Number of coefficients in one component block (N^d).
    pub fn block_len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Wavenumber vector of flat in-block index `idx`.
    pub fn k_of(&self, idx: usize) -> [i64; 2] {
        if self.dim == 1 {
            [wavenumber(idx, self.n), 0]
        } else {
            [wavenumber(idx / self.n, self.n), wavenumber(idx % self.n, self.n)]
        }
    }

    fn flat(&self, k: &[i64]) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k.len() != self.dim || k.iter().any(|&kj| kj < -half || kj >= half) {
            return None;
        }
        Some(if self.dim == 1 {
            index_of(k[0], self.n)
        } else {
            index_of(k[0], self.n) * self.n + index_of(k[1], self.n)
        })
    }

    /// Coefficient f̂(k) of component `c`; zero outside [−N/2, N/2)^d.
    pub fn coeff(&self, c: usize, k: &[i64]) -> Complex64 {
        match self.flat(k) {
            Some(i) if c < self.components => self.coeffs[c * self.block_len() + i],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn set_coeff(&mut self, c: usize, k: &[i64], value: Complex64) {
        if let Some(i) = self.flat(k) {
            let b = self.block_len();
            self.coeffs[c * b + i] = value;
        }
    }

    /// Scalar field holding component `c`.
    pub fn component(&self, c: usize) -> SpectralField {
        let b = self.block_len();
        SpectralField {
            dim: self.dim,
            components: 1,
            n: self.n,
            coeffs: self.coeffs[c * b..(c + 1) * b].to_vec(),
        }
    }

    /// Stacks scalar fields of equal shape into one vector field.
    pub fn stack(parts: &[SpectralField]) -> Result<SpectralField> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("nothing to stack".into()))?;
        let mut coeffs = Vec::with_capacity(parts.len() * first.block_len());
        for p in parts {
            if p.dim != first.dim || p.n != first.n {
                return Err(Error::Dimension("stacked fields differ in shape".into()));
            }
            coeffs.extend_from_slice(&p.coeffs);
        }
        let comps = coeffs.len() / first.block_len();
        Self::from_coeffs(first.dim, comps, first.n, coeffs)
    }

    /// Grid samples of every component on the native N grid.
    pub fn to_physical(&self) -> Vec<Vec<f64>> {
        let b = self.block_len();
        let scale = 1.0 / (b as f64 * (2.0 * PI / self.n as f64).powi(self.dim as i32));
        self.coeffs
            .chunks(b)
            .map(|blk| {
                let mut buf = blk.to_vec();
                fft_block(&mut buf, self.dim, self.n, true);
                buf.into_iter().map(|c| c.re * scale).collect()
            })
            .collect()
    }

    /// Grid samples on a grid refined by `factor` through zero padding.
    pub fn to_physical_refined(&self, factor: usize) -> Vec<Vec<f64>> {
        let m = self.n * factor;
        let half = (self.n / 2) as i64;
        let scale = 1.0 / (2.0 * PI).powi(self.dim as i32);
        let b = self.block_len();
        (0..self.components)
            .map(|c| {
                let src = &self.coeffs[c * b..(c + 1) * b];
                let mut buf = vec![Complex64::new(0.0, 0.0); m.pow(self.dim as u32)];
                if self.dim == 1 {
                    for (j, &v) in src.iter().enumerate() {
                        let k = wavenumber(j, self.n);
                        if k > -half {
                            buf[index_of(k, m)] = v;
                        }
                    }
                } else {
                    for (idx, &v) in src.iter().enumerate() {
                        let k1 = wavenumber(idx / self.n, self.n);
                        let k2 = wavenumber(idx % self.n, self.n);
                        if k1 > -half && k2 > -half {
                            buf[index_of(k1, m) * m + index_of(k2, m)] = v;
                        }
                    }
                }
                fft_block(&mut buf, self.dim, m, true);
                buf.into_iter().map(|c| c.re * scale).collect()
            })
            .collect()
    }

    /// Zeroes every mode with some |k_j| above the 2/3-rule cutoff and the
    /// unpaired Nyquist mode.
    pub fn dealias(&mut self) {
        let cut = dealias_cutoff(self.n);
        let b = self.block_len();
        for idx in 0..b {
            let k = self.k_of(idx);
            if k[0].abs() > cut || k[1].abs() > cut {
                for c in 0..self.components {
                    self.coeffs[c * b + idx] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    pub fn dealiased(mut self) -> Self {
        self.dealias();
        self
    }

    /// True when every mode beyond the 2/3-rule cutoff is exactly zero.
    pub fn is_dealiased(&self) -> bool {
        let cut = dealias_cutoff(self.n);
        let b = self.block_len();
        (0..b).all(|idx| {
            let k = self.k_of(idx);
            k[0].abs() <= cut && k[1].abs() <= cut
                || (0..self.components).all(|c| self.coeffs[c * b + idx] == Complex64::new(0.0, 0.0))
        })
    }

    /// Largest |f̂(−k) − conj f̂(k)| over retained modes (zero for real fields).
    pub fn hermitian_defect(&self) -> f64 {
        let b = self.block_len();
        let mut worst = 0.0f64;
        for idx in 0..b {
            let k = self.k_of(idx);
            let neg: Vec<i64> = k[..self.dim].iter().map(|&kj| -kj).collect();
            if let Some(j) = self.flat(&neg) {
                for c in 0..self.components {
                    let d = self.coeffs[c * b + j] - self.coeffs[c * b + idx].conj();
                    worst = worst.max(d.norm());
                }
            }
        }
        worst
    }

    /// Applies a real multiplier m(k) to every coefficient of every component.
    pub fn map_multiplier(&self, m: impl Fn([i64; 2]) -> f64) -> SpectralField {
        let b = self.block_len();
        let weights: Vec<f64> = (0..b).map(|idx| m(self.k_of(idx))).collect();
        let mut out = self.clone();
        for blk in out.coeffs.chunks_mut(b) {
            for (c, w) in blk.iter_mut().zip(&weights) {
                *c *= *w;
            }
        }
        out
    }

    fn same_shape(&self, other: &SpectralField) -> Result<()> {
        if self.dim != other.dim || self.components != other.components || self.n != other.n {
            return Err(Error::Dimension(format!(
                "shapes (d={}, c={}, N={}) and (d={}, c={}, N={}) differ",
                self.dim, self.components, self.n, other.dim, other.components, other.n
            )));
        }
        Ok(())
    }

    /// self + a·other.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Result<SpectralField> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (x, y) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
        Ok(out)
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        for x in out.coeffs.iter_mut() {
            *x *= a;
        }
        out
    }

    /// Same-shape combination Σ w_i f_i without intermediate allocation.
    pub fn linear_combination(terms: &[(f64, &SpectralField)]) -> Result<SpectralField> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::Dimension("empty combination".into()))?;
        let mut out = first.scale(0.0);
        for (w, f) in terms {
            out.same_shape(f)?;
            for (x, y) in out.coeffs.iter_mut().zip(&f.coeffs) {
                *x += y * *w;
            }
        }
        Ok(out)
    }
}

/// Grid node x_j = 2πj/N.
#[inline]
pub fn grid_point(j: usize, n: usize) -> f64 {
    2.0 * PI * j as f64 / n as f64
}

#[inline]
fn k_sq(k: [i64; 2]) -> f64 {
    (k[0] * k[0] + k[1] * k[1]) as f64
}

/// ( Σ_k (1+|k|²)^s |f̂(k)|² )^{1/2}, summed over components.
pub fn hs_norm(f: &SpectralField, s: f64) -> f64 {
    hs_inner(f, f, s).unwrap_or(0.0).max(0.0).sqrt()
}

/// Real inner product Σ_k (1+|k|²)^s Re(f̂ conj ĝ) summed over components.
pub fn hs_inner(f: &SpectralField, g: &SpectralField, s: f64) -> Result<f64> {
    f.same_shape(g)?;
    let b = f.block_len();
    let weights: Vec<f64> = (0..b).map(|idx| (1.0 + k_sq(f.k_of(idx))).powf(s)).collect();
    let mut acc = 0.0;
    for (blk_f, blk_g) in f.coeffs.chunks(b).zip(g.coeffs.chunks(b)) {
        for ((a, c), w) in blk_f.iter().zip(blk_g).zip(&weights) {
            acc += w * (a.re * c.re + a.im * c.im);
        }
    }
    Ok(acc)
}

/// Spectral derivative ∂_{x_axis} of every component.
pub fn partial(f: &SpectralField, axis: usize) -> SpectralField {
    let b = f.block_len();
    let mut out = f.clone();
    for blk in out.coeffs.chunks_mut(b) {
        for (idx, c) in blk.iter_mut().enumerate() {
            let k = f.k_of(idx)[axis] as f64;
            *c *= Complex64::new(0.0, k);
        }
    }
    out
}

/// All first partials: component c·dim + j holds ∂_{x_j} f_c.
pub fn gradient(f: &SpectralField) -> SpectralField {
    let parts: Vec<SpectralField> = (0..f.components)
        .flat_map(|c| {
            let fc = f.component(c);
            (0..f.dim).map(move |j| partial(&fc, j))
        })
        .collect();
    SpectralField::stack(&parts).expect("gradient parts share a shape")
}

/// max( sup|f|, sup|∂_j f| ) over components and axes, sampled on the 2×
/// zero-padded grid.
pub fn w1inf_norm(f: &SpectralField) -> f64 {
    let sup = |g: &SpectralField| {
        g.to_physical_refined(2)
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    };
    sup(f).max(sup(&gradient(f)))
}

/// min_x ∂_x f on the 2× refined grid (1-D scalar fields).
pub fn min_slope(f: &SpectralField) -> Result<f64> {
    if f.dim != 1 || f.components != 1 {
        return Err(Error::Dimension("min_slope needs a 1-D scalar field".into()));
    }
    let d = partial(f, 0).to_physical_refined(2);
    Ok(d[0].iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Multiplies by the Bessel symbol (1+|k|²)^{s/2}.
pub fn bessel_apply(f: &SpectralField, s: f64) -> SpectralField {
    f.map_multiplier(|k| (1.0 + k_sq(k)).powf(0.5 * s))
}

/// (I − Δ)^{−1}.
pub fn helmholtz_inverse(f: &SpectralField) -> SpectralField {
    f.map_multiplier(|k| 1.0 / (1.0 + k_sq(k)))
}

/// Smooth step: 1 on [0,1], 0 on [2,∞), C^∞ and monotone in between.
pub fn rho(r: f64) -> f64 {
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = psi(2.0 - r);
        a / (a + psi(r - 1.0))
    }
}

/// Mollifier symbol ĵ(ξ) = ρ(‖ξ‖_∞).
pub fn j_hat(xi: [f64; 2]) -> f64 {
    rho(xi[0].abs().max(xi[1].abs()))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("mollifier ε = {eps} must lie in (0, 1)")))
    }
}

/// J_ε: multiply by ĵ(εk).
pub fn mollify_j(f: &SpectralField, eps: f64) -> Result<SpectralField> {
    check_eps(eps)?;
    Ok(f.map_multiplier(|k| j_hat([eps * k[0] as f64, eps * k[1] as f64])))
}

/// T_ε = (1 − ε²Δ)^{−1}.
pub fn mollify_t(f: &SpectralField, eps: f64) -> Result<SpectralField> {
    check_eps(eps)?;
    Ok(f.map_multiplier(|k| 1.0 / (1.0 + eps * eps * k_sq(k))))
}

/// Periodic Helmholtz Green function on T¹, G(x) = cosh(x − 2π⌊x/2π⌋ − π)/(2 sinh π).
pub fn green_function(x: f64) -> f64 {
    let r = x - 2.0 * PI * (x / (2.0 * PI)).floor();
    (r - PI).cosh() / (2.0 * PI.sinh())
}

// B_2 .. B_20
const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// G * f by quadrature in physical space.
///
/// At node x_i the integrand s ↦ G(−s) f(x_i + s) is smooth on [0, 2π] but
/// its periodic extension has a derivative jump at s = 0, so the plain
/// trapezoid rule is only second-order. The Euler–Maclaurin endpoint terms
/// restore spectral accuracy; the jump of c^{(j)} across the kink is 1 for
/// odd j and 0 for even j, leaving only even derivatives of f at x_i.
pub fn green_convolve_1d(f: &SpectralField) -> Result<SpectralField> {
    if f.dim != 1 {
        return Err(Error::Dimension(format!(
            "green_convolve_1d needs dim 1, got {}",
            f.dim
        )));
    }
    let n = f.n;
    let h = 2.0 * PI / n as f64;
    let kernel: Vec<f64> = (0..n).map(|j| green_function(-(j as f64) * h)).collect();
    let c0 = PI.cosh() / (2.0 * PI.sinh());
    let p_max = BERNOULLI.len();
    let mut out = Vec::with_capacity(f.components);
    for c in 0..f.components {
        let fc = f.component(c);
        let vals = fc.to_physical().remove(0);
        // even derivatives f^{(2q)}, q = 0..p_max−1
        let mut evens = vec![vals.clone()];
        let mut d = fc.clone();
        for _ in 1..p_max {
            d = partial(&partial(&d, 0), 0);
            evens.push(d.to_physical().remove(0));
        }
        let mut conv = vec![0.0; n];
        for (i, slot) in conv.iter_mut().enumerate() {
            let mut t = c0 * vals[i];
            for j in 1..n {
                t += kernel[j] * vals[(i + j) % n];
            }
            t *= h;
            let mut hp = 1.0;
            let mut fact = 1.0;
            for p in 1..=p_max {
                let m = 2 * p - 1;
                hp *= h * h;
                fact *= ((2 * p - 1) * (2 * p)) as f64;
                let mut jump = 0.0;
                let mut j = 1;
                while j <= m {
                    jump += binomial(m, j) * evens[(m - j) / 2][i];
                    j += 2;
                }
                t -= BERNOULLI[p - 1] * hp / fact * jump;
            }
            *slot = t;
        }
        out.push(conv);
    }
    SpectralField::from_physical(1, n, &out)
}

/// Random real trigonometric polynomial of degree `kmax` on T¹ with
/// f̂(k) = (2π)·(ξ_k + iη_k)·(1+k²)^{−decay/2}, ξ, η standard normal.
pub fn random_trig_field(n: usize, kmax: i64, decay: f64, seed: u64) -> Result<SpectralField> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(1, 1, n)?;
    let kmax = kmax.min(dealias_cutoff(n));
    let z0: f64 = StandardNormal.sample(&mut rng);
    f.set_coeff(0, &[0], Complex64::new(2.0 * PI * z0, 0.0));
    for k in 1..=kmax {
        let w = 2.0 * PI * (1.0 + (k * k) as f64).powf(-0.5 * decay);
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let c = Complex64::new(re, im) * w;
        f.set_coeff(0, &[k], c);
        f.set_coeff(0, &[-k], c.conj());
    }
    Ok(f)
}

fn binomial(m: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn norm_of_constant_is_two_pi() {
        let f = SpectralField::from_fn_1d(64, |_| 1.0).unwrap();
        assert!(close(hs_norm(&f, 0.0), 2.0 * PI, 1e-13));
        assert!(close(hs_norm(&f, 3.7), 2.0 * PI, 1e-13));
        assert_eq!(hs_norm(&SpectralField::zeros(1, 1, 64).unwrap(), 2.0), 0.0);
    }

    #[test]
    fn cosine_norm_closed_form() {
        for n in [1i64, 5, 17] {
            let f = SpectralField::from_fn_1d(64, |x| (n as f64 * x).cos()).unwrap();
            let expect = PI * 2f64.sqrt() * (1.0 + (n * n) as f64).powf(0.75);
            assert!(close(hs_norm(&f, 1.5), expect, 1e-12));
            assert!(close(f.coeff(0, &[n]).re, PI, 1e-12));
        }
    }

    #[test]
    fn constant_and_cosine_sup_norms() {
        let c = SpectralField::from_fn_1d(32, |_| -2.5).unwrap();
        assert!(close(w1inf_norm(&c), 2.5, 1e-13));
        let f = SpectralField::from_fn_1d(64, |x| (4.0 * x).cos()).unwrap();
        assert!(close(w1inf_norm(&f), 4.0, 1e-12));
        assert!(close(min_slope(&f).unwrap(), -4.0, 1e-12));
    }

    #[test]
    fn helmholtz_eigenfunctions() {
        let f = SpectralField::from_fn_1d(64, |x| (2.0 * x).cos()).unwrap();
        let g = helmholtz_inverse(&f);
        let expect = f.scale(0.2);
        assert!(hs_norm(&g.sub(&expect).unwrap(), 0.0) < 1e-13);
        let one = SpectralField::from_fn_1d(64, |_| 1.0).unwrap();
        assert!(hs_norm(&helmholtz_inverse(&one).sub(&one).unwrap(), 0.0) < 1e-13);
    }

    #[test]
    fn green_quadrature_matches_multiplier_on_modes() {
        for k in [0i64, 1, 3, 20] {
            let f = SpectralField::from_fn_1d(128, |x| (k as f64 * x).cos()).unwrap();
            let a = green_convolve_1d(&f).unwrap();
            let b = helmholtz_inverse(&f);
            let err = a.sub(&b).unwrap().to_physical()[0]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-12, "k = {k}: {err}");
        }
        let g = SpectralField::zeros(2, 1, 16).unwrap();
        assert!(green_convolve_1d(&g).is_err());
    }

    #[test]
    fn green_function_integrates_to_one() {
        let n = 4096;
        let h = 2.0 * PI / n as f64;
        let total: f64 = (0..n).map(|j| green_function(j as f64 * h)).sum::<f64>() * h;
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bump_has_expected_plateaus() {
        assert_eq!(rho(0.3), 1.0);
        assert_eq!(rho(1.0), 1.0);
        assert_eq!(rho(2.0), 0.0);
        assert_eq!(rho(7.0), 0.0);
        let mut last = 1.0;
        for i in 1..100 {
            let v = rho(1.0 + i as f64 / 100.0);
            assert!(v <= last && (0.0..=1.0).contains(&v));
            last = v;
        }
        assert!((rho(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mollifiers_reject_bad_eps() {
        let f = SpectralField::from_fn_1d(16, |x| x.sin()).unwrap();
        assert!(mollify_j(&f, 0.0).is_err());
        assert!(mollify_j(&f, 1.0).is_err());
        assert!(mollify_t(&f, -0.1).is_err());
        // ε below 2/N leaves the retained band untouched
        assert_eq!(mollify_j(&f, 1.9 / 16.0).unwrap(), f);
    }

    #[test]
    fn t_eps_on_cosine() {
        let f = SpectralField::from_fn_1d(64, |x| (3.0 * x).cos()).unwrap();
        let g = mollify_t(&f, 0.1).unwrap();
        let expect = f.scale(1.0 / 1.09);
        assert!(hs_norm(&g.sub(&expect).unwrap(), 0.0) < 1e-13);
    }

    #[test]
    fn gradient_layout_and_values() {
        let f = SpectralField::from_fn_1d(32, |x| (3.0 * x).sin()).unwrap();
        let g = gradient(&f);
        let expect = SpectralField::from_fn_1d(32, |x| 3.0 * (3.0 * x).cos()).unwrap();
        assert!(hs_norm(&g.sub(&expect).unwrap(), 0.0) < 1e-12);
        let cos = SpectralField::from_fn_1d(32, |x| x.cos()).unwrap();
        let dd = partial(&partial(&cos, 0), 0);
        assert!(hs_norm(&dd.add(&cos).unwrap(), 0.0) < 1e-12);
        let v = SpectralField::from_fn_2d(16, 2, |x, y| vec![x.sin(), (2.0 * y).cos()]).unwrap();
        let gv = gradient(&v);
        assert_eq!(gv.components(), 4);
        // ∂_y of the second component
        let e = SpectralField::from_fn_2d(16, 1, |_, y| vec![-2.0 * (2.0 * y).sin()]).unwrap();
        assert!(hs_norm(&gv.component(3).sub(&e).unwrap(), 0.0) < 1e-12);
        assert!(hs_norm(&gv.component(1), 0.0) < 1e-12);
    }

    #[test]
    fn small_or_odd_resolution_rejected() {
        assert_eq!(SpectralField::zeros(1, 1, 6), Err(Error::Resolution(6)));
        assert_eq!(SpectralField::zeros(1, 1, 9), Err(Error::Resolution(9)));
        assert!(SpectralField::zeros(3, 1, 16).is_err());
    }
}
