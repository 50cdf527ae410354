use std::f64::consts::PI;

use proptest::prelude::*;
use schlab::detectors::lambda_sharp;
use schlab::spectral::{
    bessel_apply, dealias_cutoff, gradient, green_convolve_1d, helmholtz_inverse, hs_norm, mollify_j, mollify_t,
    partial, random_trig_field,
};
use schlab::{Complex64, SpectralField};

fn product(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let pa = a.to_physical().remove(0);
    let pb = b.to_physical().remove(0);
    let n = a.resolution();
    SpectralField::from_physical(1, n, &[pa.iter().zip(&pb).map(|(x, y)| x * y).collect()]).unwrap()
}

fn sup(f: &SpectralField) -> f64 {
    f.to_physical_refined(2)[0].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn random_2d(n: usize, components: usize, seed: u64) -> SpectralField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<Vec<f64>> = (0..components)
        .map(|_| (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    SpectralField::from_physical(2, n, &vals).unwrap().dealiased()
}

fn max_rel_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    let scale = a.coeffs().iter().fold(0.0f64, |m, c| m.max(c.norm()));
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
        / scale.max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn spectral_round_trip(exp in 3u32..9, kmax in 1i64..200, seed in any::<u64>()) {
        let n = 1usize << exp;
        let f = random_trig_field(n, kmax, 0.0, seed).unwrap();
        let back = SpectralField::from_physical(1, n, &f.to_physical()).unwrap();
        prop_assert!(max_rel_diff(&f, &back) < 1e-12);
    }

    #[test]
    fn physical_round_trip_2d(exp in 3u32..7, seed in any::<u64>()) {
        let n = 1usize << exp;
        let f = random_2d(n, 2, seed);
        let back = SpectralField::from_physical(2, n, &f.to_physical()).unwrap();
        prop_assert!(max_rel_diff(&f, &back) < 1e-12);
        prop_assert!(f.hermitian_defect() < 1e-12 && f.is_dealiased());
    }

    #[test]
    fn parseval(exp in 3u32..7, dim in 1usize..3, seed in any::<u64>()) {
        let n = 1usize << exp;
        let f = if dim == 1 { random_trig_field(n, n as i64, 0.0, seed).unwrap() } else { random_2d(n, 1, seed) };
        let cell = (2.0 * PI / n as f64).powi(dim as i32);
        let grid_l2 = (f.to_physical()[0].iter().map(|v| v * v).sum::<f64>() * cell).sqrt();
        let expected = (2.0 * PI).powf(dim as f64 / 2.0) * grid_l2;
        prop_assert!((hs_norm(&f, 0.0) - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn bessel_and_t_eps_commute(s in -3.0f64..5.0, eps in 0.01f64..0.99, seed in any::<u64>()) {
        let f = random_trig_field(64, 21, 1.0, seed).unwrap();
        let a = bessel_apply(&mollify_t(&f, eps).unwrap(), s);
        let b = mollify_t(&bessel_apply(&f, s), eps).unwrap();
        prop_assert!(max_rel_diff(&a, &b) < 1e-15);
    }

    #[test]
    fn mollifiers_contract(s in 0.0f64..5.0, eps in 0.01f64..0.99, seed in any::<u64>()) {
        let f = random_trig_field(128, 42, 1.0, seed).unwrap();
        let h = hs_norm(&f, s);
        prop_assert!(hs_norm(&mollify_j(&f, eps).unwrap(), s) <= h * (1.0 + 1e-14));
        prop_assert!(hs_norm(&mollify_t(&f, eps).unwrap(), s) <= h * (1.0 + 1e-14));
    }

    #[test]
    fn cosine_norm_is_phase_invariant(n in 1u32..40, sigma in 0.0f64..5.0, alpha in 0.0f64..6.3) {
        let nf = n as f64;
        let shifted = SpectralField::from_fn_1d(128, |x| (nf * x - alpha).cos()).unwrap();
        let plain = SpectralField::from_fn_1d(128, |x| (nf * x).cos()).unwrap();
        let (a, b) = (hs_norm(&shifted, sigma), hs_norm(&plain, sigma));
        prop_assert!((a - b).abs() < 1e-12 * b);
    }

    #[test]
    fn bessel_inverse_pair(s in -4.0f64..4.0, seed in any::<u64>()) {
        let f = random_trig_field(64, 21, 2.0, seed).unwrap();
        let back = bessel_apply(&bessel_apply(&f, s), -s);
        prop_assert!(max_rel_diff(&f, &back) < 1e-13);
    }
}

#[test]
fn t_eps_commutator_is_bounded_uniformly_in_eps() {
    let mut maxima = Vec::new();
    for eps in [0.5, 0.1, 0.02] {
        let mut m = 0.0f64;
        for i in 0..200u64 {
            let f = random_trig_field(128, 20, 1.0, 2 * i).unwrap();
            let g = random_trig_field(128, 20, 1.0, 2 * i + 1).unwrap();
            let lhs = mollify_t(&product(&g, &partial(&f, 0)), eps).unwrap();
            let rhs = product(&g, &partial(&mollify_t(&f, eps).unwrap(), 0));
            let comm = lhs.sub(&rhs).unwrap();
            m = m.max(hs_norm(&comm, 0.0) / (sup(&partial(&g, 0)) * hs_norm(&f, 0.0)));
        }
        maxima.push(m);
    }
    // observed maxima are about 0.12, 0.10 and 0.03
    assert!(maxima.iter().all(|&m| m.is_finite() && m < 1.0), "{maxima:?}");
}

#[test]
fn green_quadrature_matches_helmholtz_on_random_fields() {
    for seed in 0..10 {
        let f = random_trig_field(256, 60, 1.5, seed).unwrap();
        let a = helmholtz_inverse(&f).to_physical().remove(0);
        let b = green_convolve_1d(&f).unwrap().to_physical().remove(0);
        let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-10, "seed {seed}: {err:e}");
    }
}

#[test]
fn green_quadrature_edge_cases() {
    let one = SpectralField::from_fn_1d(64, |_| 1.0).unwrap();
    let g = green_convolve_1d(&one).unwrap().to_physical().remove(0);
    assert!(g.iter().all(|v| (v - 1.0).abs() < 1e-12));
    let zero = SpectralField::zeros(1, 1, 64).unwrap();
    assert_eq!(hs_norm(&green_convolve_1d(&zero).unwrap(), 0.0), 0.0);
    assert!(green_convolve_1d(&SpectralField::zeros(2, 1, 16).unwrap()).is_err());
}

#[test]
fn nonlinear_products_stay_real_and_dealiased() {
    let u = random_trig_field(96, 40, 1.0, 9).unwrap();
    let d = schlab::dynamics::ch_drift(&u).unwrap();
    assert!(d.is_dealiased());
    assert!(d.hermitian_defect() < 1e-12);
    assert_eq!(dealias_cutoff(96), 31);
}

#[test]
fn gradient_examples() {
    let n = 5.0;
    let f = SpectralField::from_fn_1d(64, |x| (n * x).sin()).unwrap();
    let want = SpectralField::from_fn_1d(64, |x| n * (n * x).cos()).unwrap();
    assert!(max_rel_diff(&gradient(&f), &want) < 1e-13);
    let c = SpectralField::from_fn_1d(64, |_| 2.5).unwrap();
    assert_eq!(hs_norm(&gradient(&c), 0.0), 0.0);
    let cos = SpectralField::from_fn_1d(64, |x| x.cos()).unwrap();
    assert!(max_rel_diff(&partial(&partial(&cos, 0), 0), &cos.scale(-1.0)) < 1e-13);
}

/// max f² / ‖f‖²_{H¹}, with the max taken on a 4× refined grid.
fn sup_ratio(f: &SpectralField) -> f64 {
    let m = f.to_physical_refined(4)[0].iter().fold(0.0f64, |m, v| m.max(v * v));
    m / hs_norm(f, 1.0).powi(2)
}

#[test]
fn lambda_bounds_random_polynomials_from_below() {
    let lambda = lambda_sharp();
    let mut best = 0.0f64;
    for seed in 0..10_000 {
        let f = random_trig_field(32, 10, 1.0, seed).unwrap();
        let r = sup_ratio(&f);
        assert!(r <= lambda * (1.0 + 1e-12), "seed {seed}: {r} > {lambda}");
        best = best.max(r);
    }
    assert!(best > 0.5 * lambda);
}

#[test]
fn lambda_is_approached_by_the_green_profile() {
    let lambda = lambda_sharp();
    let mut prev = 0.0;
    for n in [16, 64, 256, 1024] {
        let mut f = SpectralField::zeros(1, 1, n).unwrap();
        for k in -(n as i64 / 2 - 1)..(n as i64 / 2) {
            f.set_coeff(0, &[k], Complex64::new(1.0 / (1.0 + (k * k) as f64), 0.0));
        }
        let r = sup_ratio(&f);
        assert!(r > prev && r <= lambda * (1.0 + 1e-12));
        prev = r;
    }
    // the truncated tail of Σ 1/(1+k²) is about 4/N
    assert!(lambda - prev < 2e-3 * lambda);
}
