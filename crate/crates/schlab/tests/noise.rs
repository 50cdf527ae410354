use proptest::prelude::*;
use schlab::noise::{beta_process, min_exp_martingale_prob, noise_increment, sample_brownian, NoiseSpec, TimeFunction};
use schlab::spectral::{hs_norm, random_trig_field};
use schlab::stats::mean;

fn normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

#[test]
fn terminal_value_has_unit_second_moment() {
    let m = 4000;
    let w2: Vec<f64> = (0..m)
        .map(|i| {
            let p = sample_brownian(1.0, 1.0 / 64.0, 10_000 + i, 1).unwrap();
            p.increments[0].iter().sum::<f64>().powi(2)
        })
        .collect();
    // sd of the sample mean of W(1)² is √(2/M)
    assert!((mean(&w2) - 1.0).abs() < 4.0 * (2.0 / m as f64).sqrt(), "{}", mean(&w2));
}

#[test]
fn increments_are_uncorrelated_with_variance_dt() {
    let dt = 0.01;
    let p = sample_brownian(100.0, dt, 3, 2).unwrap();
    let (a, b) = (&p.increments[0], &p.increments[1]);
    let n = a.len() as f64;
    let var = a.iter().map(|x| x * x).sum::<f64>() / n;
    let cov = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n;
    let lag = a.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1.0);
    let sd = dt * (2.0 / n).sqrt();
    assert!((var - dt).abs() < 5.0 * sd);
    assert!(cov.abs() < 5.0 * sd && lag.abs() < 5.0 * sd);
}

#[test]
fn beta_is_a_mean_one_martingale() {
    let b = TimeFunction::Constant { b0: 0.5 };
    let m = 4000;
    let finals: Vec<f64> = (0..m)
        .map(|i| {
            *beta_process(&sample_brownian(1.0, 1e-2, 20_000 + i, 1).unwrap(), &b)
                .last()
                .unwrap()
        })
        .collect();
    let sd = ((0.25f64).exp() - 1.0).sqrt() / (m as f64).sqrt();
    assert!((mean(&finals) - 1.0).abs() < 4.0 * sd, "{}", mean(&finals));
}

#[test]
fn martingale_bound_matches_reflection_principle() {
    // ∫b dW is a Brownian motion run to clock ∫b²; over a long horizon
    // P{min > ln c} = 2Φ(|ln c|/σ) − 1 with σ² = b0²/(2γ)
    let b = TimeFunction::Exponential { b0: 1.0, gamma: 1.0 };
    let p = min_exp_martingale_prob(&b, 0.5, 10.0, 10_000, 1e-3, 5).unwrap();
    let sigma = 0.5f64.sqrt();
    let closed = 2.0 * normal_cdf(0.5f64.ln().abs() / sigma) - 1.0;
    // discrete monitoring can only raise the estimate
    assert!(p.estimate > 0.0 && p.estimate < 1.0);
    assert!(
        p.ci_high >= closed && p.estimate - closed < 2.0 * p.half_width() + 0.02,
        "{p:?} vs {closed}"
    );
    let again = min_exp_martingale_prob(&b, 0.5, 10.0, 10_000, 1e-3, 5).unwrap();
    assert_eq!(p, again);
}

#[test]
fn martingale_bound_degenerate_cases() {
    let zero = TimeFunction::Constant { b0: 0.0 };
    assert_eq!(
        min_exp_martingale_prob(&zero, 0.5, 2.0, 50, 1e-2, 1).unwrap().estimate,
        1.0
    );
    let b = TimeFunction::Exponential { b0: 0.5, gamma: 1.0 };
    let tiny = min_exp_martingale_prob(&b, 1e-6, 5.0, 500, 1e-2, 1).unwrap();
    assert_eq!(tiny.estimate, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_is_positive(b0 in 0.0f64..3.0, gamma in 0.0f64..2.0, seed in any::<u64>()) {
        let path = sample_brownian(2.0, 1e-3, seed, 1).unwrap();
        let beta = beta_process(&path, &TimeFunction::Exponential { b0, gamma });
        prop_assert!(beta.iter().all(|&v| v > 0.0 && v.is_finite()));
        prop_assert_eq!(beta.len(), path.steps() + 1);
    }

    #[test]
    fn same_seed_same_path(seed in any::<u64>(), modes in 1usize..3) {
        let a = sample_brownian(0.5, 1e-2, seed, modes).unwrap();
        let b = sample_brownian(0.5, 1e-2, seed, modes).unwrap();
        prop_assert_eq!(&a, &b);
        let c = sample_brownian(0.5, 1e-2, seed.wrapping_add(1), modes).unwrap();
        prop_assert_ne!(&a.increments, &c.increments);
        prop_assert_eq!(a.values(0)[0], 0.0);
    }

    #[test]
    fn linear_coefficient_satisfies_growth_bound(
        b0 in 0.0f64..2.0,
        gamma in 0.0f64..3.0,
        t in 0.0f64..10.0,
        s in 0.0f64..4.0,
        seed in any::<u64>(),
    ) {
        let b = TimeFunction::Exponential { b0, gamma };
        let spec = NoiseSpec::Linear { b };
        let u = random_trig_field(64, 21, 1.0, seed).unwrap();
        let g = noise_increment(&spec, &u, t, &[1.0]).unwrap();
        prop_assert!(hs_norm(&g, s) <= spec.b_star().sqrt() * (1.0 + hs_norm(&u, s)) * (1.0 + 1e-14));
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(NoiseSpec::Power { a: 1.0, theta: -0.5 }.validate().is_err());
    let b = TimeFunction::Exponential { b0: 1.0, gamma: -1.0 };
    assert!(NoiseSpec::Linear { b }.validate().is_err());
    assert!(NoiseSpec::FBounded.validate().is_ok());
    let u = random_trig_field(16, 3, 1.0, 0).unwrap();
    assert!(noise_increment(&NoiseSpec::FBounded, &u, 0.0, &[1.0]).is_err());
}
