//! Small statistics helpers shared by the detectors, ensembles and experiments.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // pin the degenerate ends so the interval always contains the estimate
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// A Bernoulli proportion with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn new(successes: usize, trials: usize) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials, Z95);
        let estimate = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        Self {
            successes,
            trials,
            estimate,
            ci_low,
            ci_high,
        }
    }

    /// Larger of the two distances from the estimate to the interval ends.
    pub fn half_width(&self) -> f64 {
        (self.estimate - self.ci_low).max(self.ci_high - self.estimate)
    }
}

/// Ordinary least squares y ≈ intercept + slope·x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the fit residuals.
    pub rms_residual: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Some(LineFit {
        slope,
        intercept,
        rms_residual: (ss / n as f64).sqrt(),
    })
}

/// Slope of log y against log x (a fitted power-law exponent).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line_fit(&lx, &ly).map(|f| f.slope)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Median of the finite entries (NaN-free input expected).
pub fn median(x: &[f64]) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for (s, n) in [(0, 10), (10, 10), (3, 7), (100, 200)] {
            let p = Proportion::new(s, n);
            assert!(p.ci_low <= p.estimate && p.estimate <= p.ci_high);
        }
        let p = Proportion::new(200, 200);
        assert_eq!(p.ci_high, 1.0);
        assert!(p.ci_low > 0.98);
    }

    #[test]
    fn wilson_reference_value() {
        // 20 of 100: textbook interval (0.1333, 0.2888)
        let (lo, hi) = wilson_interval(20, 100, Z95);
        assert!((lo - 0.13333).abs() < 1e-4);
        assert!((hi - 0.28883).abs() < 1e-4);
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = line_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!(f.rms_residual < 1e-14);
        assert!((loglog_slope(&[1.0, 2.0, 4.0], &[1.0, 0.25, 0.0625]).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
