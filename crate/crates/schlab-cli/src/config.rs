//! Run configuration: flat `key = value` lines with dotted sections
//! (`noise.kind = linear`), `#` comments and blank lines.

use std::collections::BTreeMap;
use std::path::PathBuf;

use schlab::detectors::RateWindow;
use schlab::dynamics::DriftKind;
use schlab::noise::{NoiseSpec, TimeFunction};
use schlab::stepper::{Guards, Mollify, Scheme, StepConfig};

pub const KEYS: &[&str] = &[
    "equation",
    "resolution",
    "sobolev_s",
    "unsafe_sobolev",
    "horizon",
    "dt",
    "scheme",
    "seed",
    "paths",
    "output",
    "noise.kind",
    "noise.b0",
    "noise.gamma",
    "noise.a",
    "noise.theta",
    "noise.modes",
    "guards.w1inf_factor",
    "guards.w1inf_cap",
    "guards.tail_fraction",
    "guards.forbid_breakdown",
    "mollify.eps",
    "mollify.r",
    "u0.kind",
    "u0.a",
    "u0.m",
    "u0.b",
    "u0.n",
    "u0.l",
    "u0.s",
    "u0.kappa",
    "u0.path",
    "exit.levels",
    "rate.min_abs",
    "rate.max_frac",
    "probe.level",
    "probe.n_values",
    "probe.s",
];

/// A configuration problem tied to one key.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Raw key/value pairs; a repeated key keeps its last value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(err(&format!("line {}", i + 1), "expected key = value"));
            };
            raw.set(k.trim(), v.trim())?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(err(key, "unknown key"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| err(kv, "override must look like key=value"))?;
        self.set(k.trim(), v.trim())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn num<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> Result<T, ConfigError> {
        match self.get(key) {
            Some(v) => v.parse().map_err(|_| err(key, format!("cannot parse {v:?}"))),
            None => default.ok_or_else(|| err(key, "missing")),
        }
    }

    fn opt_num<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| err(key, format!("cannot parse {v:?}"))))
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self.get(key) {
            None | Some("") => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| err(key, format!("cannot parse {x:?} in list")))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    Ch1d,
    Ep2d,
}

impl Equation {
    pub fn drift(self) -> DriftKind {
        match self {
            Equation::Ch1d => DriftKind::Ch1d,
            Equation::Ep2d => DriftKind::Ep2d,
        }
    }
}

/// Whitelisted initial data.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// 1-D: a·sin(mx) + b·cos(nx). 2-D: the shear pair
    /// (a·sin(my) + b·cos(ny), a·sin(mx) + b·cos(nx)).
    Trig {
        a: f64,
        m: f64,
        b: f64,
        n: f64,
    },
    /// u^{l,n} = l/n + n^{−s}cos(nx) at t = 0.
    Approximate {
        l: f64,
        n: usize,
        s: f64,
    },
    /// a·sin x / (1 + κ(1 + cos x)).
    Localized {
        a: f64,
        kappa: f64,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub equation: Equation,
    pub resolution: usize,
    pub step: StepConfig,
    pub horizon: f64,
    pub noise: NoiseSpec,
    pub modes: usize,
    pub forbid_breakdown: bool,
    pub seed: u64,
    pub paths: usize,
    pub output: PathBuf,
    pub initial: InitialData,
    pub exit_levels: Vec<f64>,
    pub rate_window: RateWindow,
    pub probe_level: Option<f64>,
    /// Perturbation indices n of u₀ + 1/n + n^{−s}cos(nx).
    pub probe_n_values: Vec<usize>,
    pub probe_s: f64,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let equation = match raw.get("equation") {
            None => return Err(err("equation", "missing")),
            Some("ch1d") => Equation::Ch1d,
            Some("ep2d") => Equation::Ep2d,
            Some(v) => return Err(err("equation", format!("expected ch1d or ep2d, got {v:?}"))),
        };
        let resolution: usize = raw.num("resolution", Some(128))?;
        if resolution < 8 || !resolution.is_multiple_of(2) {
            return Err(err("resolution", format!("{resolution} must be even and at least 8")));
        }
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(err(key, format!("{v} must be positive")))
            }
        };
        let horizon = positive("horizon", raw.num("horizon", Some(1.0))?)?;
        let dt = positive("dt", raw.num("dt", Some(1e-3))?)?;
        if dt > horizon {
            return Err(err("dt", format!("{dt} exceeds the horizon {horizon}")));
        }
        let scheme = match raw.get("scheme").unwrap_or("rk4_random") {
            "rk4_random" => Scheme::Rk4Random,
            "euler_maruyama" => Scheme::EulerMaruyama,
            v => {
                return Err(err(
                    "scheme",
                    format!("expected rk4_random or euler_maruyama, got {v:?}"),
                ))
            }
        };
        let noise = parse_noise(raw, equation, scheme)?;
        let modes: usize = raw.num("noise.modes", Some(1))?;
        if modes == 0 {
            return Err(err("noise.modes", "at least one mode"));
        }
        let defaults = Guards::default();
        let guards = Guards {
            w1inf_factor: positive(
                "guards.w1inf_factor",
                raw.num("guards.w1inf_factor", Some(defaults.w1inf_factor))?,
            )?,
            w1inf_cap: raw
                .opt_num::<f64>("guards.w1inf_cap")?
                .map(|v| positive("guards.w1inf_cap", v))
                .transpose()?,
            tail_energy_fraction: raw.num("guards.tail_fraction", Some(defaults.tail_energy_fraction))?,
        };
        if !(guards.tail_energy_fraction > 0.0 && guards.tail_energy_fraction <= 1.0) {
            return Err(err("guards.tail_fraction", "must lie in (0, 1]"));
        }
        let forbid_breakdown = match raw.get("guards.forbid_breakdown").unwrap_or("false") {
            "true" => true,
            "false" => false,
            v => {
                return Err(err(
                    "guards.forbid_breakdown",
                    format!("expected true or false, got {v:?}"),
                ))
            }
        };
        let mollify = match (raw.opt_num::<f64>("mollify.eps")?, raw.opt_num::<f64>("mollify.r")?) {
            (None, None) => None,
            (Some(eps), Some(r)) => {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(err("mollify.eps", format!("{eps} must lie in (0, 1)")));
                }
                if !(r > 0.0) {
                    return Err(err("mollify.r", format!("{r} must be positive")));
                }
                Some(Mollify { eps, r })
            }
            (Some(_), None) => return Err(err("mollify.r", "missing (mollify.eps is set)")),
            (None, Some(_)) => return Err(err("mollify.eps", "missing (mollify.r is set)")),
        };
        // the local theory needs s > d/2 + 1; below that the H^s series
        // tracks no solution norm
        let sobolev_s: f64 = raw.num("sobolev_s", Some(3.5))?;
        let unsafe_sobolev = match raw.get("unsafe_sobolev").unwrap_or("false") {
            "true" => true,
            "false" => false,
            v => return Err(err("unsafe_sobolev", format!("expected true or false, got {v:?}"))),
        };
        let dim = if equation == Equation::Ch1d { 1.0 } else { 2.0 };
        if !(sobolev_s >= 0.0) {
            return Err(err("sobolev_s", "must be non-negative"));
        }
        if !unsafe_sobolev && sobolev_s <= dim / 2.0 + 1.0 {
            return Err(err(
                "sobolev_s",
                format!(
                    "{sobolev_s} must exceed d/2 + 1 = {} (set unsafe_sobolev = true to allow)",
                    dim / 2.0 + 1.0
                ),
            ));
        }
        let step = StepConfig {
            dt,
            scheme,
            guards,
            mollify,
            sobolev_s,
        };
        let paths: usize = raw.num("paths", Some(100))?;
        if paths == 0 {
            return Err(err("paths", "at least one path"));
        }
        let rate_window = RateWindow {
            min_abs: raw.num("rate.min_abs", Some(RateWindow::default().min_abs))?,
            max_frac: raw.num("rate.max_frac", Some(RateWindow::default().max_frac))?,
        };
        if !(rate_window.max_frac > 0.0 && rate_window.max_frac <= 1.0) {
            return Err(err("rate.max_frac", "must lie in (0, 1]"));
        }
        Ok(Self {
            equation,
            resolution,
            step,
            horizon,
            noise,
            modes,
            forbid_breakdown,
            seed: raw.num("seed", Some(0))?,
            paths,
            output: PathBuf::from(raw.get("output").unwrap_or(".")),
            initial: parse_initial(raw, equation, resolution)?,
            exit_levels: raw.list("exit.levels")?,
            rate_window,
            probe_level: raw.opt_num("probe.level")?,
            probe_n_values: raw
                .list("probe.n_values")?
                .into_iter()
                .map(|v| {
                    if v >= 1.0 && v.fract() == 0.0 && v as i64 <= schlab::spectral::dealias_cutoff(resolution) {
                        Ok(v as usize)
                    } else {
                        Err(err(
                            "probe.n_values",
                            format!("{v} must be a positive integer within the band"),
                        ))
                    }
                })
                .collect::<Result<_, _>>()?,
            probe_s: raw.num("probe.s", Some(4.0))?,
        })
    }
}

fn parse_noise(raw: &RawConfig, equation: Equation, scheme: Scheme) -> Result<NoiseSpec, ConfigError> {
    let spec = match raw.get("noise.kind").unwrap_or("zero") {
        "zero" => NoiseSpec::Zero,
        "linear" => {
            let b0 = raw.num("noise.b0", None)?;
            let b = match raw.opt_num::<f64>("noise.gamma")? {
                Some(gamma) => TimeFunction::Exponential { b0, gamma },
                None => TimeFunction::Constant { b0 },
            };
            NoiseSpec::Linear { b }
        }
        "power" => NoiseSpec::Power {
            a: raw.num("noise.a", None)?,
            theta: raw.num("noise.theta", None)?,
        },
        "f_bounded" => {
            if equation != Equation::Ep2d {
                return Err(err("noise.kind", "f_bounded needs equation = ep2d"));
            }
            if scheme != Scheme::EulerMaruyama {
                return Err(err("scheme", "f_bounded noise needs scheme = euler_maruyama"));
            }
            NoiseSpec::FBounded
        }
        v => {
            return Err(err(
                "noise.kind",
                format!("expected zero, linear, power or f_bounded, got {v:?}"),
            ))
        }
    };
    spec.validate().map_err(|e| err("noise", e.to_string()))?;
    Ok(spec)
}

fn parse_initial(raw: &RawConfig, equation: Equation, resolution: usize) -> Result<InitialData, ConfigError> {
    let kind = raw.get("u0.kind").unwrap_or("trig");
    let one_d_only = |k: &str| {
        if equation == Equation::Ch1d {
            Ok(())
        } else {
            Err(err("u0.kind", format!("{k} initial data exists only for ch1d")))
        }
    };
    Ok(match kind {
        "trig" => InitialData::Trig {
            a: raw.num("u0.a", Some(1.0))?,
            m: raw.num("u0.m", Some(1.0))?,
            b: raw.num("u0.b", Some(0.0))?,
            n: raw.num("u0.n", Some(1.0))?,
        },
        "approximate" => {
            one_d_only(kind)?;
            let n: usize = raw.num("u0.n", None)?;
            if n == 0 || n as i64 > schlab::spectral::dealias_cutoff(resolution) {
                return Err(err(
                    "u0.n",
                    format!("mode {n} must lie in 1..=(N−1)/3 for N = {resolution}"),
                ));
            }
            InitialData::Approximate {
                l: raw.num("u0.l", Some(1.0))?,
                n,
                s: raw.num("u0.s", Some(4.0))?,
            }
        }
        "localized" => {
            one_d_only(kind)?;
            let kappa: f64 = raw.num("u0.kappa", Some(4.0))?;
            if !(kappa >= 0.0) {
                return Err(err("u0.kappa", "must be non-negative"));
            }
            InitialData::Localized {
                a: raw.num("u0.a", Some(3.0))?,
                kappa,
            }
        }
        "file" => InitialData::File(PathBuf::from(
            raw.get("u0.path")
                .ok_or_else(|| err("u0.path", "missing (u0.kind = file)"))?,
        )),
        v => {
            return Err(err(
                "u0.kind",
                format!("expected trig, approximate, localized or file, got {v:?}"),
            ))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_raw(&RawConfig::parse(text)?)
    }

    #[test]
    fn empty_config_names_equation() {
        assert_eq!(cfg("").unwrap_err().to_string(), "equation: missing");
    }

    #[test]
    fn parses_sections_and_comments() {
        let c =
            cfg("equation = ch1d # the CH equation\n\nnoise.kind = linear\nnoise.b0 = 0.5\nnoise.gamma = 1\n").unwrap();
        assert_eq!(c.resolution, 128);
        assert_eq!(
            c.noise,
            NoiseSpec::Linear {
                b: TimeFunction::Exponential { b0: 0.5, gamma: 1.0 }
            }
        );
    }

    #[test]
    fn field_level_messages() {
        let e = |t: &str| cfg(t).unwrap_err().key;
        assert_eq!(e("equation = kdv"), "equation");
        assert_eq!(e("equation = ch1d\nresolution = 7"), "resolution");
        assert_eq!(e("equation = ch1d\ndt = -1"), "dt");
        assert_eq!(e("equation = ch1d\nnoise.kind = linear"), "noise.b0");
        assert_eq!(e("equation = ch1d\nnoise.kind = f_bounded"), "noise.kind");
        assert_eq!(e("equation = ep2d\nnoise.kind = f_bounded"), "scheme");
        assert_eq!(e("equation = ch1d\nmollify.eps = 0.1"), "mollify.r");
        assert_eq!(e("equation = ch1d\nu0.kind = approximate\nu0.n = 60"), "u0.n");
        assert_eq!(e("equation = ch1d\nwat = 1"), "wat");
        assert_eq!(e("equation = ep2d\nsobolev_s = 2"), "sobolev_s");
        assert!(cfg("equation = ep2d\nsobolev_s = 2\nunsafe_sobolev = true").is_ok());
        assert_eq!(e("equation = ch1d\nprobe.n_values = 4,100"), "probe.n_values");
        assert_eq!(e("equation = ch1d\nno equals sign"), "line 2");
    }

    #[test]
    fn overrides_win() {
        let mut raw = RawConfig::parse("equation = ch1d\nresolution = 64").unwrap();
        raw.apply_override("resolution=32").unwrap();
        assert_eq!(RunConfig::from_raw(&raw).unwrap().resolution, 32);
        assert!(raw.apply_override("resolution").is_err());
    }
}
