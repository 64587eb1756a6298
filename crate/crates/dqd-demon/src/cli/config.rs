//! Flat TOML run configuration.
//!
//! Every quantity is in units of `T`. Example:
//!
//! ```toml
//! model = "spectral-quantum"
//! Gamma = 0.1
//! g = 0.1
//! T = 1.0
//! bias = 3.0          # or mu_L / mu_R
//! eps_u = 5.0         # eps_d defaults to -eps_u, eps_0 to 0
//! gamma_1 = 10.0
//! lambda_ratio = 0.1  # or lambda_1
//! sweep = "lambda_ratio=0.01:1000:21:log"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};
use crate::model::{Bath, DetectorParams, Level, RateOverride, SystemParams};
use crate::solver::{MethodChoice, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    SpectralQuantum,
    SpectralClassical,
    FastAnalytic,
    FastGenerator,
    ClassicalIdeal,
    GlobalFcs,
    Trajectory,
}

impl Model {
    pub const ALL: [Model; 7] = [
        Model::SpectralQuantum,
        Model::SpectralClassical,
        Model::FastAnalytic,
        Model::FastGenerator,
        Model::ClassicalIdeal,
        Model::GlobalFcs,
        Model::Trajectory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::SpectralQuantum => "spectral-quantum",
            Model::SpectralClassical => "spectral-classical",
            Model::FastAnalytic => "fast-analytic",
            Model::FastGenerator => "fast-generator",
            Model::ClassicalIdeal => "classical-ideal",
            Model::GlobalFcs => "global-fcs",
            Model::Trajectory => "trajectory",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = DemonError;
    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| DemonError::Config(format!("unknown model '{s}'")))
    }
}

/// Scalar fields a sweep may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepField {
    Gamma,
    G,
    T,
    MuL,
    MuR,
    Bias,
    Eps0,
    EpsU,
    EpsD,
    GammaPhi,
    Gamma1,
    Lambda1,
    LambdaRatio,
}

impl SweepField {
    pub const ALL: [SweepField; 13] = [
        SweepField::Gamma,
        SweepField::G,
        SweepField::T,
        SweepField::MuL,
        SweepField::MuR,
        SweepField::Bias,
        SweepField::Eps0,
        SweepField::EpsU,
        SweepField::EpsD,
        SweepField::GammaPhi,
        SweepField::Gamma1,
        SweepField::Lambda1,
        SweepField::LambdaRatio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepField::Gamma => "Gamma",
            SweepField::G => "g",
            SweepField::T => "T",
            SweepField::MuL => "mu_L",
            SweepField::MuR => "mu_R",
            SweepField::Bias => "bias",
            SweepField::Eps0 => "eps_0",
            SweepField::EpsU => "eps_u",
            SweepField::EpsD => "eps_d",
            SweepField::GammaPhi => "Gamma_phi",
            SweepField::Gamma1 => "gamma_1",
            SweepField::Lambda1 => "lambda_1",
            SweepField::LambdaRatio => "lambda_ratio",
        }
    }
}

impl FromStr for SweepField {
    type Err = DemonError;
    fn from_str(s: &str) -> Result<Self> {
        SweepField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| DemonError::Validation(vec![format!("sweep over unknown field '{s}'")]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub field: SweepField,
    pub values: Vec<f64>,
}

impl Sweep {
    /// `field=start:stop:points[:log]` or `field=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Sweep> {
        let (field, rest) = spec
            .split_once('=')
            .ok_or_else(|| DemonError::Parse(format!("sweep '{spec}' must look like field=values")))?;
        let field: SweepField = field.trim().parse()?;
        let rest = rest.trim();
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| DemonError::Parse(format!("'{t}' is not a number in sweep '{spec}'")))
        };
        let values = if rest.contains(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            if !(parts.len() == 3 || parts.len() == 4) {
                return Err(DemonError::Parse(format!("range '{rest}' needs start:stop:points[:log]")));
            }
            let (a, b) = (num(parts[0])?, num(parts[1])?);
            let n: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| DemonError::Parse(format!("'{}' is not a point count", parts[2])))?;
            let log = match parts.get(3).map(|s| s.trim()) {
                None | Some("lin") => false,
                Some("log") => true,
                Some(other) => return Err(DemonError::Parse(format!("unknown spacing '{other}'"))),
            };
            if log && (a <= 0.0 || b <= 0.0) {
                return Err(DemonError::Validation(vec!["log sweep needs positive bounds".into()]));
            }
            spaced(a, b, n, log)
        } else {
            rest.split(',').filter(|t| !t.trim().is_empty()).map(num).collect::<Result<Vec<_>>>()?
        };
        let s = Sweep { field, values };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(DemonError::Validation(vec!["sweep value list is empty".into()]));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(DemonError::Validation(vec!["sweep values must be finite".into()]));
        }
        Ok(())
    }

    pub fn spec(&self) -> String {
        let vals: Vec<String> = self.values.iter().map(|v| format!("{v}")).collect();
        format!("{}={}", self.field.name(), vals.join(","))
    }
}

/// `n` points from `a` to `b` inclusive, linear or geometric.
pub fn spaced(a: f64, b: f64, n: usize, log: bool) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                if log {
                    (a.ln() + t * (b.ln() - a.ln())).exp()
                } else {
                    a + t * (b - a)
                }
            })
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySettings {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub record_stride: usize,
    pub count: usize,
}

impl Default for TrajectorySettings {
    fn default() -> Self {
        TrajectorySettings {
            dt: 1e-4,
            t_end: 100.0,
            seed: 1,
            record_stride: 100,
            count: 1,
        }
    }
}

/// On-disk schema. Names follow the physics symbols.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct RawConfig {
    pub model: Option<String>,
    pub Gamma: Option<f64>,
    pub g: Option<f64>,
    pub T: Option<f64>,
    pub mu_L: Option<f64>,
    pub mu_R: Option<f64>,
    pub bias: Option<f64>,
    pub eps_0: Option<f64>,
    pub eps_u: Option<f64>,
    pub eps_d: Option<f64>,
    pub Gamma_phi: Option<f64>,
    pub gamma_1: Option<f64>,
    pub lambda_1: Option<f64>,
    pub lambda_ratio: Option<f64>,
    pub ideal_charge_detection: Option<bool>,
    /// Entries like `"L:eps_u"`.
    pub overrides: Option<Vec<String>>,
    pub energy_conserving: Option<bool>,
    /// `"auto"`, `"grid"` or `"spectral"`.
    pub solver: Option<String>,
    pub N: Option<usize>,
    pub sweep: Option<String>,
    pub output: Option<String>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
    pub record_stride: Option<usize>,
    pub trajectories: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub params: SystemParams,
    pub detector: DetectorParams,
    pub overrides: RateOverride,
    pub solver: SolverOptions,
    pub sweep: Option<Sweep>,
    pub output: Option<PathBuf>,
    pub trajectory: TrajectorySettings,
    /// `ε_d` follows `−ε_u` when `ε_u` is swept.
    pub eps_d_tracks: bool,
    /// `λ₁/γ₁` held fixed when `γ₁` is swept.
    pub lambda_ratio: Option<f64>,
    pub raw: RawConfig,
}

fn parse_override(s: &str) -> Result<(Bath, Level)> {
    let (b, l) = s
        .split_once(':')
        .ok_or_else(|| DemonError::Config(format!("override '{s}' must look like L:eps_u")))?;
    let bath = match b.trim() {
        "L" => Bath::L,
        "R" => Bath::R,
        other => return Err(DemonError::Config(format!("unknown bath '{other}'"))),
    };
    let level = match l.trim() {
        "eps_u" => Level::EpsU,
        "eps_d" => Level::EpsD,
        other => return Err(DemonError::Config(format!("override level '{other}' must be eps_u or eps_d"))),
    };
    Ok((bath, level))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| DemonError::Parse(e.to_string()))?;
        RunConfig::from_raw(raw)
    }

    pub fn from_raw(raw: RawConfig) -> Result<RunConfig> {
        let mut errs = Vec::new();
        let mut need = |name: &str, v: Option<f64>| -> f64 {
            v.unwrap_or_else(|| {
                errs.push(format!("missing required field '{name}'"));
                f64::NAN
            })
        };
        let gamma = need("Gamma", raw.Gamma);
        let g = need("g", raw.g);
        let temperature = need("T", raw.T);
        let eps_u = need("eps_u", raw.eps_u);
        let gamma_1 = need("gamma_1", raw.gamma_1);

        let (mu_l, mu_r) = match (raw.bias, raw.mu_L, raw.mu_R) {
            (Some(b), None, None) => (-b / 2.0, b / 2.0),
            (None, Some(l), Some(r)) => (l, r),
            (None, None, None) => {
                errs.push("missing chemical potentials: give 'bias' or both 'mu_L' and 'mu_R'".into());
                (f64::NAN, f64::NAN)
            }
            _ => {
                errs.push("give either 'bias' or both 'mu_L' and 'mu_R'".into());
                (f64::NAN, f64::NAN)
            }
        };
        let lambda_1 = match (raw.lambda_1, raw.lambda_ratio) {
            (Some(l), None) => l,
            (None, Some(r)) => r * gamma_1,
            (None, None) => {
                errs.push("missing measurement strength: give 'lambda_1' or 'lambda_ratio'".into());
                f64::NAN
            }
            (Some(_), Some(_)) => {
                errs.push("give only one of 'lambda_1' and 'lambda_ratio'".into());
                f64::NAN
            }
        };
        let params = SystemParams {
            gamma,
            g,
            temperature,
            mu_l,
            mu_r,
            eps_0: raw.eps_0.unwrap_or(0.0),
            eps_u,
            eps_d: raw.eps_d.unwrap_or(-eps_u),
            gamma_phi: raw.Gamma_phi.unwrap_or(0.0),
        };
        let detector = DetectorParams {
            gamma_1,
            lambda_1,
            ideal_charge_detection: raw.ideal_charge_detection.unwrap_or(true),
        };
        if errs.is_empty() {
            errs.extend(params.violations());
            errs.extend(detector.violations());
        }
        if !detector.ideal_charge_detection {
            errs.push("only ideal charge detection is supported".into());
        }

        let model = match raw.model.as_deref() {
            None => Model::SpectralQuantum,
            Some(s) => match s.parse::<Model>() {
                Ok(m) => m,
                Err(e) => {
                    errs.push(e.to_string());
                    Model::SpectralQuantum
                }
            },
        };

        let mut overrides = if raw.energy_conserving.unwrap_or(false) {
            RateOverride::energy_conserving()
        } else {
            RateOverride::none()
        };
        for s in raw.overrides.iter().flatten() {
            match parse_override(s).and_then(|(b, l)| overrides.clone().zero(b, l)) {
                Ok(o) => overrides = o,
                Err(e) => errs.push(e.to_string()),
            }
        }

        let mut solver = SolverOptions::default();
        match (raw.solver.as_deref(), raw.N) {
            (None | Some("auto"), None) => {}
            (None | Some("spectral"), Some(n)) => solver.method = MethodChoice::Spectral { n },
            (Some("spectral"), None) => solver.method = MethodChoice::Spectral { n: 100 },
            (Some("grid"), None) => solver.method = MethodChoice::Grid,
            (Some("auto"), Some(n)) => solver.n_start = n,
            (Some(other), _) => errs.push(format!("unknown solver '{other}'")),
        }

        let sweep = match raw.sweep.as_deref().map(Sweep::parse) {
            None => None,
            Some(Ok(s)) => Some(s),
            Some(Err(DemonError::Validation(v))) => {
                errs.extend(v);
                None
            }
            Some(Err(e)) => {
                errs.push(e.to_string());
                None
            }
        };

        let defaults = TrajectorySettings::default();
        let trajectory = TrajectorySettings {
            dt: raw.dt.unwrap_or(defaults.dt),
            t_end: raw.t_end.unwrap_or(defaults.t_end),
            seed: raw.seed.unwrap_or(defaults.seed),
            record_stride: raw.record_stride.unwrap_or(defaults.record_stride),
            count: raw.trajectories.unwrap_or(defaults.count),
        };
        if !(trajectory.dt > 0.0) || !(trajectory.t_end >= 0.0) {
            errs.push("trajectory dt must be > 0 and t_end >= 0".into());
        }

        if !errs.is_empty() {
            return Err(DemonError::Validation(errs));
        }
        Ok(RunConfig {
            model,
            params,
            detector,
            overrides,
            solver,
            sweep,
            output: raw.output.as_ref().map(PathBuf::from),
            trajectory,
            eps_d_tracks: raw.eps_d.is_none(),
            lambda_ratio: raw.lambda_ratio,
            raw,
        })
    }

    /// Parameters with one sweep field set to `value`.
    pub fn point(&self, field: SweepField, value: f64) -> (SystemParams, DetectorParams) {
        let mut p = self.params;
        let mut d = self.detector;
        match field {
            SweepField::Gamma => p.gamma = value,
            SweepField::G => p.g = value,
            SweepField::T => p.temperature = value,
            SweepField::MuL => p.mu_l = value,
            SweepField::MuR => p.mu_r = value,
            SweepField::Bias => {
                p.mu_l = -value / 2.0;
                p.mu_r = value / 2.0;
            }
            SweepField::Eps0 => p.eps_0 = value,
            SweepField::EpsU => {
                p.eps_u = value;
                if self.eps_d_tracks {
                    p.eps_d = -value;
                }
            }
            SweepField::EpsD => p.eps_d = value,
            SweepField::GammaPhi => p.gamma_phi = value,
            SweepField::Gamma1 => {
                d.gamma_1 = value;
                if let Some(r) = self.lambda_ratio {
                    d.lambda_1 = r * value;
                }
            }
            SweepField::Lambda1 => d.lambda_1 = value,
            SweepField::LambdaRatio => d.lambda_1 = value * d.gamma_1,
        }
        (p, d)
    }

    /// `key=value` lines echoing the resolved configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let d = &self.detector;
        let mut v = vec![
            ("model".to_string(), self.model.name().to_string()),
            ("Gamma".into(), format!("{}", p.gamma)),
            ("g".into(), format!("{}", p.g)),
            ("T".into(), format!("{}", p.temperature)),
            ("mu_L".into(), format!("{}", p.mu_l)),
            ("mu_R".into(), format!("{}", p.mu_r)),
            ("eps_0".into(), format!("{}", p.eps_0)),
            ("eps_u".into(), format!("{}", p.eps_u)),
            ("eps_d".into(), format!("{}", p.eps_d)),
            ("Gamma_phi".into(), format!("{}", p.gamma_phi)),
            ("gamma_1".into(), format!("{}", d.gamma_1)),
            ("lambda_1".into(), format!("{}", d.lambda_1)),
        ];
        let ov: Vec<String> = self
            .overrides
            .iter()
            .map(|(b, l)| format!("{b}:{}", l.name()))
            .collect();
        v.push(("overrides".into(), ov.join(",")));
        v.push(("solver".into(), format!("{:?}", self.solver.method)));
        if let Some(s) = &self.sweep {
            v.push(("sweep".into(), s.spec()));
        }
        if self.model == Model::Trajectory {
            let t = &self.trajectory;
            v.push(("dt".into(), format!("{}", t.dt)));
            v.push(("t_end".into(), format!("{}", t.t_end)));
            v.push(("seed".into(), format!("{}", t.seed)));
            v.push(("trajectories".into(), format!("{}", t.count)));
        }
        v
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml_str(&text)
}
