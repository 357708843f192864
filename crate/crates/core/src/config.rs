//! Run configuration, the shipped presets, and `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analyze::{ExtractionConfig, VerifyConfig};
use crate::error::{Error, Result};
use crate::evolve::{Gamma0Spec, InitialDataSpec, ToyConfig, VRingSpec};
use crate::model::SystemSpec;

/// How the Newton iteration for the base profile is seeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuessSpec {
    /// `r(cos 2πζ, sin 2πζ)`; `r` defaults to the rgl amplitude `√(1 - (2πk)²)`.
    RotatingWave {
        #[serde(default)]
        amplitude: Option<f64>,
    },
    /// Perturb the homogeneous state `base` by `amplitude·cos 2πζ` in every
    /// component and relax one period in time.
    Relax {
        base: Vec<f64>,
        amplitude: f64,
        t_final: f64,
        dt: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveTrainConfig {
    pub k0: f64,
    #[serde(default = "default_profile_m")]
    pub m: usize,
    #[serde(default)]
    pub omega_guess: f64,
    pub guess: GuessSpec,
    /// Continuation step; defaults to `k₀/100`.
    #[serde(default)]
    pub family_dk: Option<f64>,
    #[serde(default = "default_family_steps")]
    pub family_steps: usize,
}

fn default_profile_m() -> usize {
    32
}

fn default_family_steps() -> usize {
    10
}

impl WaveTrainConfig {
    pub fn dk(&self) -> f64 {
        self.family_dk.unwrap_or(self.k0 / 100.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlochConfig {
    /// Fourier truncation `M` (modes `-M..=M`).
    pub modes: usize,
    /// Uniform ξ samples on `[-π, π)` for the stability report.
    pub xi_uniform: usize,
    /// Finest ξ of the geometric refinement towards 0.
    pub xi_finest: f64,
    pub critical_xi_max: f64,
    pub critical_samples: usize,
}

impl Default for BlochConfig {
    fn default() -> Self {
        Self {
            modes: 64,
            xi_uniform: 64,
            xi_finest: 1e-3,
            critical_xi_max: 0.5,
            critical_samples: 21,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Domain length in wave periods.
    pub periods: usize,
    pub points_per_period: usize,
    pub dt: f64,
    pub t_final: f64,
    pub output_every: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            periods: 256,
            points_per_period: 16,
            dt: 0.1,
            t_final: 2000.0,
            output_every: 5.0,
        }
    }
}

impl SolverConfig {
    pub fn m(&self) -> usize {
        self.periods * self.points_per_period
    }

    pub fn output_times(&self) -> Vec<f64> {
        output_times(self.t_final, self.output_every)
    }
}

/// `0, every, 2·every, …` up to `t_final`.
pub fn output_times(t_final: f64, every: f64) -> Vec<f64> {
    let n = (t_final / every + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * every).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub extraction: ExtractionConfig,
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplicitCoefficients {
    pub a: f64,
    pub d: f64,
    pub nu: f64,
}

/// Phase-equation prediction settings. Without explicit coefficients the
/// computed ones are used together with the solver grid and `initial.gamma0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    pub coefficients: Option<ExplicitCoefficients>,
    pub periods: Option<usize>,
    pub m: Option<usize>,
    pub gamma0: Option<Gamma0Spec>,
    pub t_final: Option<f64>,
    pub output_every: Option<f64>,
    /// Step of the direct integration used as a cross-check.
    pub direct_dt: f64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            coefficients: None,
            periods: None,
            m: None,
            gamma0: None,
            t_final: None,
            output_every: None,
            direct_dt: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRunConfig {
    pub model: ToyConfig,
    pub t_final: f64,
    pub dt: f64,
    pub output_every: f64,
    pub window: (f64, f64),
    /// Model used for the Cole–Hopf transform check (needs `ν ≠ 0`).
    pub transform: ToyConfig,
    pub transform_t_final: f64,
    pub transform_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    #[serde(default)]
    pub wavetrain: Option<WaveTrainConfig>,
    #[serde(default)]
    pub bloch: BlochConfig,
    #[serde(default)]
    pub initial: Option<InitialDataSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub predict: PredictConfig,
    #[serde(default)]
    pub toy: Option<ToyRunConfig>,
    /// Seed for every random component.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_name() -> String {
    "run".into()
}

pub const PRESETS: [(&str, &str); 5] = [
    ("rgl-default", include_str!("../../../presets/rgl-default.json")),
    (
        "rgl-eckhaus-unstable",
        include_str!("../../../presets/rgl-eckhaus-unstable.json"),
    ),
    (
        "brusselator-default",
        include_str!("../../../presets/brusselator-default.json"),
    ),
    ("toy-default", include_str!("../../../presets/toy-default.json")),
    (
        "burgers-meanzero",
        include_str!("../../../presets/burgers-meanzero.json"),
    ),
];

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
        Self::from_json(text)
    }

    /// Apply `key.path=value` overrides; values parse as JSON, falling back to
    /// a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("override {o:?} is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value)?;
        }
        let cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| Error::Config(format!("config invalid after overrides: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(init) = &self.initial {
            let random = matches!(init.vring0, VRingSpec::RandomSmooth { .. });
            if random && self.seed.or(init.seed).is_none() {
                return Err(Error::Config(
                    "a seed is required when the perturbation is random".into(),
                ));
            }
        }
        let s = &self.solver;
        if !(s.dt > 0.0 && s.t_final >= 0.0 && s.output_every > 0.0) {
            return Err(Error::Config("solver needs dt > 0, T >= 0 and output_every > 0".into()));
        }
        if !s.m().is_power_of_two() {
            return Err(Error::Config(format!(
                "periods x points_per_period = {} must be a power of two",
                s.m()
            )));
        }
        if let Some(w) = &self.wavetrain {
            if !(w.k0 > 0.0) {
                return Err(Error::Config(format!("k0 must be positive, got {}", w.k0)));
            }
        }
        Ok(())
    }

    /// The initial-data spec with the run seed filled in.
    pub fn initial_spec(&self) -> Result<InitialDataSpec> {
        let mut spec = self
            .initial
            .clone()
            .ok_or_else(|| Error::Config("config has no initial data section".into()))?;
        spec.seed = spec.seed.or(self.seed);
        Ok(spec)
    }

    pub fn system_spec(&self) -> Result<&SystemSpec> {
        self.system
            .as_ref()
            .ok_or_else(|| Error::Config("config has no system section".into()))
    }

    pub fn wavetrain_config(&self) -> Result<&WaveTrainConfig> {
        self.wavetrain
            .as_ref()
            .ok_or_else(|| Error::Config("config has no wavetrain section".into()))
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("bad override key {key:?}")));
    }
    let mut cur = doc;
    for (i, part) in parts.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Usage(format!("override key {key:?}: {part:?} is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("loop returns on the last key")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_round_trip() {
        for (name, _) in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(RunConfig::from_json(&text).unwrap(), cfg, "{name}");
        }
    }

    #[test]
    fn overrides_follow_dot_paths() {
        let cfg = RunConfig::preset("rgl-default").unwrap();
        let o = cfg
            .with_overrides(&["solver.t_final=50", "name=short", "bloch.modes=16"])
            .unwrap();
        assert_eq!(o.solver.t_final, 50.0);
        assert_eq!(o.name, "short");
        assert_eq!(o.bloch.modes, 16);
        assert!(matches!(cfg.with_overrides(&["solver.dt=-1"]), Err(Error::Config(_))));
        assert!(matches!(cfg.with_overrides(&["nokey"]), Err(Error::Usage(_))));
        assert!(matches!(cfg.with_overrides(&["bogus=1"]), Err(Error::Config(_))));
    }

    #[test]
    fn random_perturbation_needs_seed() {
        let mut cfg = RunConfig::preset("rgl-default").unwrap();
        cfg.seed = None;
        if let Some(i) = cfg.initial.as_mut() {
            i.seed = None;
        }
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn output_grid() {
        assert_eq!(output_times(10.0, 2.5), vec![0.0, 2.5, 5.0, 7.5, 10.0]);
    }
}
