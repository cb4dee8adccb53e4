use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bsde::LSchedule;
use crate::control::CandidateKind;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::verify::DEFAULT_SWEEP_ALPHAS;

/// Keys of the configuration file that belong to the model description.
const MODEL_KEYS: [&str; 7] = ["p", "T", "impact", "risk", "grid", "seed", "paths"];

/// Command options that may sit next to the model keys in a configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandOptions {
    /// Penalty levels of the `L`-schedule, increasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<CandidateKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Model description plus command options, validated before any computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub options: CommandOptions,
}

/// Model used when `verify` runs without a configuration file.
pub const DEFAULT_MODEL: &str = r#"{"p": 2.0, "T": 1.0, "impact": {"kind": "gbm", "eta0": 1.0, "mu": 1.0, "sigma": 0.5}, "risk": {"kind": "zero"}, "grid": {"n": 1000, "cluster": 1.0}, "seed": 42, "paths": 10000}"#;

/// Default penalty levels: decades `10^1 .. 10^12` for deterministic models,
/// `10^1 .. 10^6` under Monte Carlo.
fn default_levels(deterministic: bool) -> Vec<f64> {
    let top = if deterministic { 12 } else { 6 };
    (1..=top).map(|e| 10f64.powi(e)).collect()
}

impl RunConfig {
    /// Parses a configuration file's text, splitting model keys from options.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let Value::Object(all) = value else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        let (model, options): (Map<String, Value>, Map<String, Value>) =
            all.into_iter().partition(|(k, _)| MODEL_KEYS.contains(&k.as_str()));
        let model: ModelSpec =
            serde_json::from_value(Value::Object(model)).map_err(|e| Error::Config(format!("model: {e}")))?;
        let options: CommandOptions =
            serde_json::from_value(Value::Object(options)).map_err(|e| Error::Config(format!("options: {e}")))?;
        let config = Self { model, options };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn default_model() -> Self {
        Self::from_json(DEFAULT_MODEL).expect("built-in configuration is valid")
    }

    /// Applies command-line overrides and validates again.
    pub fn with_overrides(mut self, seed: Option<u64>, paths: Option<usize>, out: Option<PathBuf>) -> Result<Self> {
        if seed.is_some() {
            self.model.seed = seed;
        }
        if paths.is_some() {
            self.model.paths = paths;
        }
        if out.is_some() {
            self.options.out = out;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (_, grid) = self.model.build()?;
        let o = &self.options;
        if let Some(levels) = &o.levels {
            LSchedule::new(levels.clone(), self.stop_tol())?;
        }
        if !(self.stop_tol() > 0.0) {
            return Err(Error::Config("stop_tol must be positive".into()));
        }
        if !self.xi().is_finite() {
            return Err(Error::Config("xi must be finite".into()));
        }
        if let Some(points) = &o.checkpoints {
            if points.iter().any(|&t| !(t > 0.0 && t < grid.horizon())) {
                return Err(Error::Config(format!(
                    "checkpoints must lie in (0, {})",
                    grid.horizon()
                )));
            }
        }
        if let Some(alphas) = &o.alphas {
            if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0)) {
                return Err(Error::Config("alphas must be positive".into()));
            }
        }
        if self.basis_degree() == 0 || self.basis_degree() > 8 {
            return Err(Error::Config("basis_degree must be between 1 and 8".into()));
        }
        if !(self.delta_floor() >= 0.0 && self.delta_floor().is_finite()) {
            return Err(Error::Config("delta_floor must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<LSchedule> {
        let levels = self
            .options
            .levels
            .clone()
            .unwrap_or_else(|| default_levels(self.model.impact.is_deterministic()));
        LSchedule::new(levels, self.stop_tol())
    }

    pub fn stop_tol(&self) -> f64 {
        self.options.stop_tol.unwrap_or(1e-10)
    }

    pub fn xi(&self) -> f64 {
        self.options.xi.unwrap_or(1.0)
    }

    pub fn candidates(&self) -> Vec<CandidateKind> {
        self.options.candidates.clone().unwrap_or_else(|| {
            vec![
                CandidateKind::Linear,
                CandidateKind::Power { alpha: 0.5 },
                CandidateKind::Power { alpha: 2.0 },
            ]
        })
    }

    pub fn checkpoints(&self) -> Vec<f64> {
        let t = self.model.horizon;
        self.options
            .checkpoints
            .clone()
            .unwrap_or_else(|| vec![0.25 * t, 0.5 * t, 0.75 * t])
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.options
            .alphas
            .clone()
            .unwrap_or_else(|| DEFAULT_SWEEP_ALPHAS.to_vec())
    }

    pub fn basis_degree(&self) -> usize {
        self.options.basis_degree.unwrap_or(3)
    }

    pub fn delta_floor(&self) -> f64 {
        self.options.delta_floor.unwrap_or(0.0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.options.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Copy with every defaulted field written out.
    pub fn resolved(&self) -> Result<Self> {
        Ok(Self {
            model: self.model.resolved(),
            options: CommandOptions {
                levels: Some(self.schedule()?.levels().to_vec()),
                stop_tol: Some(self.stop_tol()),
                xi: Some(self.xi()),
                candidates: Some(self.candidates()),
                checkpoints: Some(self.checkpoints()),
                alphas: Some(self.alphas()),
                beta: self.options.beta,
                basis_degree: Some(self.basis_degree()),
                delta_floor: Some(self.delta_floor()),
                out: Some(self.out_dir()),
            },
        })
    }

    /// Flat JSON object in the configuration-file layout.
    pub fn to_json_value(&self) -> Value {
        let mut map = match serde_json::to_value(&self.model) {
            Ok(Value::Object(m)) => m,
            _ => Map::new(),
        };
        if let Ok(Value::Object(opts)) = serde_json::to_value(&self.options) {
            map.extend(opts);
        }
        Value::Object(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_model_and_options() {
        let text = r#"{"p": 2, "T": 1, "impact": {"kind": "constant", "eta0": 1}, "grid": {"n": 10}, "levels": [10, 100], "xi": 2}"#;
        let c = RunConfig::from_json(text).unwrap();
        assert_eq!(c.model.grid.n, 10);
        assert_eq!(c.xi(), 2.0);
        assert_eq!(c.schedule().unwrap().levels(), &[10.0, 100.0]);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let text = r#"{"p": 2, "T": 1, "impact": {"kind": "constant", "eta0": 1}, "grid": {"n": 10}, "levls": [10]}"#;
        assert!(matches!(RunConfig::from_json(text), Err(Error::Config(_))));
    }

    #[test]
    fn resolved_round_trips() {
        let c = RunConfig::default_model().resolved().unwrap();
        let again = RunConfig::from_json(&c.to_json_value().to_string()).unwrap();
        assert_eq!(again, c);
        assert_eq!(c.model.seed, Some(42));
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::default_model()
            .with_overrides(Some(7), Some(100), Some(PathBuf::from("x")))
            .unwrap();
        assert_eq!(c.model.seed(), 7);
        assert_eq!(c.model.paths(), 100);
        assert_eq!(c.out_dir(), PathBuf::from("x"));
        assert!(RunConfig::default_model().with_overrides(None, Some(0), None).is_err());
    }
}
