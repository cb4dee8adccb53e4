use serde::{Deserialize, Serialize};

use super::{ImpactModel, PowerPair, RiskModel, TimeGrid};
use crate::error::{Error, Result};

/// Seed used when a configuration does not name one.
pub const DEFAULT_SEED: u64 = 0;

/// Path count used when a configuration does not name one.
pub const DEFAULT_PATHS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(default = "default_cluster")]
    pub cluster: f64,
}

fn default_cluster() -> f64 {
    1.0
}

/// JSON model description, for example
/// `{"p": 2.0, "T": 1.0, "impact": {"kind": "gbm", "eta0": 1.0, "mu": 1.0, "sigma": 0.5},
///   "risk": {"kind": "zero"}, "grid": {"n": 1000, "cluster": 2.0}, "seed": 42, "paths": 10000}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub p: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub impact: ImpactModel,
    #[serde(default)]
    pub risk: RiskModel,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every field, returning the power pair and grid.
    pub fn build(&self) -> Result<(PowerPair, TimeGrid)> {
        let pq = PowerPair::new(self.p)?;
        let grid = TimeGrid::clustered(self.horizon, self.grid.n, self.grid.cluster)?;
        self.impact.validate()?;
        self.risk.validate()?;
        if self.paths == Some(0) {
            return Err(Error::Argument("paths must be positive".into()));
        }
        Ok((pq, grid))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn paths(&self) -> usize {
        self.paths.unwrap_or(DEFAULT_PATHS)
    }

    /// Copy with every defaulted field written out.
    pub fn resolved(&self) -> Self {
        Self {
            seed: Some(self.seed()),
            paths: Some(self.paths()),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{"p": 2.0, "T": 1.0, "impact": {"kind": "gbm", "eta0": 1.0, "mu": 1.0, "sigma": 0.5}, "risk": {"kind": "zero"}, "grid": {"n": 1000, "cluster": 2.0}, "seed": 42, "paths": 10000}"#;

    #[test]
    fn parses_documented_example() {
        let spec = ModelSpec::from_json(EXAMPLE).unwrap();
        assert_eq!(spec.seed(), 42);
        assert_eq!(spec.paths(), 10_000);
        let (pq, grid) = spec.build().unwrap();
        assert_eq!(pq.q(), 2.0);
        assert_eq!(grid.intervals(), 1000);
        assert_eq!(grid.cluster_exponent(), 2.0);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = EXAMPLE.replace("\"seed\": 42", "\"sead\": 42");
        assert!(matches!(ModelSpec::from_json(&text), Err(Error::Config(_))));
        let text = EXAMPLE.replace("\"cluster\": 2.0", "\"cluster\": 2.0, \"x\": 1");
        assert!(ModelSpec::from_json(&text).is_err());
    }

    #[test]
    fn missing_seed_defaults_to_zero() {
        let text = r#"{"p": 2.0, "T": 1.0, "impact": {"kind": "constant", "eta0": 1.0}, "grid": {"n": 10}}"#;
        let spec = ModelSpec::from_json(text).unwrap();
        assert_eq!(spec.seed(), 0);
        assert_eq!(spec.risk, RiskModel::Zero);
        assert_eq!(spec.resolved().seed, Some(0));
        assert_eq!(spec.grid.cluster, 1.0);
    }

    #[test]
    fn build_reports_domain_errors() {
        let text = r#"{"p": 1.0, "T": 1.0, "impact": {"kind": "constant", "eta0": 1.0}, "grid": {"n": 10}}"#;
        let spec = ModelSpec::from_json(text).unwrap();
        assert!(matches!(spec.build(), Err(Error::Domain(_))));
    }
}
