//! Problem parameters: the cost exponent, time discretisation, the impact
//! and risk processes, and seeded path sampling.

mod impact;
mod paths;
mod spec;

pub use impact::{
    expected_impact, validate_integrability, ConditionCheck, ImpactModel, IntegrabilityReport, RiskModel,
};
pub use paths::{sample_paths, PathEnsemble, PathMatrix, BLOCK_PATHS};
pub use spec::{GridSpec, ModelSpec, DEFAULT_PATHS, DEFAULT_SEED};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hölder conjugate `q = p/(p-1)` of a cost exponent `p > 1`.
pub fn conjugate(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!(
            "cost exponent p = {p} must exceed 1; at p = 1 no optimal absolutely continuous control exists"
        )));
    }
    Ok(p / (p - 1.0))
}

/// The cost exponent `p` together with its conjugate `q`.
///
/// Every formula in the crate is written in terms of `p - 1` and `q - 1`,
/// which are reciprocal: `(p-1)(q-1) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPair {
    p: f64,
    q: f64,
}

impl PowerPair {
    pub fn new(p: f64) -> Result<Self> {
        let q = conjugate(p)?;
        Ok(Self { p, q })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// `q - 1 = 1/(p - 1)`: exponent of the relative trading rate `(Y/η)^{q-1}`.
    #[inline]
    pub fn rate_exponent(&self) -> f64 {
        self.q - 1.0
    }

    /// `p - 1`.
    #[inline]
    pub fn value_exponent(&self) -> f64 {
        self.p - 1.0
    }
}

/// Discretisation of `[0, T]`, optionally clustered toward `T`.
///
/// With cluster exponent `g`, node `k` of `N` sits at `T(1 - (1 - k/N)^g)`;
/// `g = 1` is the uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    cluster_exponent: f64,
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, intervals: usize) -> Result<Self> {
        Self::clustered(horizon, intervals, 1.0)
    }

    pub fn clustered(horizon: f64, intervals: usize, cluster_exponent: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Argument(format!("horizon T = {horizon} must be positive")));
        }
        if intervals == 0 {
            return Err(Error::Argument("time grid needs at least one interval".into()));
        }
        if !(cluster_exponent >= 1.0) || !cluster_exponent.is_finite() {
            return Err(Error::Argument(format!(
                "cluster exponent {cluster_exponent} must be >= 1"
            )));
        }
        let n = intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals)
            .map(|k| horizon * (1.0 - (1.0 - k as f64 / n).powf(cluster_exponent)))
            .collect();
        nodes[0] = 0.0;
        nodes[intervals] = horizon;
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(format!(
                "grid with {intervals} intervals and cluster exponent {cluster_exponent} \
                 is not strictly increasing in floating point"
            )));
        }
        Ok(Self {
            horizon,
            cluster_exponent,
            nodes,
        })
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    pub fn cluster_exponent(&self) -> f64 {
        self.cluster_exponent
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of intervals `N` (there are `N + 1` nodes).
    #[inline]
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    #[inline]
    pub fn step(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    /// Distance `T - t_k`, computed from the cluster map so it stays accurate
    /// at nodes next to `T`.
    pub fn time_to_go(&self, k: usize) -> f64 {
        let n = self.intervals();
        if k >= n {
            return 0.0;
        }
        self.horizon * (1.0 - k as f64 / n as f64).powf(self.cluster_exponent)
    }

    /// Index of the node closest to `t`.
    pub fn nearest_node(&self, t: f64) -> usize {
        let idx = self.nodes.partition_point(|&s| s < t);
        if idx == 0 {
            return 0;
        }
        if idx >= self.nodes.len() {
            return self.nodes.len() - 1;
        }
        if (self.nodes[idx] - t).abs() < (t - self.nodes[idx - 1]).abs() {
            idx
        } else {
            idx - 1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_examples() {
        assert_eq!(conjugate(2.0).unwrap(), 2.0);
        assert!((conjugate(4.0 / 3.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((conjugate(3.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(matches!(conjugate(1.0), Err(Error::Domain(_))));
        assert!(matches!(conjugate(0.5), Err(Error::Domain(_))));
        assert!(conjugate(f64::NAN).is_err());
    }

    #[test]
    fn power_pair_exponents_are_reciprocal() {
        let pq = PowerPair::new(1.7).unwrap();
        assert!((pq.rate_exponent() * pq.value_exponent() - 1.0).abs() < 1e-14);
        assert!((1.0 / pq.p() + 1.0 / pq.q() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn clustered_grid_matches_formula() {
        let g = TimeGrid::clustered(2.0, 8, 2.0).unwrap();
        for (k, &t) in g.nodes().iter().enumerate() {
            let expect = 2.0 * (1.0 - (1.0 - k as f64 / 8.0).powi(2));
            assert_eq!(t, expect);
            assert!((g.time_to_go(k) - (2.0 - t)).abs() < 1e-15);
        }
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(*g.nodes().last().unwrap(), 2.0);
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        assert!(TimeGrid::clustered(1.0, 4, 0.5).is_err());
    }

    #[test]
    fn nearest_node_lookup() {
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        assert_eq!(g.nearest_node(0.0), 0);
        assert_eq!(g.nearest_node(0.26), 3);
        assert_eq!(g.nearest_node(0.5), 5);
        assert_eq!(g.nearest_node(2.0), 10);
    }
}
