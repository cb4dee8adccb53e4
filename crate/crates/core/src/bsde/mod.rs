//! Penalised backward SDE
//!
//! `dY = ((p-1) Y^q / (η∨δ)^{q-1} - γ∧L) dt + Z dW`,  `Y_T = L`,
//!
//! solved backward on a time grid, its `L → ∞` limit, and the analytic
//! bounds that sandwich it.
//!
//! The nonlinear part is integrated exactly: with `u = y^{-(q-1)}` the
//! equation `y' = (p-1) y^q η^{-(q-1)}` becomes `u' = -η^{-(q-1)}`, so one
//! backward step adds `∫ η^{-(q-1)}` to `u`. The source `γ∧L` is added by
//! Strang splitting around that flow. Backward Euler is available as an
//! alternative scheme.

mod bounds;
mod linear;
mod solver;

pub use bounds::{
    bounds_sandwich_check, lower_bound_penalized, lower_bound_singular, upper_bound_penalized, upper_bound_singular,
    NodeBounds, SandwichReport,
};
pub use linear::{linear_bsde_mc, LinearBsdeEstimate};
pub(crate) use solver::paired_se;
pub use solver::{
    estimate_z, l_schedule_limit, solve_penalized_deterministic, solve_penalized_mc, LSchedule, LevelRecord,
    LimitResult, SolverSelector,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PathMatrix, PowerPair, TimeGrid};

/// Time-stepping scheme for the nonlinear term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScheme {
    /// Exact flow of the power nonlinearity with Strang-split source.
    #[default]
    ExactFlow,
    /// Implicit Euler solved by safeguarded Newton iteration.
    BackwardEuler,
}

/// Penalty level `L`, impact floor `δ` and root-finding tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenalizedParams {
    pub level: f64,
    pub delta_floor: f64,
    pub implicit_solver_tol: f64,
    #[serde(default)]
    pub scheme: StepScheme,
}

impl PenalizedParams {
    pub fn new(level: f64) -> Result<Self> {
        let params = Self {
            level,
            delta_floor: 0.0,
            implicit_solver_tol: 1e-12,
            scheme: StepScheme::ExactFlow,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_delta_floor(mut self, delta: f64) -> Result<Self> {
        self.delta_floor = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_scheme(mut self, scheme: StepScheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// `L = 0` is accepted: it is the trivial problem with `Y ≡ 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.level >= 0.0) || !self.level.is_finite() {
            return Err(Error::Argument(format!("penalty L = {} must be >= 0", self.level)));
        }
        if !(self.delta_floor >= 0.0) || !self.delta_floor.is_finite() {
            return Err(Error::Argument(format!(
                "impact floor δ = {} must be >= 0",
                self.delta_floor
            )));
        }
        if !(self.implicit_solver_tol > 0.0) {
            return Err(Error::Argument(format!(
                "solver tolerance {} must be positive",
                self.implicit_solver_tol
            )));
        }
        Ok(())
    }

    fn floored(&self, eta: f64) -> Result<f64> {
        let e = eta.max(self.delta_floor);
        if e > 0.0 {
            Ok(e)
        } else {
            Err(Error::Positivity(format!(
                "η = {eta} with floor δ = {}",
                self.delta_floor
            )))
        }
    }
}

/// Forward-time drift of `Y`: `(p-1) y^q / (η∨δ)^{q-1} - γ∧L`.
pub fn driver(y: f64, eta_t: f64, gamma_t: f64, params: &PenalizedParams, pq: &PowerPair) -> Result<f64> {
    if y < 0.0 {
        return Err(Error::Domain(format!("driver needs y >= 0, got {y}")));
    }
    let eta = params.floored(eta_t)?;
    let power = if y == 0.0 {
        0.0
    } else {
        pq.value_exponent() * y.powf(pq.q()) / eta.powf(pq.rate_exponent())
    };
    Ok(power - gamma_t.min(params.level))
}

/// Exact backward flow of `y' = (p-1) y^q η^{-(q-1)}` over a step whose
/// integral of `η^{-(q-1)}` is `integral`.
#[inline]
pub fn power_flow(y: f64, integral: f64, pq: &PowerPair) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let u = y.powf(-pq.rate_exponent()) + integral;
    u.powf(-pq.value_exponent())
}

/// Solves `y + h(p-1) y^q / η^{q-1} = rhs` for `y >= 0`.
pub fn implicit_step(rhs: f64, h: f64, eta: f64, pq: &PowerPair, tol: f64, node: usize) -> Result<f64> {
    if rhs <= 0.0 {
        return Ok(0.0);
    }
    let c = h * pq.value_exponent() / eta.powf(pq.rate_exponent());
    let q = pq.q();
    let f = |y: f64| y + c * y.powf(q) - rhs;
    let (mut lo, mut hi) = (0.0, rhs);
    // F is convex and increasing, so Newton from the right end stays bracketed
    let mut y = rhs;
    for _ in 0..200 {
        let fy = f(y);
        if fy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let slope = 1.0 + c * q * y.powf(q - 1.0);
        let mut next = y - fy / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= tol * y.max(1.0) || hi - lo <= tol * hi.max(1.0) {
            return Ok(next);
        }
        y = next;
    }
    Err(Error::Numerical {
        node,
        message: format!("implicit step did not converge (rhs = {rhs}, bracket [{lo}, {hi}])"),
    })
}

/// How the field behaves at the terminal node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    /// `Y_T = L`.
    Penalty(f64),
    /// `Y_T = ∞`; the field is defined on `t < T` only.
    Singular,
}

/// Values of `Y` on a grid: one shared row (deterministic coefficients) or
/// one row per path.
#[derive(Debug, Clone)]
pub struct YField {
    pub grid: TimeGrid,
    pub values: PathMatrix,
    /// `Z` per path on each interval's left node, when estimated.
    pub z: Option<PathMatrix>,
    pub terminal: Terminal,
    pub basis: String,
    /// Number of (path, node) values clamped into `[0, (1+T)L]`.
    pub clamped: usize,
    /// Monte Carlo standard error of `Y_0` (0 for deterministic fields).
    pub y0_std_error: f64,
}

impl YField {
    pub fn is_deterministic(&self) -> bool {
        self.values.is_shared()
    }

    pub fn n_paths(&self) -> usize {
        self.values.rows()
    }

    /// Nodes where `Y` is defined: all of them for a penalised field, all but
    /// the last for the singular limit.
    pub fn defined_nodes(&self) -> usize {
        match self.terminal {
            Terminal::Penalty(_) => self.grid.intervals() + 1,
            Terminal::Singular => self.grid.intervals(),
        }
    }

    pub fn y0(&self) -> f64 {
        self.mean(0)
    }

    pub fn mean(&self, k: usize) -> f64 {
        let n = self.n_paths();
        (0..n).map(|i| self.values.get(i, k)).sum::<f64>() / n as f64
    }

    /// Empirical `prob`-quantile of `Y` at node `k` (nearest rank).
    pub fn quantile(&self, k: usize, prob: f64) -> f64 {
        let mut col = self.values.column(k, self.n_paths());
        col.sort_by(|a, b| a.total_cmp(b));
        let idx = ((prob * col.len() as f64).ceil() as usize).clamp(1, col.len()) - 1;
        col[idx]
    }

    pub fn z_mean(&self, k: usize) -> Option<f64> {
        let z = self.z.as_ref()?;
        if k >= z.cols() {
            return None;
        }
        let n = z.rows();
        Some((0..n).map(|i| z.get(i, k)).sum::<f64>() / n as f64)
    }

    /// `Y` at node `k` of `path`, or a coverage error where it is undefined.
    pub fn value(&self, path: usize, k: usize) -> Result<f64> {
        if k >= self.defined_nodes() {
            return Err(Error::Coverage(format!(
                "Y is not defined at node {k} (t = {})",
                self.grid.nodes().get(k).copied().unwrap_or(f64::NAN)
            )));
        }
        Ok(self.values.get(path, k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pq(p: f64) -> PowerPair {
        PowerPair::new(p).unwrap()
    }

    #[test]
    fn driver_examples() {
        let params = PenalizedParams::new(5.0).unwrap();
        assert_eq!(driver(0.0, 1.0, 2.0, &params, &pq(2.0)).unwrap(), -2.0);
        assert_eq!(driver(3.0, 1.0, 0.0, &params, &pq(2.0)).unwrap(), 9.0);
        assert_eq!(driver(0.0, 1.0, 7.0, &params, &pq(2.0)).unwrap(), -5.0);
        assert!(matches!(
            driver(1.0, 0.0, 0.0, &params, &pq(2.0)),
            Err(Error::Positivity(_))
        ));
        let floored = params.with_delta_floor(0.5).unwrap();
        assert_eq!(driver(1.0, 0.0, 0.0, &floored, &pq(2.0)).unwrap(), 2.0);
    }

    #[test]
    fn params_validation() {
        assert!(PenalizedParams::new(-1.0).is_err());
        assert!(PenalizedParams::new(0.0).is_ok());
        assert!(PenalizedParams::new(1.0).unwrap().with_delta_floor(-0.1).is_err());
    }

    #[test]
    fn flow_solves_riccati_exactly() {
        // y' = y², y(1) = L  ⇒  y(t) = L/(1 + L(1 - t))
        let l = 10.0;
        let y = power_flow(l, 0.25, &pq(2.0));
        assert!((y - l / (1.0 + l * 0.25)).abs() < 1e-14);
        assert_eq!(power_flow(0.0, 1.0, &pq(2.0)), 0.0);
    }

    #[test]
    fn implicit_step_solves_its_equation() {
        for p in [1.5, 2.0, 3.0] {
            let pq = pq(p);
            let y = implicit_step(7.0, 0.01, 0.8, &pq, 1e-14, 0).unwrap();
            let residual = y + 0.01 * (p - 1.0) * y.powf(pq.q()) / 0.8f64.powf(pq.rate_exponent()) - 7.0;
            assert!(residual.abs() < 1e-12);
        }
        assert_eq!(implicit_step(0.0, 0.1, 1.0, &pq(2.0), 1e-12, 0).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn driver_is_monotone(y1 in 0.0f64..1e3, dy in 0.0f64..1e3, eta in 1e-3f64..1e2,
                              gamma in 0.0f64..10.0, l in 0.0f64..100.0, p in 1.05f64..8.0) {
            let params = PenalizedParams::new(l).unwrap();
            let pq = pq(p);
            let a = driver(y1, eta, gamma, &params, &pq).unwrap();
            let b = driver(y1 + dy, eta, gamma, &params, &pq).unwrap();
            prop_assert!(b >= a);
        }

        #[test]
        fn flow_is_monotone_and_contracting(y1 in 0.0f64..1e4, dy in 0.0f64..1e4, i in 0.0f64..10.0, p in 1.05f64..8.0) {
            let pq = pq(p);
            let a = power_flow(y1, i, &pq);
            let b = power_flow(y1 + dy, i, &pq);
            prop_assert!(b >= a && a <= y1 + 1e-12 * y1);
        }
    }
}
