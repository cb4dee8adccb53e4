//! Liquidation trajectories from a value density `Y`, their costs and the
//! optimality diagnostics.
//!
//! The optimal feedback is `ẋ_t = -(Y_t/η_t)^{q-1} x_t`. Trajectories store
//! the rate `ẋ` computed from the feedback itself, so costs never difference
//! positions.

mod cost;
mod diagnostic;

pub use cost::{
    cost, cost_with, optimality_tournament, penalized_cost, value_identity_check, CandidateGap, CostQuadrature,
    CostReport, CostTerms, IdentityReport, TournamentReport,
};
pub use diagnostic::{flatness_statistics, maximum_principle_diag, MartingaleDiagnostic, DIAGNOSTIC_THRESHOLD};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsde::{Terminal, YField};
use crate::closed_form::ClosedFormY;
use crate::error::{Error, Result};
use crate::model::{PathEnsemble, PathMatrix, PowerPair, TimeGrid};

/// Where the feedback takes `Y` from.
#[derive(Debug, Clone, Copy)]
pub enum YSource<'a> {
    Field(&'a YField),
    Closed(&'a ClosedFormY),
}

/// Positions `x` and rates `ẋ` per path and node.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory {
    pub grid: TimeGrid,
    pub initial_position: f64,
    pub x_values: PathMatrix,
    pub rate_values: PathMatrix,
    /// `x_T = 0` is imposed; the rate stored at `T` then repeats the one at
    /// the previous node and the cost tail is extrapolated.
    pub forced_zero: bool,
}

impl ControlTrajectory {
    pub fn n_paths(&self) -> usize {
        self.x_values.rows()
    }

    pub fn is_deterministic(&self) -> bool {
        self.x_values.is_shared()
    }

    /// The same control with every position and rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |m: &PathMatrix| {
            let mut out = m.clone();
            out.data_mut().iter_mut().for_each(|v| *v *= factor);
            out
        };
        Self {
            grid: self.grid.clone(),
            initial_position: self.initial_position * factor,
            x_values: scale(&self.x_values),
            rate_values: scale(&self.rate_values),
            forced_zero: self.forced_zero,
        }
    }

    pub fn mean_x(&self, k: usize) -> f64 {
        mean_column(&self.x_values, k)
    }

    pub fn mean_rate(&self, k: usize) -> f64 {
        mean_column(&self.rate_values, k)
    }

    /// Empirical `prob`-quantile of `x` at node `k` (nearest rank).
    pub fn quantile_x(&self, k: usize, prob: f64) -> f64 {
        let mut col = self.x_values.column(k, self.n_paths());
        col.sort_by(|a, b| a.total_cmp(b));
        let idx = ((prob * col.len() as f64).ceil() as usize).clamp(1, col.len()) - 1;
        col[idx]
    }
}

fn mean_column(m: &PathMatrix, k: usize) -> f64 {
    let n = m.rows();
    (0..n).map(|i| m.get(i, k)).sum::<f64>() / n as f64
}

fn same_grid(a: &TimeGrid, b: &TimeGrid) -> bool {
    a.intervals() == b.intervals()
        && a.nodes()
            .iter()
            .zip(b.nodes())
            .all(|(x, y)| (x - y).abs() <= 1e-12 * a.horizon())
}

/// Rows needed to evaluate `traj` against `ensemble`: 1 when both are
/// deterministic, otherwise one per path.
pub(crate) fn check_pairing_rows(traj: &ControlTrajectory, ensemble: &PathEnsemble) -> Result<usize> {
    if !same_grid(&traj.grid, &ensemble.grid) {
        return Err(Error::Argument("trajectory and ensemble grids differ".into()));
    }
    let t_rows = traj.n_paths();
    if t_rows != 1 && t_rows != ensemble.n_paths {
        return Err(Error::Argument(format!(
            "trajectory has {t_rows} paths, ensemble {}",
            ensemble.n_paths
        )));
    }
    let shared = traj.is_deterministic() && ensemble.eta_paths.is_shared() && ensemble.gamma_paths.is_shared();
    Ok(if shared { 1 } else { ensemble.n_paths })
}

/// Rows needed to hold values that are shared or per path.
fn combined_rows(shared: bool, n_paths: usize) -> usize {
    if shared {
        1
    } else {
        n_paths
    }
}

/// Integrates `x` along one path from the relative rates `r = (Y/η)^{q-1}`.
///
/// Singular sources use the trapezoid in `log(T - t)` on `ρ = r (T - t)`,
/// which is exact for rates proportional to `1/(T - t)`, and set `x_T = 0`.
fn integrate_path(rel: &[f64], grid: &TimeGrid, xi: f64, forced_zero: bool, x: &mut [f64], rate: &mut [f64]) {
    let n = grid.intervals();
    x[0] = xi;
    let last = if forced_zero { n - 1 } else { n };
    for k in 0..last {
        let integral = if forced_zero {
            let (tk, tk1) = (grid.time_to_go(k), grid.time_to_go(k + 1));
            0.5 * (rel[k] * tk + rel[k + 1] * tk1) * (tk / tk1).ln()
        } else {
            0.5 * (rel[k] + rel[k + 1]) * grid.step(k)
        };
        x[k + 1] = x[k] * (-integral).exp();
    }
    for k in 0..=last {
        rate[k] = if x[k] == 0.0 { 0.0 } else { -rel[k] * x[k] };
    }
    if forced_zero {
        x[n] = 0.0;
        rate[n] = rate[n - 1];
    }
}

/// Integrates the feedback `ẋ = -(Y/η)^{q-1} x` from `x_0 = ξ`.
///
/// Closed-form sources have a deterministic ratio `Y/η` and give one shared
/// trajectory. Singular sources end at `x_T = 0`; penalised fields leave
/// `x_T` free.
pub fn integrate_control(
    source: YSource<'_>,
    ensemble: &PathEnsemble,
    pq: &PowerPair,
    xi: f64,
) -> Result<ControlTrajectory> {
    if !xi.is_finite() {
        return Err(Error::Argument(format!("initial position {xi} is not finite")));
    }
    let grid = &ensemble.grid;
    let n = grid.intervals();
    let exponent = pq.rate_exponent();
    let horizon = grid.horizon();
    let (rows, forced_zero, rel): (usize, bool, PathMatrix) = match source {
        YSource::Closed(closed) => {
            if (closed.horizon - horizon).abs() > 1e-12 * horizon {
                return Err(Error::Argument("closed form and ensemble horizons differ".into()));
            }
            let mut row = vec![0.0; n + 1];
            for (k, slot) in row.iter_mut().enumerate().take(n) {
                let t = grid.nodes()[k];
                let eta = closed.impact.expected(t, horizon);
                *slot = (closed.eval(t, eta)? / eta).powf(exponent);
            }
            (1, true, PathMatrix::shared(row))
        }
        YSource::Field(field) => {
            if !same_grid(&field.grid, grid) {
                return Err(Error::Argument("Y field and ensemble grids differ".into()));
            }
            let shared = field.is_deterministic() && ensemble.eta_paths.is_shared();
            let rows = combined_rows(shared, ensemble.n_paths);
            if !field.is_deterministic() && field.n_paths() != ensemble.n_paths {
                return Err(Error::Argument(format!(
                    "field has {} paths, ensemble {}",
                    field.n_paths(),
                    ensemble.n_paths
                )));
            }
            let singular = field.terminal == Terminal::Singular;
            let defined = field.defined_nodes();
            let mut rel = PathMatrix::zeros(rows, n + 1);
            let failure: Option<Error> = rel
                .data_mut()
                .par_chunks_mut(n + 1)
                .enumerate()
                .filter_map(|(i, row)| {
                    for (k, slot) in row.iter_mut().enumerate().take(defined) {
                        let y = field.values.get(i, k);
                        let eta = ensemble.eta_paths.get(i, k);
                        if !(y >= 0.0) {
                            return Some(Error::Domain(format!("Y = {y} < 0 at node {k}")));
                        }
                        *slot = if y == 0.0 { 0.0 } else { (y / eta).powf(exponent) };
                    }
                    None
                })
                .min_by_key(|e| e.to_string());
            if let Some(e) = failure {
                return Err(e);
            }
            (rows, singular, rel)
        }
    };
    let mut x_values = PathMatrix::zeros(rows, n + 1);
    let mut rate_values = PathMatrix::zeros(rows, n + 1);
    x_values
        .data_mut()
        .par_chunks_mut(n + 1)
        .zip(rate_values.data_mut().par_chunks_mut(n + 1))
        .enumerate()
        .for_each(|(i, (x, rate))| integrate_path(rel.row(i), grid, xi, forced_zero, x, rate));
    Ok(ControlTrajectory {
        grid: grid.clone(),
        initial_position: xi,
        x_values,
        rate_values,
        forced_zero,
    })
}

/// Running minimum clipped at zero (running maximum clipped at zero for
/// `ξ < 0`), with rates kept only where the envelope follows the path.
pub fn monotone_envelope(traj: &ControlTrajectory) -> ControlTrajectory {
    let mut out = traj.clone();
    let sign = traj.initial_position.signum();
    if sign == 0.0 {
        return out;
    }
    let cols = traj.grid.intervals() + 1;
    out.x_values
        .data_mut()
        .par_chunks_mut(cols)
        .zip(out.rate_values.data_mut().par_chunks_mut(cols))
        .for_each(|(x, rate)| {
            let mut envelope = f64::INFINITY;
            for k in 0..cols {
                let original = sign * x[k];
                envelope = envelope.min(original).max(0.0);
                if envelope != original {
                    rate[k] = 0.0;
                }
                x[k] = sign * envelope;
            }
        });
    out
}

/// Benchmark controls replicated across paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidateKind {
    /// `x_t = ξ (1 - t/T)`.
    Linear,
    /// `x_t = ξ (1 - t/T)^α`.
    Power { alpha: f64 },
    /// `x_t = ξ e^{-c t}`, terminal position left open.
    ConstantRate { rate: f64 },
    /// `x_t = ξ exp(-∫_0^t r_s ds)` with a piecewise-linear relative rate `r ≥ 0`.
    DeterministicRate { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl CandidateKind {
    pub fn label(&self) -> String {
        match self {
            CandidateKind::Linear => "linear".into(),
            CandidateKind::Power { alpha } => format!("power({alpha})"),
            CandidateKind::ConstantRate { rate } => format!("constant_rate({rate})"),
            CandidateKind::DeterministicRate { .. } => "deterministic_rate".into(),
        }
    }
}

/// A deterministic benchmark trajectory with analytic rates.
pub fn candidate_control(kind: &CandidateKind, grid: &TimeGrid, xi: f64) -> Result<ControlTrajectory> {
    let n = grid.intervals();
    let horizon = grid.horizon();
    let mut x = vec![0.0; n + 1];
    let mut rate = vec![0.0; n + 1];
    let forced_zero = match kind {
        CandidateKind::Linear => {
            for k in 0..=n {
                x[k] = xi * grid.time_to_go(k) / horizon;
                rate[k] = -xi / horizon;
            }
            x[n] = 0.0;
            true
        }
        CandidateKind::Power { alpha } => {
            if !(*alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::Argument(format!("power exponent α = {alpha} must be positive")));
            }
            for k in 0..n {
                let s = grid.time_to_go(k) / horizon;
                x[k] = xi * s.powf(*alpha);
                rate[k] = -xi * alpha / horizon * s.powf(alpha - 1.0);
            }
            x[n] = 0.0;
            rate[n] = if *alpha >= 1.0 {
                if *alpha == 1.0 {
                    -xi / horizon
                } else {
                    0.0
                }
            } else {
                rate[n - 1]
            };
            true
        }
        CandidateKind::ConstantRate { rate: c } => {
            if !(*c >= 0.0) || !c.is_finite() {
                return Err(Error::Argument(format!("rate {c} must be nonnegative")));
            }
            for (k, &t) in grid.nodes().iter().enumerate() {
                x[k] = xi * (-c * t).exp();
                rate[k] = -c * x[k];
            }
            false
        }
        CandidateKind::DeterministicRate { breakpoints, values } => {
            if breakpoints.is_empty()
                || breakpoints.len() != values.len()
                || breakpoints.windows(2).any(|w| w[1] <= w[0])
                || values.iter().any(|v| !(*v >= 0.0) || !v.is_finite())
            {
                return Err(Error::Argument(
                    "rate table needs increasing breakpoints and nonnegative finite values".into(),
                ));
            }
            let table = |t: f64| -> f64 {
                let j = breakpoints.partition_point(|&b| b <= t);
                if j == 0 {
                    values[0]
                } else if j == breakpoints.len() {
                    values[j - 1]
                } else {
                    let w = (t - breakpoints[j - 1]) / (breakpoints[j] - breakpoints[j - 1]);
                    values[j - 1] + w * (values[j] - values[j - 1])
                }
            };
            let rel: Vec<f64> = grid.nodes().iter().map(|&t| table(t)).collect();
            integrate_path(&rel, grid, xi, false, &mut x, &mut rate);
            false
        }
    };
    Ok(ControlTrajectory {
        grid: grid.clone(),
        initial_position: xi,
        x_values: PathMatrix::shared(x),
        rate_values: PathMatrix::shared(rate),
        forced_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsde::{l_schedule_limit, solve_penalized_deterministic, LSchedule, PenalizedParams, SolverSelector};
    use crate::closed_form::x_gbm;
    use crate::model::{sample_paths, ImpactModel, RiskModel};

    fn pq(p: f64) -> PowerPair {
        PowerPair::new(p).unwrap()
    }

    fn deterministic_ensemble(impact: &ImpactModel, grid: &TimeGrid) -> PathEnsemble {
        sample_paths(impact, &RiskModel::Zero, grid, 0, 1).unwrap()
    }

    #[test]
    fn martingale_closure_is_linear() {
        let grid = TimeGrid::uniform(1.0, 500).unwrap();
        let one = ImpactModel::Constant { eta0: 1.0 };
        let ens = deterministic_ensemble(&one, &grid);
        let closed = ClosedFormY::for_model(&one, pq(2.0), 1.0).unwrap();
        let traj = integrate_control(YSource::Closed(&closed), &ens, &pq(2.0), 1.0).unwrap();
        for (k, &t) in grid.nodes().iter().enumerate() {
            assert!((traj.x_values.get(0, k) - (1.0 - t)).abs() < 1e-12);
            assert!((traj.rate_values.get(0, k) + 1.0).abs() < 1e-12);
        }
        let doubled = integrate_control(YSource::Closed(&closed), &ens, &pq(2.0), 2.0).unwrap();
        assert!((doubled.x_values.get(0, 250) - 2.0 * traj.x_values.get(0, 250)).abs() < 1e-15);
    }

    #[test]
    fn square_root_impact_schedule() {
        let grid = TimeGrid::clustered(1.0, 4000, 2.0).unwrap();
        let sqrt = ImpactModel::PowerSingular { beta: 0.5 };
        let ens = deterministic_ensemble(&sqrt, &grid);
        let closed = ClosedFormY::for_model(&sqrt, pq(2.0), 1.0).unwrap();
        let traj = integrate_control(YSource::Closed(&closed), &ens, &pq(2.0), 1.0).unwrap();
        let sup = grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, &t)| (traj.x_values.get(0, k) - (1.0 - t).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(sup <= 1e-6, "sup error {sup}");
        assert_eq!(traj.x_values.get(0, 4000), 0.0);
        // x(T - 10^{-k}) → 0
        let mut prev = f64::INFINITY;
        for j in 2..=6 {
            let k = grid.nearest_node(1.0 - 10f64.powi(-j));
            let x = traj.x_values.get(0, k);
            assert!(x < prev);
            prev = x;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn numerical_limit_field_drives_the_schedule() {
        let grid = TimeGrid::clustered(1.0, 4000, 2.0).unwrap();
        let sqrt = ImpactModel::PowerSingular { beta: 0.5 };
        let ens = deterministic_ensemble(&sqrt, &grid);
        let res = l_schedule_limit(
            &sqrt,
            &RiskModel::Zero,
            &pq(2.0),
            &LSchedule::decades(1, 14, 1e-13).unwrap(),
            SolverSelector::Deterministic {
                grid: &grid,
                params: PenalizedParams::new(1.0).unwrap(),
            },
        )
        .unwrap();
        let traj = integrate_control(YSource::Field(&res.field), &ens, &pq(2.0), 1.0).unwrap();
        let sup = grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, &t)| (traj.x_values.get(0, k) - (1.0 - t).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(sup <= 1e-4, "sup error {sup}");
    }

    #[test]
    fn zero_penalty_means_no_trading() {
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let one = ImpactModel::Constant { eta0: 1.0 };
        let ens = deterministic_ensemble(&one, &grid);
        let f = solve_penalized_deterministic(
            &one,
            &RiskModel::Zero,
            &pq(2.0),
            &grid,
            &PenalizedParams::new(0.0).unwrap(),
        )
        .unwrap();
        let traj = integrate_control(YSource::Field(&f), &ens, &pq(2.0), 1.5).unwrap();
        assert!(traj.x_values.data().iter().all(|&x| x == 1.5));
        assert!(traj.rate_values.data().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn gbm_schedule_matches_formula() {
        let grid = TimeGrid::uniform(1.0, 1000).unwrap();
        let gbm = ImpactModel::Gbm {
            eta0: 1.0,
            mu: 1.0,
            sigma: 0.5,
        };
        let ens = sample_paths(&gbm, &RiskModel::Zero, &grid, 1, 16).unwrap();
        let closed = ClosedFormY::for_model(&gbm, pq(2.0), 1.0).unwrap();
        let traj = integrate_control(YSource::Closed(&closed), &ens, &pq(2.0), 1.0).unwrap();
        assert!(traj.is_deterministic());
        for (k, &t) in grid.nodes().iter().enumerate() {
            assert!((traj.x_values.get(0, k) - x_gbm(1.0, &pq(2.0), 1.0, t).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn envelope_examples() {
        let grid = TimeGrid::uniform(3.0, 3).unwrap();
        let make = |xs: Vec<f64>| ControlTrajectory {
            grid: grid.clone(),
            initial_position: xs[0],
            x_values: PathMatrix::shared(xs),
            rate_values: PathMatrix::shared(vec![-1.0; 4]),
            forced_zero: false,
        };
        let e = monotone_envelope(&make(vec![1.0, 0.5, 0.8, 0.0]));
        assert_eq!(e.x_values.row(0), &[1.0, 0.5, 0.5, 0.0]);
        assert_eq!(e.rate_values.row(0), &[-1.0, -1.0, 0.0, -1.0]);
        let e = monotone_envelope(&make(vec![1.0, -0.2, 0.1, 0.0]));
        assert_eq!(e.x_values.row(0), &[1.0, 0.0, 0.0, 0.0]);
        let already = make(vec![1.0, 0.6, 0.3, 0.0]);
        assert_eq!(monotone_envelope(&already), already);
    }

    #[test]
    fn candidate_examples() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let lin = candidate_control(&CandidateKind::Linear, &grid, 1.0).unwrap();
        assert_eq!(lin.x_values.row(0), &[1.0, 0.75, 0.5, 0.25, 0.0]);
        assert!(lin.rate_values.row(0).iter().all(|&r| r == -1.0));
        let pow1 = candidate_control(&CandidateKind::Power { alpha: 1.0 }, &grid, 1.0).unwrap();
        assert_eq!(pow1, lin);
        let half = candidate_control(&CandidateKind::Power { alpha: 0.5 }, &grid, 1.0).unwrap();
        assert!((half.x_values.get(0, 3) - 0.5).abs() < 1e-15);
        assert!(candidate_control(&CandidateKind::Power { alpha: 0.0 }, &grid, 1.0).is_err());
        let flat = candidate_control(
            &CandidateKind::DeterministicRate {
                breakpoints: vec![0.0],
                values: vec![2.0],
            },
            &grid,
            1.0,
        )
        .unwrap();
        let exact = candidate_control(&CandidateKind::ConstantRate { rate: 2.0 }, &grid, 1.0).unwrap();
        for k in 0..=4 {
            assert!((flat.x_values.get(0, k) - exact.x_values.get(0, k)).abs() < 1e-14);
        }
    }
}
