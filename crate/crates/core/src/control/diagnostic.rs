use serde::{Deserialize, Serialize};

use super::{check_pairing_rows, ControlTrajectory};
use crate::error::{Error, Result};
use crate::model::{PathEnsemble, PathMatrix, PowerPair, RiskModel, TimeGrid};
use crate::regression::{accumulate, solve_normal, PolyBasis};

/// Statistics at or above this many standard errors fail the diagnostic.
pub const DIAGNOSTIC_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleDiagnostic {
    pub checkpoints: Vec<f64>,
    /// Largest `|coefficient / SE|` of the drift regression from each checkpoint.
    pub flatness_stats: Vec<f64>,
    pub threshold: f64,
    pub pass: bool,
}

impl MartingaleDiagnostic {
    pub fn max_stat(&self) -> f64 {
        self.flatness_stats.iter().copied().fold(0.0, f64::max)
    }
}

/// Relative floor on standard errors, so exactly deterministic processes
/// are not divided by zero.
const SE_FLOOR: f64 = 1e-8;

/// Flatness statistic of the process `m` after each checkpoint.
///
/// All one-step increments from the checkpoint node up to the last node
/// before `T` are pooled. Their drift `Δm/h` is regressed on `1, z` with `z`
/// the standardised `state` at the start of the step, by feasible weighted
/// least squares (log squared residuals fitted linearly in `z`), and each
/// coefficient is divided by its heteroskedasticity-robust standard error.
/// A martingale has zero drift, so both ratios stay small.
pub fn flatness_statistics(
    m: &PathMatrix,
    state: &PathMatrix,
    grid: &TimeGrid,
    checkpoints: &[f64],
) -> Result<Vec<f64>> {
    let n = grid.intervals();
    let horizon = grid.horizon();
    if m.cols() != n + 1 || state.cols() != n + 1 {
        return Err(Error::Argument("process arrays do not match the grid".into()));
    }
    let rows = m.rows().max(state.rows());
    checkpoints
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t < horizon) {
                return Err(Error::Argument(format!("checkpoint {t} outside (0, {horizon})")));
            }
            let start = grid.nearest_node(t);
            if start + 1 >= n {
                return Err(Error::Argument(format!("checkpoint {t} leaves no increments before T")));
            }
            pooled_statistic(m, state, grid, rows, start, n - 1)
        })
        .collect()
}

fn pooled_statistic(
    m: &PathMatrix,
    state: &PathMatrix,
    grid: &TimeGrid,
    paths: usize,
    start: usize,
    end: usize,
) -> Result<f64> {
    let len = end - start;
    let total = paths * len;
    let at = |idx: usize| (idx / len, start + idx % len);
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut scale = 0.0;
    for idx in 0..total {
        let (i, k) = at(idx);
        let z = state.get(i, k);
        s1 += z;
        s2 += z * z;
    }
    for i in 0..paths {
        scale += m.get(i, start).abs();
    }
    scale /= paths as f64;
    let nf = total as f64;
    let mean = s1 / nf;
    let sd = (s2 / nf - mean * mean).max(0.0).sqrt();
    let basis = if sd > 1e-12 * (1.0 + mean.abs()) {
        PolyBasis::new(1, mean, sd)
    } else {
        PolyBasis::new(0, mean, 1.0)
    };
    let dim = basis.dim();
    let drift = |idx: usize| {
        let (i, k) = at(idx);
        (m.get(i, k + 1) - m.get(i, k)) / grid.step(k)
    };
    let fill = |idx: usize, row: &mut [f64]| {
        let (i, k) = at(idx);
        basis.fill(state.get(i, k), row);
    };
    let predict = |coef: &[f64], row: &[f64]| row.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>();

    let (a, v) = accumulate(total, dim, |idx, row| {
        fill(idx, row);
        (drift(idx), 1.0)
    });
    let ols = solve_normal(&a, &v)?;
    // variance model: log e² linear in the state
    let weights: Vec<f64> = if dim > 1 {
        let mut row = vec![0.0; dim];
        let mut sq = 0.0;
        for idx in 0..total {
            fill(idx, &mut row);
            let e = drift(idx) - predict(&ols, &row);
            sq += e * e;
        }
        let eps = 1e-12 * sq / nf + f64::MIN_POSITIVE;
        let (va, vv) = accumulate(total, dim, |idx, row| {
            fill(idx, row);
            let e = drift(idx) - predict(&ols, row);
            ((e * e + eps).ln(), 1.0)
        });
        match solve_normal(&va, &vv) {
            Ok(g) => (0..total)
                .map(|idx| {
                    fill(idx, &mut row);
                    (-predict(&g, &row)).exp()
                })
                .collect(),
            Err(_) => vec![1.0; total],
        }
    } else {
        vec![1.0; total]
    };
    let (wa, wv) = accumulate(total, dim, |idx, row| {
        fill(idx, row);
        (drift(idx), weights[idx])
    });
    let beta = solve_normal(&wa, &wv)?;
    let (meat, _) = accumulate(total, dim, |idx, row| {
        fill(idx, row);
        let e = drift(idx) - predict(&beta, row);
        let w = weights[idx];
        (0.0, w * w * e * e)
    });
    let bread = wa
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Basis("weighted normal matrix is not positive definite".into()))?
        .inverse();
    let cov = &bread * meat * &bread;
    let floor = SE_FLOOR * scale.max(f64::MIN_POSITIVE) / grid.horizon();
    Ok((0..dim)
        .map(|j| beta[j].abs() / cov[(j, j)].max(0.0).sqrt().max(floor))
        .fold(0.0, f64::max))
}

/// Tests whether `M_t = p η_t |ẋ_t|^{p-1} + p ∫_0^t γ_s |x_s|^{p-1} ds` is a
/// martingale along the trajectory, conditioning on `log η`.
pub fn maximum_principle_diag(
    traj: &ControlTrajectory,
    ensemble: &PathEnsemble,
    risk: &RiskModel,
    pq: &PowerPair,
    checkpoints: &[f64],
) -> Result<MartingaleDiagnostic> {
    let rows = check_pairing_rows(traj, ensemble)?;
    let grid = &traj.grid;
    let n = grid.intervals();
    let p = pq.p();
    let gamma: Vec<f64> = grid.nodes().iter().map(|&t| risk.value(t)).collect();
    let mut m = PathMatrix::zeros(rows, n + 1);
    let mut state = PathMatrix::zeros(rows, n + 1);
    for i in 0..rows {
        let x = traj.x_values.row(i);
        let rate = traj.rate_values.row(i);
        let eta = ensemble.eta_paths.row(i);
        let mut running = 0.0;
        let m_row = m.row_mut(i);
        for k in 0..=n {
            if k > 0 {
                let g0 = gamma[k - 1] * x[k - 1].abs().powf(p - 1.0);
                let g1 = gamma[k] * x[k].abs().powf(p - 1.0);
                running += 0.5 * grid.step(k - 1) * (g0 + g1);
            }
            m_row[k] = p * eta[k] * rate[k].abs().powf(p - 1.0) + p * running;
        }
        for (slot, e) in state.row_mut(i).iter_mut().zip(eta) {
            *slot = if *e > 0.0 { e.ln() } else { 0.0 };
        }
    }
    let flatness_stats = flatness_statistics(&m, &state, grid, checkpoints)?;
    let pass = flatness_stats
        .iter()
        .all(|s| s.is_finite() && *s < DIAGNOSTIC_THRESHOLD);
    Ok(MartingaleDiagnostic {
        checkpoints: checkpoints.to_vec(),
        flatness_stats,
        threshold: DIAGNOSTIC_THRESHOLD,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::ClosedFormY;
    use crate::control::{candidate_control, integrate_control, CandidateKind, YSource};
    use crate::model::{sample_paths, ImpactModel};

    fn pq(p: f64) -> PowerPair {
        PowerPair::new(p).unwrap()
    }

    #[test]
    fn deterministic_optimum_is_flat() {
        let grid = TimeGrid::clustered(1.0, 2000, 2.0).unwrap();
        let sqrt = ImpactModel::PowerSingular { beta: 0.5 };
        let ens = sample_paths(&sqrt, &RiskModel::Zero, &grid, 0, 1).unwrap();
        let closed = ClosedFormY::for_model(&sqrt, pq(2.0), 1.0).unwrap();
        let traj = integrate_control(YSource::Closed(&closed), &ens, &pq(2.0), 1.0).unwrap();
        let d = maximum_principle_diag(&traj, &ens, &RiskModel::Zero, &pq(2.0), &[0.25, 0.5, 0.75]).unwrap();
        assert!(d.pass, "{d:?}");
    }

    #[test]
    fn separates_optimal_from_suboptimal() {
        let grid = TimeGrid::uniform(1.0, 200).unwrap();
        let lin = candidate_control(&CandidateKind::Linear, &grid, 1.0).unwrap();
        let martingale = ImpactModel::Gbm {
            eta0: 1.0,
            mu: 0.0,
            sigma: 0.5,
        };
        let ens = sample_paths(&martingale, &RiskModel::Zero, &grid, 9, 10_000).unwrap();
        let d = maximum_principle_diag(&lin, &ens, &RiskModel::Zero, &pq(2.0), &[0.25, 0.5]).unwrap();
        assert!(d.pass, "{d:?}");
        let drifted = ImpactModel::Gbm {
            eta0: 1.0,
            mu: 1.0,
            sigma: 0.5,
        };
        let ens = sample_paths(&drifted, &RiskModel::Zero, &grid, 9, 10_000).unwrap();
        let d = maximum_principle_diag(&lin, &ens, &RiskModel::Zero, &pq(2.0), &[0.25, 0.5]).unwrap();
        assert!(d.max_stat() > 8.0, "{d:?}");
    }

    #[test]
    fn checkpoints_are_validated() {
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let one = ImpactModel::Constant { eta0: 1.0 };
        let ens = sample_paths(&one, &RiskModel::Zero, &grid, 0, 1).unwrap();
        let lin = candidate_control(&CandidateKind::Linear, &grid, 1.0).unwrap();
        for bad in [0.0, 1.0, -0.1] {
            assert!(maximum_principle_diag(&lin, &ens, &RiskModel::Zero, &pq(2.0), &[bad]).is_err());
        }
    }
}
