use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_pairing_rows, ControlTrajectory};
use crate::error::{Error, Result};
use crate::model::{PathEnsemble, PowerPair, RiskModel, TimeGrid};

/// Quadrature of the running cost over each grid interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostQuadrature {
    /// Fits `A (T-t)^b` through both endpoints and integrates it exactly;
    /// falls back to the trapezoid where an endpoint vanishes.
    #[default]
    PowerLaw,
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub trading: f64,
    pub risk: f64,
    pub terminal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub ci95: [f64; 2],
    pub terms: CostTerms,
    /// Total cost per path, kept for paired comparisons.
    #[serde(skip)]
    pub per_path: Vec<f64>,
}

const Z95: f64 = 1.959964;

/// `∫` over one interval of a function with endpoint values `f0`, `f1` at
/// times-to-go `tau0 > tau1`.
fn interval_integral(f0: f64, f1: f64, tau0: f64, tau1: f64, quadrature: CostQuadrature) -> f64 {
    let h = tau0 - tau1;
    if quadrature == CostQuadrature::Trapezoid || !(f0 > 0.0 && f1 > 0.0 && tau1 > 0.0) {
        return 0.5 * h * (f0 + f1);
    }
    let log_ratio = (tau0 / tau1).ln();
    let b = (f0 / f1).ln() / log_ratio;
    let e = b + 1.0;
    if (e * log_ratio).abs() < 1e-8 {
        // f τ is nearly constant
        let g = 0.5 * (f0 * tau0 + f1 * tau1);
        g * log_ratio * (1.0 + 0.5 * e * log_ratio)
    } else {
        (f0 * tau0 - f1 * tau1) / e
    }
}

/// Integral of a nodal running cost along one path.
///
/// With `tail` set, the node at `T` carries no usable value: the last interval
/// continues the power law of the one before it when that is integrable, and
/// otherwise uses the trapezoid with the penultimate value.
fn path_integral(f: &[f64], grid: &TimeGrid, tail: bool, quadrature: CostQuadrature) -> f64 {
    let n = grid.intervals();
    let full = if tail { n - 1 } else { n };
    let mut total = 0.0;
    for k in 0..full {
        total += interval_integral(f[k], f[k + 1], grid.time_to_go(k), grid.time_to_go(k + 1), quadrature);
    }
    if tail {
        let h = grid.step(n - 1);
        let fallback = h * f[n - 1];
        let extrapolated = if quadrature == CostQuadrature::PowerLaw && n >= 2 && f[n - 2] > 0.0 && f[n - 1] > 0.0 {
            let (t0, t1) = (grid.time_to_go(n - 2), grid.time_to_go(n - 1));
            let b = (f[n - 2] / f[n - 1]).ln() / (t0 / t1).ln();
            (b > -1.0).then(|| f[n - 1] * t1 / (b + 1.0))
        } else {
            None
        };
        total += extrapolated.unwrap_or(fallback);
    }
    total
}

fn summarize(per_path: Vec<[f64; 3]>) -> CostReport {
    let n = per_path.len();
    let nf = n as f64;
    let totals: Vec<f64> = per_path.iter().map(|t| t[0] + t[1] + t[2]).collect();
    let term = |j: usize| per_path.iter().map(|t| t[j]).sum::<f64>() / nf;
    let terms = CostTerms {
        trading: term(0),
        risk: term(1),
        terminal: term(2),
    };
    let estimate = terms.trading + terms.risk + terms.terminal;
    let std_error = if n > 1 {
        let m = totals.iter().sum::<f64>() / nf;
        (totals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (nf - 1.0)).sqrt() / nf.sqrt()
    } else {
        0.0
    };
    CostReport {
        estimate,
        std_error,
        n_paths: n,
        ci95: [estimate - Z95 * std_error, estimate + Z95 * std_error],
        terms,
        per_path: totals,
    }
}

fn evaluate(
    traj: &ControlTrajectory,
    ensemble: &PathEnsemble,
    risk: &RiskModel,
    pq: &PowerPair,
    level: Option<f64>,
    quadrature: CostQuadrature,
) -> Result<CostReport> {
    let rows = check_pairing_rows(traj, ensemble)?;
    let grid = &traj.grid;
    let n = grid.intervals();
    let p = pq.p();
    if level.is_none() {
        let scale = traj.initial_position.abs();
        if (0..traj.x_values.rows()).any(|i| traj.x_values.get(i, n).abs() > 1e-9 * scale) {
            return Err(Error::Precondition(
                "trajectory does not liquidate by T; price it with a penalty level".into(),
            ));
        }
    }
    let gamma: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&t| {
            let g = risk.value(t);
            level.map_or(g, |l| g.min(l))
        })
        .collect();
    let per_path: Vec<[f64; 3]> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let x = traj.x_values.row(i);
            let rate = traj.rate_values.row(i);
            let eta = ensemble.eta_paths.row(i);
            let trading: Vec<f64> = (0..=n)
                .map(|k| {
                    if rate[k] == 0.0 {
                        0.0
                    } else {
                        eta[k] * rate[k].abs().powf(p)
                    }
                })
                .collect();
            let running: Vec<f64> = (0..=n).map(|k| gamma[k] * x[k].abs().powf(p)).collect();
            let terminal = level.map_or(0.0, |l| if l == 0.0 { 0.0 } else { l * x[n].abs().powf(p) });
            [
                path_integral(&trading, grid, traj.forced_zero, quadrature),
                path_integral(&running, grid, false, quadrature),
                terminal,
            ]
        })
        .collect();
    Ok(summarize(per_path))
}

/// `E[∫_0^T (η|ẋ|^p + γ|x|^p) dt]` with the default quadrature.
pub fn cost(traj: &ControlTrajectory, ensemble: &PathEnsemble, risk: &RiskModel, pq: &PowerPair) -> Result<CostReport> {
    evaluate(traj, ensemble, risk, pq, None, CostQuadrature::PowerLaw)
}

/// Like [`cost`], or [`penalized_cost`] when `level` is given, with a chosen quadrature.
pub fn cost_with(
    traj: &ControlTrajectory,
    ensemble: &PathEnsemble,
    risk: &RiskModel,
    pq: &PowerPair,
    level: Option<f64>,
    quadrature: CostQuadrature,
) -> Result<CostReport> {
    if let Some(l) = level {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(Error::Argument(format!("penalty L = {l} must be >= 0")));
        }
    }
    evaluate(traj, ensemble, risk, pq, level, quadrature)
}

/// `E[∫_0^T (η|ẋ|^p + (γ∧L)|x|^p) dt + L|x_T|^p]`.
pub fn penalized_cost(
    traj: &ControlTrajectory,
    ensemble: &PathEnsemble,
    risk: &RiskModel,
    pq: &PowerPair,
    level: f64,
) -> Result<CostReport> {
    cost_with(traj, ensemble, risk, pq, Some(level), CostQuadrature::PowerLaw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub predicted: f64,
    pub observed: f64,
    pub gap: f64,
    /// `gap / max(3 SE, abs_tol)`; the identity holds when it is at most 1.
    pub normalized_gap: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compares a cost estimate with `Y_0 |ξ|^p`.
pub fn value_identity_check(pq: &PowerPair, xi: f64, y0: f64, report: &CostReport, abs_tol: f64) -> IdentityReport {
    let predicted = y0 * xi.abs().powf(pq.p());
    let gap = report.estimate - predicted;
    let tol = (3.0 * report.std_error).max(abs_tol);
    IdentityReport {
        predicted,
        observed: report.estimate,
        gap,
        normalized_gap: if tol > 0.0 { gap.abs() / tol } else { f64::INFINITY },
        tol,
        pass: gap.abs() <= tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGap {
    pub name: String,
    pub cost: f64,
    /// Mean of `J(candidate) - J(x*)` over common paths.
    pub gap: f64,
    pub std_error: f64,
    /// `gap >= -3 SE`.
    pub not_better: bool,
    /// `gap > 3 SE`.
    pub strictly_worse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentReport {
    pub optimal_cost: f64,
    pub optimal_std_error: f64,
    pub candidates: Vec<CandidateGap>,
    /// No candidate beats the optimal control beyond 3 paired SE.
    pub pass: bool,
}

/// Paired comparison of candidate controls against `optimal` on one ensemble.
pub fn optimality_tournament(
    ensemble: &PathEnsemble,
    risk: &RiskModel,
    pq: &PowerPair,
    optimal: &ControlTrajectory,
    candidates: &[(String, ControlTrajectory)],
) -> Result<TournamentReport> {
    let base = cost(optimal, ensemble, risk, pq)?;
    let mut gaps = Vec::with_capacity(candidates.len());
    for (name, traj) in candidates {
        let report = cost(traj, ensemble, risk, pq)?;
        let n = base.per_path.len().max(report.per_path.len());
        let pick = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
        let diffs: Vec<f64> = (0..n)
            .map(|i| pick(&report.per_path, i) - pick(&base.per_path, i))
            .collect();
        let nf = n as f64;
        let gap = diffs.iter().sum::<f64>() / nf;
        let std_error = if n > 1 {
            (diffs.iter().map(|d| (d - gap) * (d - gap)).sum::<f64>() / (nf - 1.0)).sqrt() / nf.sqrt()
        } else {
            0.0
        };
        gaps.push(CandidateGap {
            name: name.clone(),
            cost: report.estimate,
            gap,
            std_error,
            not_better: gap >= -3.0 * std_error - 1e-12 * base.estimate.abs(),
            strictly_worse: gap > 3.0 * std_error,
        });
    }
    Ok(TournamentReport {
        optimal_cost: base.estimate,
        optimal_std_error: base.std_error,
        pass: gaps.iter().all(|g| g.not_better),
        candidates: gaps,
    })
}
