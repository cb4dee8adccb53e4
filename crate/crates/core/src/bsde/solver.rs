use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::floored_inverse_power_integral;
use super::{implicit_step, power_flow, PenalizedParams, StepScheme, Terminal, YField};
use crate::error::{Error, Result};
use crate::model::{validate_integrability, ImpactModel, PathEnsemble, PathMatrix, PowerPair, RiskModel, TimeGrid};
use crate::regression::{fit_least_squares, fit_on_basis, PolyBasis};

/// `∫_{t_k}^{t_{k+1}} (η∨δ)^{-(q-1)} ds` for every interval of a deterministic model.
fn deterministic_step_integrals(impact: &ImpactModel, grid: &TimeGrid, r: f64, delta: f64) -> Result<Vec<f64>> {
    let nodes = grid.nodes();
    (0..grid.intervals())
        .map(|k| {
            let (a, b) = (nodes[k], nodes[k + 1]);
            if delta > 0.0 {
                floored_inverse_power_integral(impact, (a, b), grid.horizon(), r, (a, f64::NAN), delta)
            } else {
                impact.deterministic_inverse_power_integral(a, b, grid.horizon(), r)
            }
        })
        .collect()
}

fn clamp_count(y: f64, cap: f64) -> (f64, usize) {
    if y < 0.0 {
        (0.0, 1)
    } else if y > cap {
        (cap, 1)
    } else {
        (y, 0)
    }
}

/// Penalised solution for deterministic `η` and `γ` (then `Z ≡ 0`).
pub fn solve_penalized_deterministic(
    impact: &ImpactModel,
    risk: &RiskModel,
    pq: &PowerPair,
    grid: &TimeGrid,
    params: &PenalizedParams,
) -> Result<YField> {
    params.validate()?;
    if !impact.is_deterministic() {
        return Err(Error::UnsupportedModel(format!(
            "{} impact is stochastic; use the Monte Carlo solver",
            impact.family()
        )));
    }
    validate_integrability(impact, risk, pq, grid.horizon()).into_result()?;
    let n = grid.intervals();
    let horizon = grid.horizon();
    let nodes = grid.nodes();
    let l = params.level;
    let cap = (1.0 + horizon) * l;
    let r = pq.rate_exponent();
    let source: Vec<f64> = nodes.iter().map(|&t| risk.value(t).min(l)).collect();
    let integrals = match params.scheme {
        StepScheme::ExactFlow => deterministic_step_integrals(impact, grid, r, params.delta_floor)?,
        StepScheme::BackwardEuler => Vec::new(),
    };
    let mut y = vec![0.0; n + 1];
    y[n] = l;
    let mut clamped = 0;
    for k in (0..n).rev() {
        let h = grid.step(k);
        let next = match params.scheme {
            StepScheme::ExactFlow => {
                let half = y[k + 1] + 0.5 * h * source[k + 1];
                power_flow(half, integrals[k], pq) + 0.5 * h * source[k]
            }
            StepScheme::BackwardEuler => {
                let eta = impact
                    .deterministic_value(nodes[k], horizon)
                    .expect("deterministic family");
                let eta = params.floored(eta)?;
                implicit_step(y[k + 1] + h * source[k], h, eta, pq, params.implicit_solver_tol, k)?
            }
        };
        if !next.is_finite() {
            return Err(Error::Numerical {
                node: k,
                message: format!("non-finite Y = {next}"),
            });
        }
        let (v, c) = clamp_count(next, cap);
        y[k] = v;
        clamped += c;
    }
    Ok(YField {
        grid: grid.clone(),
        values: PathMatrix::shared(y),
        z: None,
        terminal: Terminal::Penalty(l),
        basis: "none (deterministic coefficients)".into(),
        clamped,
        y0_std_error: 0.0,
    })
}

fn check_ensemble(ensemble: &PathEnsemble) -> Result<()> {
    let n = ensemble.grid.intervals();
    let eta = &ensemble.eta_paths;
    let rows_ok = |m: &PathMatrix| m.rows() == 1 || m.rows() == ensemble.n_paths;
    if eta.cols() != n + 1 || !rows_ok(eta) || !rows_ok(&ensemble.gamma_paths) {
        return Err(Error::Argument(format!(
            "ensemble arrays do not match its grid of {n} intervals and {} paths",
            ensemble.n_paths
        )));
    }
    if ensemble.brownian_increments.cols() != n {
        return Err(Error::Argument("Brownian increments do not match the grid".into()));
    }
    Ok(())
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Penalised solution by regression Monte Carlo on a sampled ensemble.
///
/// The continuation value `E[Y_{k+1} + ½h γ∧L | η_k]` is projected on
/// monomials in standardised `log η_k`; the step integral of `η^{-(q-1)}` is
/// its conditional expectation given `η_k` (closed form), or `h (η_k∨δ)^{-(q-1)}`
/// when a floor `δ > 0` is set. Values are clamped into `[0, (1+T)L]`.
pub fn solve_penalized_mc(
    impact: &ImpactModel,
    risk: &RiskModel,
    pq: &PowerPair,
    ensemble: &PathEnsemble,
    params: &PenalizedParams,
    basis_degree: usize,
) -> Result<YField> {
    params.validate()?;
    check_ensemble(ensemble)?;
    if matches!(impact, ImpactModel::BrownianSquare) {
        return Err(Error::UnsupportedModel(
            "regression solver needs a Markovian impact with closed-form conditional moments".into(),
        ));
    }
    let grid = &ensemble.grid;
    validate_integrability(impact, risk, pq, grid.horizon()).into_result()?;
    let n_paths = ensemble.n_paths;
    let n = grid.intervals();
    let horizon = grid.horizon();
    let nodes = grid.nodes();
    let l = params.level;
    let cap = (1.0 + horizon) * l;
    let r = pq.rate_exponent();
    let source: Vec<f64> = nodes.iter().map(|&t| risk.value(t).min(l)).collect();

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    columns[n] = vec![l; n_paths];
    let mut clamped = 0usize;
    let mut y0_std_error = 0.0;
    let mut basis_used = String::new();
    for k in (0..n).rev() {
        let h = grid.step(k);
        let (a, b) = (nodes[k], nodes[k + 1]);
        let eta: Vec<f64> = ensemble.eta_paths.column(k, n_paths);
        if let Some(bad) = eta.iter().find(|&&e| !(e > 0.0)) {
            if params.delta_floor == 0.0 {
                return Err(Error::Positivity(format!("sampled η = {bad} at node {k}")));
            }
        }
        let states: Vec<f64> = eta.iter().map(|e| e.max(params.delta_floor).ln()).collect();
        let shift = match params.scheme {
            StepScheme::ExactFlow => 0.5 * h * source[k + 1],
            StepScheme::BackwardEuler => h * source[k],
        };
        let targets: Vec<f64> = columns[k + 1].iter().map(|y| y + shift).collect();
        let fit = fit_least_squares(&states, &targets, basis_degree)?;
        if k == n - 1 {
            basis_used = format!("regression on log η: {}", fit.basis.describe());
        }
        let step = |c: f64, eta_k: f64| -> Result<f64> {
            let c = c.max(0.0);
            match params.scheme {
                StepScheme::ExactFlow => {
                    let integral = if params.delta_floor > 0.0 {
                        h * eta_k.max(params.delta_floor).powf(-r)
                    } else {
                        impact.conditional_inverse_power_integral(a, b, horizon, r, a, eta_k)?
                    };
                    Ok(power_flow(c, integral, pq) + 0.5 * h * source[k])
                }
                StepScheme::BackwardEuler => {
                    let e = params.floored(eta_k)?;
                    implicit_step(c, h, e, pq, params.implicit_solver_tol, k)
                }
            }
        };
        let results: Vec<Result<(f64, usize)>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let y = step(fit.predict(states[i]), eta[i])?;
                if !y.is_finite() {
                    return Err(Error::Numerical {
                        node: k,
                        message: format!("non-finite Y on path {i}"),
                    });
                }
                Ok(clamp_count(y, cap))
            })
            .collect();
        let mut column = Vec::with_capacity(n_paths);
        for res in results {
            let (v, c) = res?;
            column.push(v);
            clamped += c;
        }
        if k == 0 {
            // delta method through the last scalar step
            let c0 = fit.predict(states[0]).max(0.0);
            let eps = 1e-6 * c0.max(1e-12);
            let slope =
                (step(c0 + eps, eta[0])? - step((c0 - eps).max(0.0), eta[0])?) / (c0 + eps - (c0 - eps).max(0.0));
            y0_std_error = slope.abs() * sample_sd(&targets) / (n_paths as f64).sqrt();
        }
        columns[k] = column;
    }
    let mut values = PathMatrix::zeros(n_paths, n + 1);
    values
        .data_mut()
        .par_chunks_mut(n + 1)
        .enumerate()
        .for_each(|(i, row)| {
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = columns[k][i];
            }
        });
    Ok(YField {
        grid: grid.clone(),
        values,
        z: None,
        terminal: Terminal::Penalty(l),
        basis: basis_used,
        clamped,
        y0_std_error,
    })
}

/// Estimates `Z` on each interval by projecting `(Y_{k+1} - E[Y_{k+1}|η_k]) ΔW_k / h`
/// on the same polynomial basis in `log η_k`.
///
/// Deterministic fields get `Z ≡ 0`. For a singular-limit field the last
/// interval has no terminal value and repeats the estimate of the one before.
pub fn estimate_z(field: &YField, ensemble: &PathEnsemble, basis_degree: usize) -> Result<YField> {
    check_ensemble(ensemble)?;
    let n = field.grid.intervals();
    if ensemble.grid.intervals() != n {
        return Err(Error::Argument("field and ensemble grids differ".into()));
    }
    let mut out = field.clone();
    if field.is_deterministic() {
        out.z = Some(PathMatrix::shared(vec![0.0; n]));
        return Ok(out);
    }
    let n_paths = field.n_paths();
    if ensemble.n_paths != n_paths {
        return Err(Error::Argument(format!(
            "field has {n_paths} paths, ensemble {}",
            ensemble.n_paths
        )));
    }
    let last = field.defined_nodes() - 1;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n.min(last) {
        let h = field.grid.step(k);
        let states: Vec<f64> = ensemble.eta_paths.column(k, n_paths).iter().map(|e| e.ln()).collect();
        let next = field.values.column(k + 1, n_paths);
        let basis = PolyBasis::standardized(&states, basis_degree);
        let fit = fit_on_basis(basis.clone(), &states, &next)?;
        let weighted: Vec<f64> = (0..n_paths)
            .map(|i| (next[i] - fit.predict(states[i])) * ensemble.brownian_increments.get(i, k) / h)
            .collect();
        let zfit = fit_on_basis(basis, &states, &weighted)?;
        columns.push(states.iter().map(|&s| zfit.predict(s)).collect());
    }
    while columns.len() < n {
        let copy = columns.last().cloned().unwrap_or_else(|| vec![0.0; n_paths]);
        columns.push(copy);
    }
    let mut z = PathMatrix::zeros(n_paths, n);
    for (k, column) in columns.iter().enumerate() {
        for (i, &v) in column.iter().enumerate() {
            z.row_mut(i)[k] = v;
        }
    }
    out.z = Some(z);
    Ok(out)
}

/// Increasing penalty levels and the stopping tolerance on `Y_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LSchedule {
    levels: Vec<f64>,
    stop_tol: f64,
}

impl LSchedule {
    pub fn new(levels: Vec<f64>, stop_tol: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Argument("empty penalty schedule".into()));
        }
        if levels.iter().any(|&l| !(l > 0.0) || !l.is_finite()) || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(format!(
                "penalty levels must be positive and strictly increasing: {levels:?}"
            )));
        }
        if !(stop_tol > 0.0) {
            return Err(Error::Argument(format!("stop tolerance {stop_tol} must be positive")));
        }
        Ok(Self { levels, stop_tol })
    }

    /// `10^from, …, 10^to`.
    pub fn decades(from: i32, to: i32, stop_tol: f64) -> Result<Self> {
        Self::new((from..=to).map(|e| 10f64.powi(e)).collect(), stop_tol)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn stop_tol(&self) -> f64 {
        self.stop_tol
    }
}

/// Which penalised solver to run at each level.
#[derive(Debug, Clone, Copy)]
pub enum SolverSelector<'a> {
    Deterministic {
        grid: &'a TimeGrid,
        params: PenalizedParams,
    },
    MonteCarlo {
        ensemble: &'a PathEnsemble,
        params: PenalizedParams,
        basis_degree: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: f64,
    pub y0: f64,
    pub y0_std_error: f64,
}

#[derive(Debug, Clone)]
pub struct LimitResult {
    /// The field at the last level solved, marked singular at `T`.
    pub field: YField,
    pub trace: Vec<LevelRecord>,
    /// Whether successive `Y_0` came within the stopping tolerance.
    pub converged: bool,
}

/// Paired standard error of the nodewise difference of two fields at node `k`.
///
/// Node 0 carries no cross-path spread (every path starts from the same
/// state), so the spread one node later stands in for it.
pub(crate) fn paired_se(a: &YField, b: &YField, k: usize) -> f64 {
    let n = a.n_paths().max(b.n_paths());
    let diff = |k: usize| -> Vec<f64> { (0..n).map(|i| b.values.get(i, k) - a.values.get(i, k)).collect() };
    let last = a.grid.intervals();
    let sd = sample_sd(&diff(k)).max(if k < last { sample_sd(&diff(k + 1)) } else { 0.0 });
    sd / (n as f64).sqrt()
}

/// Solves at each level of `schedule`, checks monotonicity in `L` and stops
/// once successive `Y_0` agree to the schedule's tolerance.
pub fn l_schedule_limit(
    impact: &ImpactModel,
    risk: &RiskModel,
    pq: &PowerPair,
    schedule: &LSchedule,
    solver: SolverSelector<'_>,
) -> Result<LimitResult> {
    let mut trace: Vec<LevelRecord> = Vec::new();
    let mut previous: Option<YField> = None;
    let mut converged = false;
    for &level in schedule.levels() {
        let field = match solver {
            SolverSelector::Deterministic { grid, params } => {
                let params = PenalizedParams { level, ..params };
                solve_penalized_deterministic(impact, risk, pq, grid, &params)?
            }
            SolverSelector::MonteCarlo {
                ensemble,
                params,
                basis_degree,
            } => {
                let params = PenalizedParams { level, ..params };
                solve_penalized_mc(impact, risk, pq, ensemble, &params, basis_degree)?
            }
        };
        let y0 = field.y0();
        if let Some(prev) = &previous {
            let prev_y0 = prev.y0();
            let slack = if field.is_deterministic() {
                1e-12 * prev_y0.abs().max(1.0)
            } else {
                3.0 * paired_se(prev, &field, 0)
            };
            if y0 < prev_y0 - slack {
                return Err(Error::SolverInconsistency(format!(
                    "Y_0 decreased from {prev_y0} at L = {} to {y0} at L = {level}",
                    trace.last().map(|r: &LevelRecord| r.level).unwrap_or(f64::NAN)
                )));
            }
        }
        trace.push(LevelRecord {
            level,
            y0,
            y0_std_error: field.y0_std_error,
        });
        let done = previous
            .as_ref()
            .is_some_and(|p| (y0 - p.y0()).abs() < schedule.stop_tol());
        previous = Some(field);
        if done {
            converged = true;
            break;
        }
    }
    let mut field = previous.expect("schedule is non-empty");
    let n = field.grid.intervals();
    for i in 0..field.values.rows() {
        field.values.row_mut(i)[n] = f64::INFINITY;
    }
    field.terminal = Terminal::Singular;
    Ok(LimitResult {
        field,
        trace,
        converged,
    })
}
