//! Command-line front end: configuration handling, the five subcommands and
//! their CSV and JSON artifacts.

mod config;
mod output;

pub use config::{CommandOptions, RunConfig, DEFAULT_MODEL};
pub use output::{format_real, CsvWriter};

use std::fs;
use std::path::PathBuf;

use serde_json::{json, Value};

use crate::bsde::{estimate_z, l_schedule_limit, LimitResult, PenalizedParams, SolverSelector};
use crate::closed_form::ClosedFormY;
use crate::control::{
    candidate_control, cost, integrate_control, maximum_principle_diag, optimality_tournament, ControlTrajectory,
    YSource,
};
use crate::error::{Error, Result};
use crate::model::{sample_paths, validate_integrability, ImpactModel, PathEnsemble, PowerPair, RiskModel, TimeGrid};
use crate::verify::{counterexample_sweep, run_full_suite};

/// Exit status of a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit status when a verification check fails.
pub const EXIT_VERIFY_FAILED: i32 = 1;

struct Prepared {
    config: RunConfig,
    pq: PowerPair,
    grid: TimeGrid,
    out: PathBuf,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let resolved = config.resolved()?;
    let (pq, grid) = resolved.model.build()?;
    let out = resolved.out_dir();
    fs::create_dir_all(&out)?;
    Ok(Prepared {
        config: resolved,
        pq,
        grid,
        out,
    })
}

fn ensemble(prep: &Prepared) -> Result<PathEnsemble> {
    let m = &prep.config.model;
    let paths = if m.impact.is_deterministic() { 1 } else { m.paths() };
    sample_paths(&m.impact, &m.risk, &prep.grid, m.seed(), paths)
}

fn solve_limit(prep: &Prepared, ensemble: &PathEnsemble) -> Result<LimitResult> {
    let m = &prep.config.model;
    validate_integrability(&m.impact, &m.risk, &prep.pq, prep.grid.horizon()).into_result()?;
    let schedule = prep.config.schedule()?;
    let params = PenalizedParams::new(schedule.levels()[0])?.with_delta_floor(prep.config.delta_floor())?;
    let solver = if m.impact.is_deterministic() {
        SolverSelector::Deterministic {
            grid: &prep.grid,
            params,
        }
    } else {
        SolverSelector::MonteCarlo {
            ensemble,
            params,
            basis_degree: prep.config.basis_degree(),
        }
    };
    let mut result = l_schedule_limit(&m.impact, &m.risk, &prep.pq, &schedule, solver)?;
    result.field = estimate_z(&result.field, ensemble, prep.config.basis_degree())?;
    Ok(result)
}

/// Optimal trajectory: from the closed form when one applies (no risk
/// aversion), otherwise from the solved field.
fn optimal_trajectory(prep: &Prepared, ensemble: &PathEnsemble) -> Result<ControlTrajectory> {
    let m = &prep.config.model;
    let xi = prep.config.xi();
    if matches!(m.risk, RiskModel::Zero) {
        validate_integrability(&m.impact, &m.risk, &prep.pq, prep.grid.horizon()).into_result()?;
        if let Ok(closed) = ClosedFormY::for_model(&m.impact, prep.pq, m.horizon) {
            return integrate_control(YSource::Closed(&closed), ensemble, &prep.pq, xi);
        }
    }
    let limit = solve_limit(prep, ensemble)?;
    integrate_control(YSource::Field(&limit.field), ensemble, &prep.pq, xi)
}

fn config_json(prep: &Prepared) -> Value {
    prep.config.to_json_value()
}

fn write_json(prep: &Prepared, name: &str, value: &Value) -> Result<PathBuf> {
    let path = prep.out.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(path)
}

fn optional(v: Option<f64>) -> Option<f64> {
    v.filter(|x| x.is_finite())
}

/// Solves the `L`-schedule and writes `yfield.csv` and `convergence.json`.
pub fn cmd_solve(config: &RunConfig) -> Result<i32> {
    let prep = prepare(config)?;
    let ens = ensemble(&prep)?;
    let limit = solve_limit(&prep, &ens)?;
    let field = &limit.field;
    let mut csv = CsvWriter::new(&config_json(&prep), &["t", "y_mean", "y_p05", "y_p95", "z_mean"]);
    let deterministic = field.is_deterministic();
    for (k, &t) in prep.grid.nodes().iter().enumerate() {
        let defined = k < field.defined_nodes();
        let mean = defined.then(|| field.mean(k));
        let (lo, hi) = if defined && !deterministic {
            (Some(field.quantile(k, 0.05)), Some(field.quantile(k, 0.95)))
        } else {
            (None, None)
        };
        let z = if k < prep.grid.intervals() {
            field.z_mean(k)
        } else {
            None
        };
        csv.row(&[Some(t), optional(mean), optional(lo), optional(hi), optional(z)]);
    }
    csv.write(&prep.out.join("yfield.csv"))?;
    write_json(
        &prep,
        "convergence.json",
        &json!({
            "config": config_json(&prep),
            "trace": limit.trace,
            "converged": limit.converged,
            "y0": field.y0(),
            "y0_std_error": field.y0_std_error,
            "clamped": field.clamped,
        }),
    )?;
    Ok(EXIT_OK)
}

/// Integrates the optimal control and writes `trajectory.csv`.
pub fn cmd_simulate(config: &RunConfig) -> Result<i32> {
    let prep = prepare(config)?;
    let ens = ensemble(&prep)?;
    let traj = optimal_trajectory(&prep, &ens)?;
    let mut csv = CsvWriter::new(&config_json(&prep), &["t", "x_mean", "x_p05", "x_p95", "rate_mean"]);
    let shared = traj.is_deterministic();
    for (k, &t) in prep.grid.nodes().iter().enumerate() {
        let (lo, hi) = if shared {
            (None, None)
        } else {
            (Some(traj.quantile_x(k, 0.05)), Some(traj.quantile_x(k, 0.95)))
        };
        csv.row(&[Some(t), Some(traj.mean_x(k)), lo, hi, optional(Some(traj.mean_rate(k)))]);
    }
    csv.write(&prep.out.join("trajectory.csv"))?;
    Ok(EXIT_OK)
}

/// Prices the optimal control, the configured candidates and the
/// maximum-principle diagnostic; writes `cost.json`.
pub fn cmd_cost(config: &RunConfig) -> Result<i32> {
    let prep = prepare(config)?;
    let m = &prep.config.model;
    let ens = ensemble(&prep)?;
    let traj = optimal_trajectory(&prep, &ens)?;
    let report = cost(&traj, &ens, &m.risk, &prep.pq)?;
    let mut value = serde_json::to_value(&report)?;
    let extra = if prep.config.xi() != 0.0 {
        let candidates = prep
            .config
            .candidates()
            .iter()
            .map(|kind| Ok((kind.label(), candidate_control(kind, &prep.grid, prep.config.xi())?)))
            .collect::<Result<Vec<_>>>()?;
        let tournament = optimality_tournament(&ens, &m.risk, &prep.pq, &traj, &candidates)?;
        let diagnostic = maximum_principle_diag(&traj, &ens, &m.risk, &prep.pq, &prep.config.checkpoints())?;
        json!({"tournament": tournament, "diagnostic": diagnostic})
    } else {
        json!({})
    };
    if let (Value::Object(map), Value::Object(more)) = (&mut value, extra) {
        map.extend(more);
        map.insert("config".into(), config_json(&prep));
    }
    write_json(&prep, "cost.json", &value)?;
    Ok(EXIT_OK)
}

/// Runs the acceptance criteria and the model checks; writes `report.json`.
pub fn cmd_verify(config: &RunConfig) -> Result<i32> {
    let prep = prepare(config)?;
    let bundle = run_full_suite(&prep.config.model);
    for report in &bundle.reports {
        println!(
            "[{}] {} ({:.2} s)",
            if report.pass { "PASS" } else { "FAIL" },
            report.suite,
            report.seconds
        );
        for check in report.failures() {
            println!(
                "    failed: {} (expected {}, observed {}, tol {})",
                check.name, check.expected, check.observed, check.tol
            );
        }
    }
    let mut value = serde_json::to_value(&bundle)?;
    if let Value::Object(map) = &mut value {
        map.insert("config".into(), config_json(&prep));
    }
    write_json(&prep, "report.json", &value)?;
    Ok(if bundle.pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

/// Prices the counterexample family `x^α` and writes `sweep.csv`.
pub fn cmd_sweep(config: &RunConfig) -> Result<i32> {
    let prep = prepare(config)?;
    let beta = match (prep.config.options.beta, &prep.config.model.impact) {
        (Some(beta), _) => beta,
        (None, ImpactModel::PowerSingular { beta }) => *beta,
        (None, _) => {
            return Err(Error::Config(
                "sweep needs \"beta\" or a power_singular impact model".into(),
            ))
        }
    };
    let outcome = counterexample_sweep(beta, &prep.config.alphas(), prep.grid.intervals())?;
    let mut csv = CsvWriter::new(&config_json(&prep), &["alpha", "beta", "cost", "formula"]);
    for row in &outcome.rows {
        csv.row(&[Some(row.alpha), Some(row.beta), Some(row.cost), Some(row.formula)]);
    }
    csv.write(&prep.out.join("sweep.csv"))?;
    Ok(if outcome.report.pass {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}
