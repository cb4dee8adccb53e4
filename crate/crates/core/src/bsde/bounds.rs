use serde::{Deserialize, Serialize};

use super::{PenalizedParams, Terminal, YField};
use crate::error::{Error, Result};
use crate::model::{ImpactModel, PathEnsemble, PowerPair, RiskModel};
use crate::quadrature::{integrate_with_breaks, DEFAULT_REL_TOL};

/// Break points for integrating `f(η_s ∨ δ)` over `[a, b]` for a deterministic family.
fn floor_breaks(impact: &ImpactModel, a: f64, b: f64, horizon: f64, delta: f64) -> Vec<f64> {
    let mut points = vec![a];
    match impact {
        ImpactModel::PowerSingular { beta } if *beta > 0.0 => {
            // the floor becomes active where (T - s)^β = δ
            let s = horizon - delta.powf(1.0 / beta);
            if s > a && s < b {
                points.push(s);
            }
        }
        ImpactModel::DeterministicTable { breakpoints, .. } => {
            points.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
        }
        _ => {}
    }
    points.push(b);
    points
}

fn floored_integral<F: Fn(f64) -> f64>(
    impact: &ImpactModel,
    a: f64,
    b: f64,
    horizon: f64,
    delta: f64,
    f: F,
) -> Result<f64> {
    if !impact.is_deterministic() {
        return Err(Error::UnsupportedModel(format!(
            "no closed-form conditional moments of the floored {} impact",
            impact.family()
        )));
    }
    if b <= a {
        return Ok(0.0);
    }
    integrate_with_breaks(
        |s| {
            let eta = impact.deterministic_value(s, horizon).unwrap_or(f64::NAN);
            f(eta.max(delta))
        },
        &floor_breaks(impact, a, b, horizon, delta),
        DEFAULT_REL_TOL,
    )
}

/// `E[∫_a^b (η_s∨δ)^{-r} ds | η_tc = eta_c]`.
pub(crate) fn floored_inverse_power_integral(
    impact: &ImpactModel,
    (a, b): (f64, f64),
    horizon: f64,
    r: f64,
    (tc, eta_c): (f64, f64),
    delta: f64,
) -> Result<f64> {
    if delta > 0.0 {
        floored_integral(impact, a, b, horizon, delta, |e| e.powf(-r))
    } else {
        impact.conditional_inverse_power_integral(a, b, horizon, r, tc, eta_c)
    }
}

/// `E[∫_t^T (η_s∨δ) ds | η_t]`.
fn floored_impact_integral(impact: &ImpactModel, horizon: f64, t: f64, eta_t: f64, delta: f64) -> Result<f64> {
    if delta > 0.0 {
        floored_integral(impact, t, horizon, horizon, delta, |e| e)
    } else {
        impact.conditional_impact_integral(t, horizon, horizon, t, eta_t)
    }
}

fn check_time(t: f64, horizon: f64, closed: bool) -> Result<()> {
    let ok = if closed { t <= horizon } else { t < horizon };
    if t >= 0.0 && ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("t = {t} outside the horizon {horizon}")))
    }
}

/// `1 / (L^{-(q-1)} + E[∫_t^T (η∨δ)^{-(q-1)} ds | η_t])^{p-1}`.
pub fn lower_bound_penalized(
    impact: &ImpactModel,
    pq: &PowerPair,
    params: &PenalizedParams,
    horizon: f64,
    t: f64,
    eta_t: f64,
) -> Result<f64> {
    check_time(t, horizon, true)?;
    if params.level == 0.0 {
        return Ok(0.0);
    }
    let r = pq.rate_exponent();
    let integral = floored_inverse_power_integral(impact, (t, horizon), horizon, r, (t, eta_t), params.delta_floor)?;
    Ok((params.level.powf(-r) + integral).powf(-pq.value_exponent()))
}

/// `(1+T)L ∧ (T-t)^{-p} E[∫_t^T ((η_s∨δ) + (T-s)^p γ_s) ds | η_t]`.
pub fn upper_bound_penalized(
    impact: &ImpactModel,
    risk: &RiskModel,
    pq: &PowerPair,
    params: &PenalizedParams,
    horizon: f64,
    t: f64,
    eta_t: f64,
) -> Result<f64> {
    check_time(t, horizon, true)?;
    let cap = (1.0 + horizon) * params.level;
    let tau = horizon - t;
    if tau <= 0.0 {
        return Ok(cap);
    }
    let total = floored_impact_integral(impact, horizon, t, eta_t, params.delta_floor)?
        + risk.weighted_integral(t, horizon, horizon, pq.p())?;
    Ok(cap.min(total / tau.powf(pq.p())))
}

/// `1 / E[∫_t^T η_s^{-(q-1)} ds | η_t]^{p-1}`, valid for the singular limit at `t < T`.
pub fn lower_bound_singular(impact: &ImpactModel, pq: &PowerPair, horizon: f64, t: f64, eta_t: f64) -> Result<f64> {
    check_time(t, horizon, false)?;
    let r = pq.rate_exponent();
    let integral = impact.conditional_inverse_power_integral(t, horizon, horizon, r, t, eta_t)?;
    Ok(integral.powf(-pq.value_exponent()))
}

/// `(T-t)^{-p} E[∫_t^T (η_s + (T-s)^p γ_s) ds | η_t]` at `t < T`.
pub fn upper_bound_singular(
    impact: &ImpactModel,
    risk: &RiskModel,
    pq: &PowerPair,
    horizon: f64,
    t: f64,
    eta_t: f64,
) -> Result<f64> {
    check_time(t, horizon, false)?;
    let total = impact.conditional_impact_integral(t, horizon, horizon, t, eta_t)?
        + risk.weighted_integral(t, horizon, horizon, pq.p())?;
    Ok(total / (horizon - t).powf(pq.p()))
}

/// Bounds and slack at one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeBounds {
    pub t: f64,
    pub y_mean: f64,
    pub lower_mean: f64,
    pub upper_mean: f64,
    /// Mean of `Y - lower` over paths.
    pub lower_slack: f64,
    /// Mean of `upper - Y` over paths.
    pub upper_slack: f64,
    /// Standard error used for the tolerance (0 for deterministic fields).
    pub std_error: f64,
    /// Paths with `Y < lower` or `Y > upper` beyond rounding.
    pub lower_violations: usize,
    pub upper_violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub nodes: Vec<NodeBounds>,
    pub pass: bool,
}

impl SandwichReport {
    pub fn failures(&self) -> impl Iterator<Item = &NodeBounds> {
        self.nodes.iter().filter(|n| !n.pass)
    }
}

/// Relative slack allowed for deterministic fields (quadrature and rounding).
const DETERMINISTIC_TOL: f64 = 1e-8;

/// Checks `lower ≤ Y ≤ upper` node by node.
///
/// Penalised fields use the level-`L` bounds on every node; singular-limit
/// fields use the limit bounds on nodes `t ≤ 0.99 T`. Deterministic fields
/// must satisfy the bounds up to a relative `1e-8`; Monte Carlo fields must
/// have mean slack above `-3` standard errors. `states` supplies the sampled
/// impact paths of a Monte Carlo field.
pub fn bounds_sandwich_check(
    field: &YField,
    states: Option<&PathEnsemble>,
    impact: &ImpactModel,
    risk: &RiskModel,
    pq: &PowerPair,
    params: &PenalizedParams,
) -> Result<SandwichReport> {
    let horizon = field.grid.horizon();
    let n_paths = field.n_paths();
    let deterministic = field.is_deterministic();
    if !deterministic {
        match states {
            Some(e) if e.n_paths == n_paths && e.eta_paths.cols() == field.grid.intervals() + 1 => {}
            _ => {
                return Err(Error::Argument(
                    "a Monte Carlo field needs the ensemble it was solved on".into(),
                ))
            }
        }
    }
    let params = match field.terminal {
        Terminal::Penalty(level) => PenalizedParams { level, ..*params },
        Terminal::Singular => *params,
    };
    let mut nodes = Vec::new();
    for (k, &t) in field.grid.nodes().iter().enumerate() {
        let singular = field.terminal == Terminal::Singular;
        if singular && t > 0.99 * horizon {
            break;
        }
        let mut lower_sum = 0.0;
        let mut upper_sum = 0.0;
        let mut y_sum = 0.0;
        let mut dl = Vec::with_capacity(n_paths);
        let mut du = Vec::with_capacity(n_paths);
        let (mut lv, mut uv) = (0, 0);
        for i in 0..n_paths {
            let eta = match states {
                Some(e) if !deterministic => e.eta_paths.get(i, k),
                _ => impact.deterministic_value(t, horizon).unwrap_or(f64::NAN),
            };
            let (lo, hi) = if singular {
                (
                    lower_bound_singular(impact, pq, horizon, t, eta)?,
                    upper_bound_singular(impact, risk, pq, horizon, t, eta)?,
                )
            } else {
                (
                    lower_bound_penalized(impact, pq, &params, horizon, t, eta)?,
                    upper_bound_penalized(impact, risk, pq, &params, horizon, t, eta)?,
                )
            };
            let y = field.values.get(i, k);
            let round = DETERMINISTIC_TOL * y.abs().max(1e-300);
            if y < lo - round {
                lv += 1;
            }
            if y > hi + round {
                uv += 1;
            }
            lower_sum += lo;
            upper_sum += hi;
            y_sum += y;
            dl.push(y - lo);
            du.push(hi - y);
        }
        let n = n_paths as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
        let sd = |v: &[f64], m: f64| {
            if v.len() < 2 {
                0.0
            } else {
                (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
            }
        };
        let (ml, mu) = (mean(&dl), mean(&du));
        let y_mean = y_sum / n;
        let (std_error, pass) = if deterministic {
            let tol = DETERMINISTIC_TOL * y_mean.abs();
            (0.0, ml >= -tol && mu >= -tol)
        } else {
            let mut se = sd(&dl, ml).max(sd(&du, mu)) / n.sqrt();
            if k == 0 {
                se = se.max(field.y0_std_error);
            }
            (se, ml >= -3.0 * se && mu >= -3.0 * se)
        };
        nodes.push(NodeBounds {
            t,
            y_mean,
            lower_mean: lower_sum / n,
            upper_mean: upper_sum / n,
            lower_slack: ml,
            upper_slack: mu,
            std_error,
            lower_violations: lv,
            upper_violations: uv,
            pass,
        });
    }
    let pass = nodes.iter().all(|n| n.pass);
    Ok(SandwichReport { nodes, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsde::{solve_penalized_deterministic, solve_penalized_mc};
    use crate::closed_form::{y_deterministic, y_gbm, GbmValue};
    use crate::model::{sample_paths, TimeGrid};

    fn pq(p: f64) -> PowerPair {
        PowerPair::new(p).unwrap()
    }

    const ONE: ImpactModel = ImpactModel::Constant { eta0: 1.0 };

    #[test]
    fn penalized_bound_examples() {
        let params = PenalizedParams::new(10.0).unwrap();
        let lo = lower_bound_penalized(&ONE, &pq(2.0), &params, 1.0, 0.0, 1.0).unwrap();
        let hi = upper_bound_penalized(&ONE, &RiskModel::Zero, &pq(2.0), &params, 1.0, 0.0, 1.0).unwrap();
        assert!((lo - 10.0 / 11.0).abs() < 1e-15);
        assert!((hi - 1.0).abs() < 1e-15);
        assert_eq!(
            upper_bound_penalized(&ONE, &RiskModel::Zero, &pq(2.0), &params, 1.0, 1.0, 1.0).unwrap(),
            20.0
        );
        // γ ≡ c: T^{-2}(T + c T^3/3)
        let (c, horizon) = (3.0, 2.0);
        let big = PenalizedParams::new(1e6).unwrap();
        let hi = upper_bound_penalized(&ONE, &RiskModel::Constant { c }, &pq(2.0), &big, horizon, 0.0, 1.0).unwrap();
        let oracle = (horizon + c * horizon.powi(3) / 3.0) / (horizon * horizon);
        assert!((hi - oracle).abs() < 1e-12 * oracle);
        let small = PenalizedParams::new(0.5).unwrap();
        let hi = upper_bound_penalized(&ONE, &RiskModel::Constant { c }, &pq(2.0), &small, horizon, 0.0, 1.0).unwrap();
        assert_eq!(hi, 1.5);
    }

    #[test]
    fn singular_bound_examples() {
        assert!((lower_bound_singular(&ONE, &pq(2.0), 1.0, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((upper_bound_singular(&ONE, &RiskModel::Zero, &pq(2.0), 1.0, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((upper_bound_singular(&ONE, &RiskModel::Zero, &pq(2.0), 1.0, 0.5, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(lower_bound_singular(&ONE, &pq(2.0), 1.0, 1.0, 1.0).is_err());

        let sigma: f64 = 0.5;
        let gbm = ImpactModel::Gbm {
            eta0: 1.0,
            mu: 0.0,
            sigma,
        };
        let (t, eta) = (0.25, 1.3);
        let s2 = sigma * sigma;
        let oracle = eta / ((s2 * (1.0 - t)).exp_m1() / s2);
        let lo = lower_bound_singular(&gbm, &pq(2.0), 1.0, t, eta).unwrap();
        assert!((lo - oracle).abs() < 1e-12 * oracle);

        let sqrt = ImpactModel::PowerSingular { beta: 0.5 };
        let lo = lower_bound_singular(&sqrt, &pq(2.0), 1.0, 0.0, 1.0).unwrap();
        assert!((lo - 0.5).abs() < 1e-9);
        assert!((lo - y_deterministic(&sqrt, &pq(2.0), 1.0, 0.0).unwrap()).abs() < 1e-9);

        let gbm1 = ImpactModel::Gbm {
            eta0: 1.0,
            mu: 1.0,
            sigma: 0.2,
        };
        let hi = upper_bound_singular(&gbm1, &RiskModel::Zero, &pq(2.0), 1.0, 0.0, 1.0).unwrap();
        assert!((hi - (std::f64::consts::E - 1.0)).abs() < 1e-12);
        let GbmValue::Drifted(y) = y_gbm(&gbm1, &pq(2.0), 1.0, 0.0, 1.0).unwrap() else {
            panic!("drifted")
        };
        assert!((y - 1.58198).abs() < 1e-5 && y <= hi);
    }

    #[test]
    fn riccati_sits_at_lower_bound() {
        let grid = TimeGrid::uniform(1.0, 2000).unwrap();
        let params = PenalizedParams::new(10.0).unwrap();
        let f = solve_penalized_deterministic(&ONE, &RiskModel::Zero, &pq(2.0), &grid, &params).unwrap();
        let rep = bounds_sandwich_check(&f, None, &ONE, &RiskModel::Zero, &pq(2.0), &params).unwrap();
        assert!(rep.pass);
        assert!(rep.nodes[0].lower_slack.abs() < 1e-12);
        assert!(rep.nodes.iter().all(|n| n.upper_mean <= 20.0));
    }

    #[test]
    fn deterministic_sandwich_with_risk_and_floor() {
        let grid = TimeGrid::uniform(1.0, 400).unwrap();
        let model = ImpactModel::PowerSingular { beta: 0.5 };
        let risk = RiskModel::Constant { c: 2.0 };
        for delta in [0.0, 0.1] {
            let params = PenalizedParams::new(100.0).unwrap().with_delta_floor(delta).unwrap();
            let f = solve_penalized_deterministic(&model, &risk, &pq(2.0), &grid, &params).unwrap();
            let rep = bounds_sandwich_check(&f, None, &model, &risk, &pq(2.0), &params).unwrap();
            assert!(rep.pass, "δ = {delta}: {:?}", rep.failures().next());
        }
    }

    #[test]
    fn monte_carlo_sandwich() {
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        let model = ImpactModel::Gbm {
            eta0: 1.0,
            mu: 0.5,
            sigma: 0.4,
        };
        let ens = sample_paths(&model, &RiskModel::Zero, &grid, 11, 4000).unwrap();
        let params = PenalizedParams::new(100.0).unwrap();
        let f = solve_penalized_mc(&model, &RiskModel::Zero, &pq(2.0), &ens, &params, 3).unwrap();
        let rep = bounds_sandwich_check(&f, Some(&ens), &model, &RiskModel::Zero, &pq(2.0), &params).unwrap();
        assert!(rep.pass, "{:?}", rep.failures().next());
        assert!(bounds_sandwich_check(&f, None, &model, &RiskModel::Zero, &pq(2.0), &params).is_err());
        let bsq = ImpactModel::BrownianSquare;
        assert!(matches!(
            lower_bound_singular(&bsq, &pq(2.0), 1.0, 0.0, 1.0),
            Err(Error::UnsupportedModel(_))
        ));
    }
}
