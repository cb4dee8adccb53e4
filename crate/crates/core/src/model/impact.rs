use serde::{Deserialize, Serialize};

use super::PowerPair;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_endpoint_singular, integrate_with_breaks, DEFAULT_REL_TOL};

/// Parametric family of the price-impact process `η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImpactModel {
    Constant {
        eta0: f64,
    },
    /// Piecewise-linear interpolation of `values` at `breakpoints`, held flat
    /// outside the table.
    DeterministicTable {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// `η_t = (T - t)^β`.
    PowerSingular {
        beta: f64,
    },
    /// `dη = μη dt + ση dW`.
    Gbm {
        eta0: f64,
        mu: f64,
        sigma: f64,
    },
    /// `η_t = 1 + W_t²`: a positive process whose normalised version is not a
    /// martingale. Used to exercise the martingale test.
    BrownianSquare,
}

/// Parametric family of the risk-aversion process `γ`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskModel {
    #[default]
    Zero,
    Constant {
        c: f64,
    },
    DeterministicTable {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

fn check_table(breakpoints: &[f64], values: &[f64], strictly_positive: bool) -> Result<()> {
    if breakpoints.is_empty() || breakpoints.len() != values.len() {
        return Err(Error::Argument(format!(
            "table needs matching non-empty breakpoints and values (got {} and {})",
            breakpoints.len(),
            values.len()
        )));
    }
    if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument(
            "table breakpoints must be finite and strictly increasing".into(),
        ));
    }
    for &v in values {
        let ok = v.is_finite() && if strictly_positive { v > 0.0 } else { v >= 0.0 };
        if !ok {
            return Err(Error::Argument(format!(
                "table value {v} must be finite and {}",
                if strictly_positive { "positive" } else { "nonnegative" }
            )));
        }
    }
    Ok(())
}

fn interpolate(breakpoints: &[f64], values: &[f64], t: f64) -> f64 {
    let n = breakpoints.len();
    if t <= breakpoints[0] {
        return values[0];
    }
    if t >= breakpoints[n - 1] {
        return values[n - 1];
    }
    let j = breakpoints.partition_point(|&b| b <= t);
    let (t0, t1) = (breakpoints[j - 1], breakpoints[j]);
    let w = (t - t0) / (t1 - t0);
    values[j - 1] + w * (values[j] - values[j - 1])
}

/// `[a, b]` split at every table breakpoint strictly inside it.
fn panels(breakpoints: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut pts = vec![a];
    pts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts
}

/// `∫_0^τ e^{cs} ds`, stable as `c → 0`.
pub(crate) fn exp_integral(c: f64, tau: f64) -> f64 {
    if c == 0.0 {
        tau
    } else {
        (c * tau).exp_m1() / c
    }
}

impl ImpactModel {
    /// Checks parameter well-formedness (not integrability).
    pub fn validate(&self) -> Result<()> {
        match self {
            ImpactModel::Constant { eta0 } => {
                if !(*eta0 > 0.0 && eta0.is_finite()) {
                    return Err(Error::Argument(format!("constant impact {eta0} must be positive")));
                }
            }
            ImpactModel::DeterministicTable { breakpoints, values } => check_table(breakpoints, values, true)?,
            ImpactModel::PowerSingular { beta } => {
                if !(*beta >= 0.0 && beta.is_finite()) {
                    return Err(Error::Argument(format!("power exponent β = {beta} must be >= 0")));
                }
            }
            ImpactModel::Gbm { eta0, mu, sigma } => {
                if !(*eta0 > 0.0 && eta0.is_finite()) {
                    return Err(Error::Argument(format!("GBM η0 = {eta0} must be positive")));
                }
                if !mu.is_finite() || !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::Argument(format!(
                        "GBM needs finite μ and σ >= 0 (got μ = {mu}, σ = {sigma})"
                    )));
                }
            }
            ImpactModel::BrownianSquare => {}
        }
        Ok(())
    }

    pub fn family(&self) -> &'static str {
        match self {
            ImpactModel::Constant { .. } => "constant",
            ImpactModel::DeterministicTable { .. } => "deterministic_table",
            ImpactModel::PowerSingular { .. } => "power_singular",
            ImpactModel::Gbm { .. } => "gbm",
            ImpactModel::BrownianSquare => "brownian_square",
        }
    }

    /// True when `η` is a deterministic function of time (GBM with `σ = 0`
    /// included).
    pub fn is_deterministic(&self) -> bool {
        match self {
            ImpactModel::Gbm { sigma, .. } => *sigma == 0.0,
            ImpactModel::BrownianSquare => false,
            _ => true,
        }
    }

    /// True for the families whose normalised process `η_t / E[η_t]` is a
    /// martingale.
    pub fn has_uncorrelated_increments(&self) -> bool {
        !matches!(self, ImpactModel::BrownianSquare)
    }

    /// `η_t` for deterministic families, `None` otherwise.
    pub fn deterministic_value(&self, t: f64, horizon: f64) -> Option<f64> {
        match self {
            ImpactModel::Constant { eta0 } => Some(*eta0),
            ImpactModel::DeterministicTable { breakpoints, values } => Some(interpolate(breakpoints, values, t)),
            ImpactModel::PowerSingular { beta } => Some(if *beta == 0.0 {
                1.0
            } else {
                (horizon - t).max(0.0).powf(*beta)
            }),
            ImpactModel::Gbm { eta0, mu, sigma } if *sigma == 0.0 => Some(eta0 * (mu * t).exp()),
            _ => None,
        }
    }

    /// Initial value `η_0`.
    pub fn initial_value(&self, horizon: f64) -> f64 {
        match self {
            ImpactModel::Gbm { eta0, .. } => *eta0,
            ImpactModel::BrownianSquare => 1.0,
            _ => self.deterministic_value(0.0, horizon).unwrap_or(f64::NAN),
        }
    }

    /// `E[η_t]` in closed form.
    pub fn expected(&self, t: f64, horizon: f64) -> f64 {
        match self {
            ImpactModel::Gbm { eta0, mu, .. } => eta0 * (mu * t).exp(),
            ImpactModel::BrownianSquare => 1.0 + t,
            _ => self
                .deterministic_value(t, horizon)
                .expect("non-stochastic family has a deterministic value"),
        }
    }

    /// `∫_a^b E[η_s]^{-r} ds` for a UMI family; the integrand is deterministic.
    pub fn mean_inverse_power_integral(&self, a: f64, b: f64, horizon: f64, r: f64) -> Result<f64> {
        match self {
            ImpactModel::Gbm { eta0, mu, .. } => {
                let c = -r * mu;
                Ok(eta0.powf(-r) * (c * a).exp() * exp_integral(c, b - a))
            }
            ImpactModel::BrownianSquare => Err(Error::UnsupportedModel(
                "η = 1 + W² does not have uncorrelated multiplicative increments".into(),
            )),
            _ => self.deterministic_inverse_power_integral(a, b, horizon, r),
        }
    }

    /// `E[∫_a^b η_s^{-r} ds | η_{tc} = eta_c]` for `tc <= a <= b <= T`.
    ///
    /// The conditioning state is ignored for deterministic families.
    pub fn conditional_inverse_power_integral(
        &self,
        a: f64,
        b: f64,
        horizon: f64,
        r: f64,
        tc: f64,
        eta_c: f64,
    ) -> Result<f64> {
        match self {
            ImpactModel::Gbm { mu, sigma, .. } => {
                let c = -r * (mu - 0.5 * sigma * sigma) + 0.5 * r * r * sigma * sigma;
                Ok(eta_c.powf(-r) * (c * (a - tc)).exp() * exp_integral(c, b - a))
            }
            ImpactModel::BrownianSquare => Err(Error::UnsupportedModel(
                "no closed-form conditional moments of (1 + W²)^{-r}".into(),
            )),
            _ => self.deterministic_inverse_power_integral(a, b, horizon, r),
        }
    }

    /// `E[∫_a^b η_s ds | η_{tc} = eta_c]`.
    pub fn conditional_impact_integral(&self, a: f64, b: f64, horizon: f64, tc: f64, eta_c: f64) -> Result<f64> {
        match self {
            ImpactModel::Gbm { mu, .. } => Ok(eta_c * (mu * (a - tc)).exp() * exp_integral(*mu, b - a)),
            ImpactModel::BrownianSquare => {
                // E[1 + W_s² | W_tc] = eta_c + (s - tc)
                let (u, v) = (a - tc, b - tc);
                Ok(eta_c * (b - a) + 0.5 * (v * v - u * u))
            }
            ImpactModel::Constant { eta0 } => Ok(eta0 * (b - a)),
            ImpactModel::PowerSingular { beta } => {
                let e = beta + 1.0;
                Ok(((horizon - a).powf(e) - (horizon - b).max(0.0).powf(e)) / e)
            }
            ImpactModel::DeterministicTable { breakpoints, values } => integrate_with_breaks(
                |s| interpolate(breakpoints, values, s),
                &panels(breakpoints, a, b),
                DEFAULT_REL_TOL,
            ),
        }
    }

    /// `∫_a^b η_s^{-r} ds` for a deterministic family, by adaptive quadrature
    /// (with a singularity-removing substitution for the power family).
    pub fn deterministic_inverse_power_integral(&self, a: f64, b: f64, horizon: f64, r: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        match self {
            ImpactModel::Constant { eta0 } => Ok(eta0.powf(-r) * (b - a)),
            ImpactModel::DeterministicTable { breakpoints, values } => integrate_with_breaks(
                |s| interpolate(breakpoints, values, s).powf(-r),
                &panels(breakpoints, a, b),
                DEFAULT_REL_TOL,
            ),
            ImpactModel::PowerSingular { beta } => {
                let order = beta * r;
                let (lo, hi) = ((horizon - b).max(0.0), horizon - a);
                if order < 1.0 {
                    integrate_endpoint_singular(|d: f64| d.powf(-order), lo, hi, order, DEFAULT_REL_TOL)
                } else if lo > 0.0 {
                    integrate(|d: f64| d.powf(-order), lo, hi, DEFAULT_REL_TOL)
                } else {
                    Err(Error::Integrability(format!(
                        "∫ (T-s)^(-{order}) ds diverges at T: β(q-1) = {order} >= 1"
                    )))
                }
            }
            ImpactModel::Gbm { eta0, mu, sigma } if *sigma == 0.0 => {
                let c = -r * mu;
                Ok(eta0.powf(-r) * (c * a).exp() * exp_integral(c, b - a))
            }
            _ => Err(Error::UnsupportedModel(format!(
                "{} impact is stochastic",
                self.family()
            ))),
        }
    }
}

impl RiskModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            RiskModel::Zero => Ok(()),
            RiskModel::Constant { c } => {
                if *c >= 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Argument(format!("constant risk {c} must be nonnegative")))
                }
            }
            RiskModel::DeterministicTable { breakpoints, values } => check_table(breakpoints, values, false),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RiskModel::Zero => true,
            RiskModel::Constant { c } => *c == 0.0,
            RiskModel::DeterministicTable { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            RiskModel::Zero => 0.0,
            RiskModel::Constant { c } => *c,
            RiskModel::DeterministicTable { breakpoints, values } => interpolate(breakpoints, values, t),
        }
    }

    /// `∫_a^b (T - s)^p γ_s ds`.
    pub fn weighted_integral(&self, a: f64, b: f64, horizon: f64, p: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        match self {
            RiskModel::Zero => Ok(0.0),
            RiskModel::Constant { c } => {
                let e = p + 1.0;
                Ok(c * ((horizon - a).powf(e) - (horizon - b).max(0.0).powf(e)) / e)
            }
            RiskModel::DeterministicTable { breakpoints, values } => integrate_with_breaks(
                |s| (horizon - s).max(0.0).powf(p) * interpolate(breakpoints, values, s),
                &panels(breakpoints, a, b),
                DEFAULT_REL_TOL,
            ),
        }
    }
}

/// `E[η_t]` in closed form.
///
/// Deterministic families return their own value; the power family needs the
/// horizon, which is why it is an argument.
pub fn expected_impact(impact: &ImpactModel, t: f64, horizon: f64) -> Result<f64> {
    impact.validate()?;
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")));
    }
    Ok(impact.expected(t, horizon))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub pass: bool,
    pub reason: String,
}

/// Outcome of checking the two integrability conditions:
/// (I1) `η ∈ M²` and `η^{-(q-1)} ∈ M¹`, (I2) `E∫(T-s)^p γ_s ds < ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub i1: ConditionCheck,
    pub i2: ConditionCheck,
}

impl IntegrabilityReport {
    pub fn pass(&self) -> bool {
        self.i1.pass && self.i2.pass
    }

    /// Converts a failed report into an integrability error.
    pub fn into_result(self) -> Result<()> {
        if self.pass() {
            return Ok(());
        }
        let mut reasons = Vec::new();
        for (name, check) in [("I1", &self.i1), ("I2", &self.i2)] {
            if !check.pass {
                reasons.push(format!("({name}) {}", check.reason));
            }
        }
        Err(Error::Integrability(reasons.join("; ")))
    }
}

pub fn validate_integrability(
    impact: &ImpactModel,
    risk: &RiskModel,
    pq: &PowerPair,
    horizon: f64,
) -> IntegrabilityReport {
    let fail = |reason: String| ConditionCheck { pass: false, reason };
    let ok = |reason: &str| ConditionCheck {
        pass: true,
        reason: reason.to_string(),
    };
    let r = pq.rate_exponent();
    let i1 = match impact.validate() {
        Err(e) => fail(format!("malformed impact model: {e}")),
        Ok(()) => match impact {
            ImpactModel::Constant { .. } => ok("constant positive impact"),
            ImpactModel::DeterministicTable { .. } => ok("piecewise-linear impact bounded away from zero"),
            ImpactModel::PowerSingular { beta } => {
                let order = beta * r;
                if order < 1.0 {
                    ok(&format!("β(q-1) = {order} < 1, so ∫(T-s)^(-β(q-1)) ds is finite"))
                } else {
                    fail(format!("β(q-1) = {order} >= 1, so ∫(T-s)^(-β(q-1)) ds diverges at T"))
                }
            }
            ImpactModel::Gbm { .. } => ok("lognormal moments of every order are finite"),
            ImpactModel::BrownianSquare => ok("1 + W² has finite moments and η^(-(q-1)) <= 1"),
        },
    };
    let i2 = if !(horizon > 0.0) {
        fail(format!("horizon {horizon} must be positive"))
    } else {
        match risk.validate() {
            Err(e) => fail(format!("malformed risk model: {e}")),
            Ok(()) => ok("deterministic bounded risk process"),
        }
    };
    IntegrabilityReport { i1, i2 }
}
