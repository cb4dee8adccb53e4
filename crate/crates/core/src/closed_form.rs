//! Closed-form value densities `Y` and optimal schedules.
//!
//! For deterministic impact, `Y_t = (∫_t^T η_s^{-(q-1)} ds)^{-(p-1)}`. When
//! `η_t / E[η_t]` is a martingale the same formula holds with `E[η_s]` in
//! place of `η_s`, multiplied by that martingale, and the optimal schedule
//! is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ImpactModel, PowerPair};
use crate::quadrature::{integrate, DEFAULT_REL_TOL};

fn check_before_horizon(t: f64, horizon: f64) -> Result<()> {
    if !(t < horizon) {
        return Err(Error::Domain(format!(
            "Y is singular at T = {horizon}; requested t = {t}"
        )));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("t = {t} is negative")));
    }
    Ok(())
}

fn require_deterministic(impact: &ImpactModel) -> Result<()> {
    if impact.is_deterministic() {
        Ok(())
    } else {
        Err(Error::UnsupportedModel(format!(
            "{} impact is stochastic; the deterministic formula does not apply",
            impact.family()
        )))
    }
}

fn require_umi(impact: &ImpactModel) -> Result<()> {
    if impact.has_uncorrelated_increments() {
        Ok(())
    } else {
        Err(Error::UnsupportedModel(format!(
            "{} impact does not have uncorrelated multiplicative increments",
            impact.family()
        )))
    }
}

/// `(1 - e^{-z})/z`, accurate for small `|z|` and valid for negative `z`.
pub fn one_minus_exp_over(z: f64) -> f64 {
    if z.abs() < 1e-6 {
        1.0 - z / 2.0 + z * z / 6.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// `Y_t = (∫_t^T η_s^{-(q-1)} ds)^{-(p-1)}` for deterministic `η`.
pub fn y_deterministic(impact: &ImpactModel, pq: &PowerPair, horizon: f64, t: f64) -> Result<f64> {
    require_deterministic(impact)?;
    impact.validate()?;
    check_before_horizon(t, horizon)?;
    let tail = impact.deterministic_inverse_power_integral(t, horizon, horizon, pq.rate_exponent())?;
    Ok(tail.powf(-pq.value_exponent()))
}

/// Optimal schedule `∫_t^T η^{-(q-1)} / ∫_0^T η^{-(q-1)}` for deterministic `η`.
pub fn x_deterministic(impact: &ImpactModel, pq: &PowerPair, horizon: f64, t: f64) -> Result<f64> {
    require_deterministic(impact)?;
    impact.validate()?;
    if t < 0.0 || t.is_nan() {
        return Err(Error::Domain(format!("t = {t} is negative")));
    }
    if t >= horizon {
        return Ok(0.0);
    }
    let r = pq.rate_exponent();
    let total = impact.deterministic_inverse_power_integral(0.0, horizon, horizon, r)?;
    let tail = impact.deterministic_inverse_power_integral(t, horizon, horizon, r)?;
    Ok((tail / total).clamp(0.0, 1.0))
}

/// `Y_t = η_t/(T - t)^{p-1}`, the value density when `η` is a martingale.
pub fn y_martingale(eta_t: f64, pq: &PowerPair, horizon: f64, t: f64) -> Result<f64> {
    check_before_horizon(t, horizon)?;
    if !(eta_t > 0.0) {
        return Err(Error::Positivity(format!("η_t = {eta_t}")));
    }
    Ok(eta_t / (horizon - t).powf(pq.value_exponent()))
}

/// `∫_a^b E[η_s]^{-(q-1)} ds` by adaptive quadrature of the mean curve.
fn mean_tail_by_quadrature(impact: &ImpactModel, pq: &PowerPair, horizon: f64, a: f64) -> Result<f64> {
    let r = pq.rate_exponent();
    match impact {
        ImpactModel::Gbm { .. } => integrate(|s| impact.expected(s, horizon).powf(-r), a, horizon, DEFAULT_REL_TOL),
        _ => impact.deterministic_inverse_power_integral(a, horizon, horizon, r),
    }
}

/// `Y_t = M_t (∫_t^T E[η_s]^{-(q-1)} ds)^{-(p-1)}` with `M_t = η_t/E[η_t]`.
pub fn y_uncorrelated(impact: &ImpactModel, pq: &PowerPair, horizon: f64, t: f64, eta_t: f64) -> Result<f64> {
    require_umi(impact)?;
    impact.validate()?;
    check_before_horizon(t, horizon)?;
    if !(eta_t > 0.0) {
        return Err(Error::Positivity(format!("η_t = {eta_t}")));
    }
    let m = eta_t / impact.expected(t, horizon);
    let tail = mean_tail_by_quadrature(impact, pq, horizon, t)?;
    Ok(m * tail.powf(-pq.value_exponent()))
}

/// Deterministic optimal schedule for a UMI impact process.
pub fn x_uncorrelated(impact: &ImpactModel, pq: &PowerPair, horizon: f64, t: f64) -> Result<f64> {
    require_umi(impact)?;
    impact.validate()?;
    if t < 0.0 || t.is_nan() {
        return Err(Error::Domain(format!("t = {t} is negative")));
    }
    if t >= horizon {
        return Ok(0.0);
    }
    let total = mean_tail_by_quadrature(impact, pq, horizon, 0.0)?;
    let tail = mean_tail_by_quadrature(impact, pq, horizon, t)?;
    Ok((tail / total).clamp(0.0, 1.0))
}

/// Result of the GBM closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GbmValue {
    Drifted(f64),
    /// `μ = 0`: the process is a martingale; use [`y_martingale`].
    Martingale,
}

fn gbm_parameters(impact: &ImpactModel) -> Result<(f64, f64, f64)> {
    match impact {
        ImpactModel::Gbm { eta0, mu, sigma } => {
            impact.validate()?;
            Ok((*eta0, *mu, *sigma))
        }
        _ => Err(Error::UnsupportedModel(format!(
            "GBM formula requested for {} impact",
            impact.family()
        ))),
    }
}

/// `Y_t = (μ(q-1))^{p-1} η_t / (1 - e^{-μ(q-1)(T-t)})^{p-1}` for GBM impact.
///
/// Evaluated as `η_t / ((T-t) φ(z))^{p-1}` with `φ(z) = (1-e^{-z})/z` and
/// `z = μ(q-1)(T-t)`, which is the same number and stays well defined for
/// `μ < 0` and small `|z|`.
pub fn y_gbm(impact: &ImpactModel, pq: &PowerPair, horizon: f64, t: f64, eta_t: f64) -> Result<GbmValue> {
    let (_, mu, _) = gbm_parameters(impact)?;
    check_before_horizon(t, horizon)?;
    if !(eta_t > 0.0) {
        return Err(Error::Positivity(format!("η_t = {eta_t}")));
    }
    if mu == 0.0 {
        return Ok(GbmValue::Martingale);
    }
    let tau = horizon - t;
    let z = mu * pq.rate_exponent() * tau;
    Ok(GbmValue::Drifted(
        eta_t / (tau * one_minus_exp_over(z)).powf(pq.value_exponent()),
    ))
}

/// The GBM display read as `μ·(q-1)^{p-1}·η_t/(1 - e^{-μ(q-1)(T-t)})^{p-1}`.
///
/// Agrees with [`y_gbm`] only at `p = 2`; kept so reports can show both
/// readings side by side. `NaN` when `μ < 0` and `p - 1` is fractional.
pub fn y_gbm_printed(impact: &ImpactModel, pq: &PowerPair, horizon: f64, t: f64, eta_t: f64) -> Result<f64> {
    let (_, mu, _) = gbm_parameters(impact)?;
    check_before_horizon(t, horizon)?;
    let r = pq.rate_exponent();
    let e = pq.value_exponent();
    let z = mu * r * (horizon - t);
    Ok(mu * r.powf(e) * eta_t / (-(-z).exp_m1()).powf(e))
}

/// `x_t = (e^{-ct} - e^{-cT})/(1 - e^{-cT})` with `c = μ(q-1)`; `1 - t/T` at `c = 0`.
pub fn x_gbm(mu: f64, pq: &PowerPair, horizon: f64, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::Domain(format!("t = {t} is negative")));
    }
    if t >= horizon {
        return Ok(0.0);
    }
    let c = mu * pq.rate_exponent();
    let tau = horizon - t;
    let x = (-c * t).exp() * tau * one_minus_exp_over(c * tau) / (horizon * one_minus_exp_over(c * horizon));
    Ok(x.clamp(0.0, 1.0))
}

/// Cost `α²/(2α + β - 1)` of the control `x_t = (1-t)^α` under `η_t = (1-t)^β`, `p = 2`.
pub fn counterexample_cost(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Argument(format!("α = {alpha} must be positive")));
    }
    if !(beta >= 1.0) {
        return Err(Error::Argument(format!(
            "β = {beta} < 1: an optimal control exists, the counterexample regime needs β >= 1"
        )));
    }
    Ok(alpha * alpha / (2.0 * alpha + beta - 1.0))
}

/// Which closed form a [`ClosedFormY`] instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFamily {
    Deterministic,
    Martingale,
    Uncorrelated,
    Gbm,
}

/// A closed-form value density `(t, η_t) ↦ Y_t` for `t < T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormY {
    pub family: ClosedFamily,
    pub impact: ImpactModel,
    pub pq: PowerPair,
    pub horizon: f64,
}

impl ClosedFormY {
    /// Picks the most specific closed form available for `impact`.
    pub fn for_model(impact: &ImpactModel, pq: PowerPair, horizon: f64) -> Result<Self> {
        impact.validate()?;
        let family = match impact {
            ImpactModel::Gbm { mu, sigma, .. } if *sigma > 0.0 => {
                if *mu == 0.0 {
                    ClosedFamily::Martingale
                } else {
                    ClosedFamily::Gbm
                }
            }
            ImpactModel::BrownianSquare => return Err(Error::UnsupportedModel("no closed form for η = 1 + W²".into())),
            _ => ClosedFamily::Deterministic,
        };
        Ok(Self::with_family(impact, pq, horizon, family))
    }

    pub fn with_family(impact: &ImpactModel, pq: PowerPair, horizon: f64, family: ClosedFamily) -> Self {
        Self {
            family,
            impact: impact.clone(),
            pq,
            horizon,
        }
    }

    pub fn eval(&self, t: f64, eta_t: f64) -> Result<f64> {
        match self.family {
            ClosedFamily::Deterministic => y_deterministic(&self.impact, &self.pq, self.horizon, t),
            ClosedFamily::Martingale => y_martingale(eta_t, &self.pq, self.horizon, t),
            ClosedFamily::Uncorrelated => y_uncorrelated(&self.impact, &self.pq, self.horizon, t, eta_t),
            ClosedFamily::Gbm => match y_gbm(&self.impact, &self.pq, self.horizon, t, eta_t)? {
                GbmValue::Drifted(y) => Ok(y),
                GbmValue::Martingale => y_martingale(eta_t, &self.pq, self.horizon, t),
            },
        }
    }

    /// Optimal schedule `x_t/ξ` when it is deterministic.
    pub fn schedule(&self, t: f64) -> Result<f64> {
        match self.family {
            ClosedFamily::Deterministic => x_deterministic(&self.impact, &self.pq, self.horizon, t),
            ClosedFamily::Martingale => x_gbm(0.0, &self.pq, self.horizon, t),
            ClosedFamily::Uncorrelated => x_uncorrelated(&self.impact, &self.pq, self.horizon, t),
            ClosedFamily::Gbm => match &self.impact {
                ImpactModel::Gbm { mu, .. } => x_gbm(*mu, &self.pq, self.horizon, t),
                _ => x_uncorrelated(&self.impact, &self.pq, self.horizon, t),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pq(p: f64) -> PowerPair {
        PowerPair::new(p).unwrap()
    }

    fn gbm(mu: f64, sigma: f64) -> ImpactModel {
        ImpactModel::Gbm { eta0: 1.0, mu, sigma }
    }

    const ONE: ImpactModel = ImpactModel::Constant { eta0: 1.0 };
    const SQRT: ImpactModel = ImpactModel::PowerSingular { beta: 0.5 };

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn deterministic_examples() {
        // ∫_0^1 (1-s)^{-1/2} ds = 2 analytically
        assert!(rel(y_deterministic(&SQRT, &pq(2.0), 1.0, 0.0).unwrap(), 0.5) < 1e-10);
        assert!(rel(y_deterministic(&ONE, &pq(2.0), 1.0, 0.5).unwrap(), 2.0) < 1e-14);
        assert!(rel(y_deterministic(&ONE, &pq(3.0), 1.0, 0.0).unwrap(), 1.0) < 1e-14);
        assert!(matches!(
            y_deterministic(&ONE, &pq(2.0), 1.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            y_deterministic(&ImpactModel::PowerSingular { beta: 1.0 }, &pq(2.0), 1.0, 0.0),
            Err(Error::Integrability(_))
        ));
        assert!(y_deterministic(&gbm(1.0, 0.5), &pq(2.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn deterministic_schedules() {
        for &t in &[0.0, 0.1, 0.5, 0.9, 0.999] {
            let x = x_deterministic(&SQRT, &pq(2.0), 1.0, t).unwrap();
            assert!((x - (1.0f64 - t).sqrt()).abs() < 1e-10);
            assert!((x_deterministic(&ONE, &pq(2.0), 2.0, t).unwrap() - (1.0 - t / 2.0)).abs() < 1e-14);
        }
        assert_eq!(x_deterministic(&SQRT, &pq(2.0), 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn martingale_examples() {
        assert_eq!(y_martingale(1.0, &pq(2.0), 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(y_martingale(1.0, &pq(2.0), 1.0, 0.5).unwrap(), 2.0);
        assert_eq!(y_martingale(3.0, &pq(3.0), 2.0, 1.0).unwrap(), 3.0);
        assert!(y_martingale(1.0, &pq(2.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn uncorrelated_examples() {
        let target = 1.0 / (1.0 - (-1.0f64).exp());
        let y = y_uncorrelated(&gbm(1.0, 0.5), &pq(2.0), 1.0, 0.0, 1.0).unwrap();
        assert!(rel(y, target) < 1e-10);
        assert!((target - 1.581977).abs() < 1e-6);
        let x = x_uncorrelated(&gbm(1.0, 0.5), &pq(2.0), 1.0, 0.5).unwrap();
        let oracle = ((-0.5f64).exp() - (-1.0f64).exp()) / (1.0 - (-1.0f64).exp());
        assert!((x - oracle).abs() < 1e-10);
        assert!((oracle - 0.377541).abs() < 1e-6);
        assert!((x_uncorrelated(&gbm(0.0, 0.5), &pq(2.0), 1.0, 0.3).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(x_uncorrelated(&gbm(1.0, 0.5), &pq(2.0), 1.0, 0.0).unwrap(), 1.0);
        assert!(matches!(
            y_uncorrelated(&ImpactModel::BrownianSquare, &pq(2.0), 1.0, 0.0, 1.0),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn gbm_examples() {
        let target = 1.0 / (1.0 - (-1.0f64).exp());
        match y_gbm(&gbm(1.0, 0.5), &pq(2.0), 1.0, 0.0, 1.0).unwrap() {
            GbmValue::Drifted(y) => assert!(rel(y, target) < 1e-14),
            GbmValue::Martingale => panic!("μ = 1 is not the martingale case"),
        }
        assert_eq!(
            y_gbm(&gbm(0.0, 0.5), &pq(2.0), 1.0, 0.0, 1.0).unwrap(),
            GbmValue::Martingale
        );
        // both readings coincide at p = 2
        let printed = y_gbm_printed(&gbm(1.0, 0.5), &pq(2.0), 1.0, 0.3, 1.2).unwrap();
        let GbmValue::Drifted(y) = y_gbm(&gbm(1.0, 0.5), &pq(2.0), 1.0, 0.3, 1.2).unwrap() else {
            unreachable!()
        };
        assert!(rel(printed, y) < 1e-14);
        // and differ at p = 3 unless μ = 1
        let printed = y_gbm_printed(&gbm(2.0, 0.5), &pq(3.0), 1.0, 0.3, 1.2).unwrap();
        let GbmValue::Drifted(y) = y_gbm(&gbm(2.0, 0.5), &pq(3.0), 1.0, 0.3, 1.2).unwrap() else {
            unreachable!()
        };
        assert!(rel(printed, y) > 0.1);
    }

    #[test]
    fn gbm_small_drift_series_matches_martingale_limit() {
        // μ/(1 - e^{-μ(T-t)}) → 1/(T-t); series oracle 1/(T-t)·(1 + μ(T-t)/2)
        let (mu, tau) = (1e-8, 0.6);
        let GbmValue::Drifted(y) = y_gbm(&gbm(mu, 0.5), &pq(2.0), 1.0, 1.0 - tau, 1.0).unwrap() else {
            unreachable!()
        };
        let series = (1.0 + mu * tau / 2.0) / tau;
        assert!(rel(y, series) < 1e-12);
        assert!(rel(y, y_martingale(1.0, &pq(2.0), 1.0, 1.0 - tau).unwrap()) < 1e-6);
    }

    #[test]
    fn gbm_negative_drift_agrees_with_quadrature() {
        for p in [1.5, 2.0, 3.0] {
            let model = gbm(-0.8, 0.3);
            let GbmValue::Drifted(y) = y_gbm(&model, &pq(p), 1.5, 0.2, 0.9).unwrap() else {
                unreachable!()
            };
            let yu = y_uncorrelated(&model, &pq(p), 1.5, 0.2, 0.9).unwrap();
            assert!(rel(y, yu) < 1e-10, "p = {p}: {y} vs {yu}");
        }
    }

    #[test]
    fn gbm_schedule_matches_display() {
        for mu in [-1.0, 0.0, 1.0, 2.5] {
            for &t in &[0.0, 0.2, 0.5, 0.8, 1.0] {
                let x = x_gbm(mu, &pq(2.0), 1.0, t).unwrap();
                let expect = if mu == 0.0 {
                    1.0 - t
                } else {
                    ((-mu * t).exp() - (-mu).exp()) / (1.0 - (-mu).exp())
                };
                assert!((x - expect).abs() < 1e-14, "{mu} {t}");
                let xu = x_uncorrelated(&gbm(mu, 0.4), &pq(2.0), 1.0, t).unwrap();
                assert!((x - xu).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn counterexample_examples() {
        assert_eq!(counterexample_cost(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(counterexample_cost(0.5, 1.0).unwrap(), 0.25);
        assert!((counterexample_cost(1.0, 2.0).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!(counterexample_cost(0.0, 1.0).is_err());
        assert!(counterexample_cost(1.0, 0.5).is_err());
    }

    #[test]
    fn divergence_at_horizon() {
        let families = [
            ClosedFormY::for_model(&ONE, pq(2.0), 1.0).unwrap(),
            ClosedFormY::for_model(&SQRT, pq(2.0), 1.0).unwrap(),
            ClosedFormY::for_model(&gbm(0.0, 0.5), pq(2.0), 1.0).unwrap(),
            ClosedFormY::for_model(&gbm(1.0, 0.5), pq(1.5), 1.0).unwrap(),
            ClosedFormY::with_family(&gbm(-1.0, 0.5), pq(3.0), 1.0, ClosedFamily::Uncorrelated),
        ];
        for y in &families {
            let mut prev = 0.0;
            for k in 2..=8 {
                let v = y.eval(1.0 - 10f64.powi(-k), 1.3).unwrap();
                assert!(v > prev, "{:?} at k = {k}", y.family);
                prev = v;
            }
        }
    }

    #[test]
    fn closed_form_selection() {
        assert_eq!(
            ClosedFormY::for_model(&gbm(0.0, 0.2), pq(2.0), 1.0).unwrap().family,
            ClosedFamily::Martingale
        );
        assert_eq!(
            ClosedFormY::for_model(&gbm(1.0, 0.0), pq(2.0), 1.0).unwrap().family,
            ClosedFamily::Deterministic
        );
        assert!(ClosedFormY::for_model(&ImpactModel::BrownianSquare, pq(2.0), 1.0).is_err());
    }

    proptest! {
        #[test]
        fn family_consistency(t in 0.0f64..0.99, eta in 0.05f64..20.0, p in 1.1f64..6.0, c in 0.1f64..5.0) {
            let pq = pq(p);
            let constant = ImpactModel::Constant { eta0: c };
            let yd = y_deterministic(&constant, &pq, 1.0, t).unwrap();
            let yu = y_uncorrelated(&constant, &pq, 1.0, t, c).unwrap();
            let ym = y_martingale(c, &pq, 1.0, t).unwrap();
            prop_assert!(rel(yd, ym) < 1e-10 && rel(yu, ym) < 1e-10);
            let martingale = ImpactModel::Gbm { eta0: c, mu: 0.0, sigma: 0.4 };
            let yu = y_uncorrelated(&martingale, &pq, 1.0, t, eta).unwrap();
            let ym = y_martingale(eta, &pq, 1.0, t).unwrap();
            prop_assert!(rel(yu, ym) < 1e-10);
        }

        #[test]
        fn scaling_covariance(t in 0.0f64..0.95, beta in 0.0f64..0.9, c in 0.1f64..10.0) {
            let pq = pq(2.0);
            let base = ImpactModel::DeterministicTable {
                breakpoints: vec![0.0, 0.3, 0.7, 1.0],
                values: vec![1.0, 2.0 + beta, 0.5, 1.5],
            };
            let scaled = ImpactModel::DeterministicTable {
                breakpoints: vec![0.0, 0.3, 0.7, 1.0],
                values: vec![c, c * (2.0 + beta), c * 0.5, c * 1.5],
            };
            let y0 = y_deterministic(&base, &pq, 1.0, t).unwrap();
            let y1 = y_deterministic(&scaled, &pq, 1.0, t).unwrap();
            prop_assert!(rel(y1, c * y0) < 1e-10);
            let x0 = x_deterministic(&base, &pq, 1.0, t).unwrap();
            let x1 = x_deterministic(&scaled, &pq, 1.0, t).unwrap();
            prop_assert!((x0 - x1).abs() <= 1e-10 * x0.max(1e-300));
        }

        #[test]
        fn schedules_bracketed_and_nonincreasing(mu in -3.0f64..3.0, beta in 0.0f64..0.95, p in 1.2f64..4.0) {
            let pq = pq(p);
            let nodes: Vec<f64> = (0..=40).map(|k| k as f64 / 40.0).collect();
            let schedules: Vec<Vec<f64>> = vec![
                nodes.iter().map(|&t| x_gbm(mu, &pq, 1.0, t).unwrap()).collect(),
                nodes.iter().map(|&t| x_uncorrelated(&gbm(mu, 0.3), &pq, 1.0, t).unwrap()).collect(),
                nodes.iter().map(|&t| x_deterministic(&ImpactModel::PowerSingular { beta: beta.min(0.95 / pq.rate_exponent()) }, &pq, 1.0, t).unwrap()).collect(),
            ];
            for xs in schedules {
                prop_assert!(xs.iter().all(|&x| (0.0..=1.0).contains(&x)));
                prop_assert!(xs.windows(2).all(|w| w[1] <= w[0] + 1e-15));
                prop_assert_eq!(xs[0], 1.0);
                prop_assert_eq!(xs[40], 0.0);
            }
        }

        #[test]
        fn counterexample_increasing_in_alpha(a in 0.001f64..0.999, d in 0.0001f64..0.5) {
            let b = (a + d).min(1.0);
            prop_assume!(b > a);
            prop_assert!(counterexample_cost(b, 1.0).unwrap() > counterexample_cost(a, 1.0).unwrap());
        }
    }

    #[test]
    fn counterexample_infimum_is_zero() {
        let values: Vec<f64> = (0..40)
            .map(|k| counterexample_cost(2f64.powi(-k), 1.0).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
        assert!(*values.last().unwrap() < 1e-11);
    }
}
