//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 7/15-point Gauss–Kronrod pair on each panel; the panel with the largest
//! error estimate is bisected until the summed estimate meets the requested
//! relative tolerance. Integrable algebraic singularities at an endpoint are
//! handled by [`integrate_endpoint_singular`], which maps `d = u^{1/(1-a)}`
//! so the transformed integrand is bounded.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Relative tolerance used for every closed-form integral in the crate.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

const MAX_PANELS: usize = 4000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One Gauss–Kronrod 7/15 evaluation on `[a, b]`: returns (Kronrod value, error estimate).
pub fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    integrate_with_breaks(f, &[a, b], rel_tol)
}

/// Integrates `f` over `[points[0], points.last()]`, starting from panels split
/// at the given ascending break points (kinks of piecewise-linear data, say).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, points: &[f64], rel_tol: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Argument("quadrature needs at least two points".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b < a {
            return Err(Error::Argument(format!(
                "quadrature break points not ascending: {a} > {b}"
            )));
        }
        if b == a {
            continue;
        }
        let (value, error) = gauss_kronrod_15(&f, a, b);
        total += value;
        total_err += error;
        heap.push(Panel { a, b, value, error });
    }
    if !total.is_finite() {
        return Err(Error::Numerical {
            node: 0,
            message: "non-finite integrand".into(),
        });
    }
    let mut panels = heap.len();
    while total_err > (rel_tol * total.abs()).max(1e-300) {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        if panels >= MAX_PANELS {
            return Err(Error::Numerical {
                node: 0,
                message: format!("adaptive quadrature did not converge: estimate {total}, error {total_err}"),
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel cannot be split further in floating point
            heap.push(Panel { error: 0.0, ..worst });
            total_err -= worst.error;
            continue;
        }
        let (v1, e1) = gauss_kronrod_15(&f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        panels += 1;
    }
    // re-sum to shed the drift of the running updates
    Ok(heap.iter().map(|p| p.value).sum())
}

/// Integrates `g(d)` for `d ∈ [lo, hi]` (`0 <= lo`) where `g` may blow up like
/// `d^{-order}` at `d = 0`, with `0 <= order < 1`.
///
/// `g` receives the distance to the singular endpoint, never an absolute
/// coordinate, so no cancellation occurs near the singularity. A pure power
/// `d^{-order}` becomes a constant after the substitution.
pub fn integrate_endpoint_singular<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, order: f64, rel_tol: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&order) {
        return Err(Error::Integrability(format!(
            "endpoint singularity of order {order} is not integrable"
        )));
    }
    if lo < 0.0 {
        return Err(Error::Argument(format!("negative distance {lo} to singular endpoint")));
    }
    if hi <= lo {
        return Ok(0.0);
    }
    if order == 0.0 {
        return integrate(g, lo, hi, rel_tol);
    }
    let expo = 1.0 / (1.0 - order);
    let jac = order / (1.0 - order);
    // Kronrod nodes are interior, so u > 0 at every evaluation.
    integrate(
        |u: f64| g(u.powf(expo)) * expo * u.powf(jac),
        lo.powf(1.0 - order),
        hi.powf(1.0 - order),
        rel_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_high_degree_polynomials() {
        // 15-point Kronrod integrates degree 22 exactly
        let (v, _) = gauss_kronrod_15(&|x: f64| x.powi(22), -1.0, 1.0);
        assert!((v - 2.0 / 23.0).abs() < 1e-15);
        let (v, e) = gauss_kronrod_15(&|x: f64| 3.0 * x * x, 0.0, 2.0);
        assert!((v - 8.0).abs() < 1e-13);
        assert!(e < 1e-12);
    }

    #[test]
    fn adaptive_handles_smooth_and_kinked() {
        let v = integrate(|x| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12);
        let v = integrate_with_breaks(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], 1e-12).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 d^{-1/2} dd = 2
        let v = integrate_endpoint_singular(|d: f64| d.powf(-0.5), 0.0, 1.0, 0.5, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-10, "{v}");
        // ∫_0^1 d^{-0.98}(1+d) dd = 50 + 1/1.02
        let v = integrate_endpoint_singular(|d: f64| d.powf(-0.98) * (1.0 + d), 0.0, 1.0, 0.98, 1e-10).unwrap();
        let exact = 50.0 + 1.0 / 1.02;
        assert!(((v - exact) / exact).abs() < 1e-9, "{v}");
        assert!(integrate_endpoint_singular(|d: f64| 1.0 / d, 0.0, 1.0, 1.0, 1e-10).is_err());
        // interior sub-interval: ∫_{0.25}^{1} d^{-1/2} dd = 1
        let v = integrate_endpoint_singular(|d: f64| d.powf(-0.5), 0.25, 1.0, 0.5, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-13, "{v}");
    }
}
