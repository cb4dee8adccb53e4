use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{PathEnsemble, PathMatrix};
use crate::regression::fit_least_squares;

/// Monte Carlo evaluation of `Y_t = E[ξ e^{∫_t^T α} + ∫_t^T e^{∫_t^s α} β_s ds | F_t]`.
#[derive(Debug, Clone)]
pub struct LinearBsdeEstimate {
    /// Conditional estimate per path and node (one shared row when every input is deterministic).
    pub values: PathMatrix,
    /// Sample mean of the pathwise representation at each node.
    pub mean: Vec<f64>,
    /// Standard error of `mean`.
    pub std_error: Vec<f64>,
}

/// Evaluates the representation of the linear BSDE
/// `-dY = (α Y + β) dt - Z dW`, `Y_T = ξ` pathwise by the trapezoid rule,
/// then conditions on the Brownian state `W_t` by polynomial regression of
/// degree `basis_degree`.
///
/// `alpha` and `beta` are per-path node values (or one shared row) on the
/// ensemble grid and `xi` holds one terminal value per path (or a single
/// value). Any `α` above `alpha_cap` is a precondition error.
pub fn linear_bsde_mc(
    alpha: &PathMatrix,
    beta: &PathMatrix,
    xi: &[f64],
    alpha_cap: f64,
    ensemble: &PathEnsemble,
    basis_degree: usize,
) -> Result<LinearBsdeEstimate> {
    let grid = &ensemble.grid;
    let n = grid.intervals();
    let n_paths = ensemble.n_paths;
    for (name, m) in [("alpha", alpha), ("beta", beta)] {
        if m.cols() != n + 1 || !(m.rows() == 1 || m.rows() == n_paths) {
            return Err(Error::Argument(format!(
                "{name} must have {} columns and 1 or {n_paths} rows",
                n + 1
            )));
        }
    }
    if !(xi.len() == 1 || xi.len() == n_paths) {
        return Err(Error::Argument(format!("xi must have 1 or {n_paths} entries")));
    }
    if let Some(a) = alpha.data().iter().find(|&&a| !(a <= alpha_cap)) {
        return Err(Error::Precondition(format!("α = {a} exceeds the cap {alpha_cap}")));
    }
    let shared = alpha.is_shared() && beta.is_shared() && xi.len() == 1;
    let rows = if shared { 1 } else { n_paths };
    let mut v = PathMatrix::zeros(rows, n + 1);
    v.data_mut().par_chunks_mut(n + 1).enumerate().for_each(|(i, row)| {
        let (a, b) = (alpha.row(i), beta.row(i));
        row[n] = xi[if xi.len() == 1 { 0 } else { i }];
        for k in (0..n).rev() {
            let h = grid.step(k);
            let growth = (0.5 * h * (a[k] + a[k + 1])).exp();
            row[k] = growth * row[k + 1] + 0.5 * h * (b[k] + growth * b[k + 1]);
        }
    });
    let nf = rows as f64;
    let mut mean = Vec::with_capacity(n + 1);
    let mut std_error = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let col = v.column(k, rows);
        let m = col.iter().sum::<f64>() / nf;
        let se = if rows > 1 {
            (col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (nf - 1.0)).sqrt() / nf.sqrt()
        } else {
            0.0
        };
        mean.push(m);
        std_error.push(se);
    }
    if shared {
        return Ok(LinearBsdeEstimate {
            values: v,
            mean,
            std_error,
        });
    }
    let mut values = PathMatrix::zeros(rows, n + 1);
    let mut w = vec![0.0; rows];
    for k in 0..=n {
        let col = v.column(k, rows);
        let fit = fit_least_squares(&w, &col, basis_degree)?;
        for (i, &wi) in w.iter().enumerate() {
            values.row_mut(i)[k] = fit.predict(wi);
        }
        if k < n {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi += ensemble.brownian_increments.get(i, k);
            }
        }
    }
    Ok(LinearBsdeEstimate {
        values,
        mean,
        std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_paths, ImpactModel, RiskModel, TimeGrid};

    fn ensemble(n: usize, paths: usize) -> PathEnsemble {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        sample_paths(&ImpactModel::BrownianSquare, &RiskModel::Zero, &grid, 17, paths).unwrap()
    }

    #[test]
    fn deterministic_examples() {
        let ens = ensemble(1000, 8);
        let cols = 1001;
        let flat = |c: f64| PathMatrix::shared(vec![c; cols]);
        let a = 0.7;
        let est = linear_bsde_mc(&flat(a), &flat(0.0), &[2.0], 10.0, &ens, 2).unwrap();
        for k in (0..=1000).step_by(100) {
            let tau = ens.grid.time_to_go(k);
            assert!((est.values.get(0, k) - 2.0 * (a * tau).exp()).abs() < 1e-6);
        }
        let est = linear_bsde_mc(&flat(0.0), &flat(3.0), &[0.0], 10.0, &ens, 2).unwrap();
        assert!((est.mean[0] - 3.0).abs() < 1e-12 && (est.mean[500] - 1.5).abs() < 1e-12);
        let est = linear_bsde_mc(&flat(-1.0), &flat(1.0), &[0.0], 10.0, &ens, 2).unwrap();
        assert!((est.mean[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
        assert_eq!(est.std_error[0], 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let ens = ensemble(10, 8);
        let a = PathMatrix::shared(vec![2.0; 11]);
        let b = PathMatrix::shared(vec![0.0; 11]);
        assert!(matches!(
            linear_bsde_mc(&a, &b, &[1.0], 1.0, &ens, 2),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn stochastic_discount_matches_laplace_transform() {
        // α = -W², β = 0, ξ = 1: E[exp(-∫_0^T W²)] = cosh(√2 T)^{-1/2}
        let n = 200;
        let paths = 20_000;
        let ens = ensemble(n, paths);
        let mut alpha = PathMatrix::zeros(paths, n + 1);
        for i in 0..paths {
            let w = ens.brownian_path(i);
            for (slot, wk) in alpha.row_mut(i).iter_mut().zip(&w) {
                *slot = -wk * wk;
            }
        }
        let beta = PathMatrix::shared(vec![0.0; n + 1]);
        let est = linear_bsde_mc(&alpha, &beta, &[1.0], 0.0, &ens, 4).unwrap();
        let exact = (2f64.sqrt()).cosh().powf(-0.5);
        assert!((est.mean[0] - exact).abs() < 3.0 * est.std_error[0] + 1e-4);
        // E[Y_t] = cosh(√2τ)^{-1/2} (1 + 2t tanh(√2τ)/√2)^{-1/2}
        let k = n / 2;
        let (t, tau) = (0.5f64, 0.5f64);
        let s = 2f64.sqrt();
        let mean_exact = (s * tau).cosh().powf(-0.5) * (1.0 + 2.0 * t * (s * tau).tanh() / s).powf(-0.5);
        assert!((est.mean[k] - mean_exact).abs() < 3.0 * est.std_error[k] + 1e-4);
        // conditional value at t given W_t = 0: cosh(√2 (T - t))^{-1/2}
        let fitted_at_zero = {
            let mut w = vec![0.0; paths];
            for (i, wi) in w.iter_mut().enumerate() {
                *wi = ens.brownian_path(i)[k];
            }
            let col = est.values.column(k, paths);
            let idx = (0..paths).min_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())).unwrap();
            col[idx]
        };
        let cond = (2f64.sqrt() * tau).cosh().powf(-0.5);
        assert!((fitted_at_zero - cond).abs() < 0.01, "{fitted_at_zero} vs {cond}");
    }
}
