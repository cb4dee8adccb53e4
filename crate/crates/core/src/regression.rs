//! Least-squares projection onto polynomials of a scalar state.
//!
//! Normal equations are accumulated over fixed blocks of rows and the block
//! sums are added in block order, so results do not depend on the number of
//! worker threads.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BLOCK_PATHS;

/// Monomials `1, z, …, z^d` of the standardised state `z = (x - center)/scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyBasis {
    degree: usize,
    center: f64,
    scale: f64,
}

impl PolyBasis {
    pub fn new(degree: usize, center: f64, scale: f64) -> Self {
        Self { degree, center, scale }
    }

    /// Standardises with the sample mean and deviation of `xs`. A state with
    /// no spread (all paths equal) only supports the constant function.
    pub fn standardized(xs: &[f64], degree: usize) -> Self {
        let n = xs.len().max(1) as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 1e-12 * (1.0 + mean.abs())) {
            return Self::new(0, mean, 1.0);
        }
        Self::new(degree, mean, sd)
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    #[inline]
    pub fn fill(&self, x: f64, row: &mut [f64]) {
        let z = (x - self.center) / self.scale;
        let mut v = 1.0;
        for slot in row.iter_mut().take(self.dim()) {
            *slot = v;
            v *= z;
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "monomials of degree <= {} in (x - {:.6e}) / {:.6e}",
            self.degree, self.center, self.scale
        )
    }
}

/// Fitted coefficients on a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub basis: PolyBasis,
    pub coefficients: Vec<f64>,
}

impl Fit {
    #[inline]
    pub fn predict(&self, x: f64) -> f64 {
        let z = (x - self.basis.center) / self.basis.scale;
        // Horner
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }
}

/// `(Σ w xxᵀ, Σ w x y)` over rows `0..n`, where `row(i, x)` fills the
/// regressors of row `i` into `x` and returns `(y, w)`.
pub fn accumulate<F>(n: usize, dim: usize, row: F) -> (DMatrix<f64>, DVector<f64>)
where
    F: Fn(usize, &mut [f64]) -> (f64, f64) + Sync,
{
    let blocks = n.div_ceil(BLOCK_PATHS);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut a = vec![0.0; dim * dim];
            let mut v = vec![0.0; dim];
            let mut x = vec![0.0; dim];
            for i in b * BLOCK_PATHS..((b + 1) * BLOCK_PATHS).min(n) {
                let (y, w) = row(i, &mut x);
                for r in 0..dim {
                    let wx = w * x[r];
                    v[r] += wx * y;
                    for c in r..dim {
                        a[r * dim + c] += wx * x[c];
                    }
                }
            }
            (a, v)
        })
        .collect();
    let mut a = DMatrix::zeros(dim, dim);
    let mut v = DVector::zeros(dim);
    for (pa, pv) in &partials {
        for r in 0..dim {
            v[r] += pv[r];
            for c in r..dim {
                a[(r, c)] += pa[r * dim + c];
            }
        }
    }
    for r in 0..dim {
        for c in 0..r {
            a[(r, c)] = a[(c, r)];
        }
    }
    (a, v)
}

/// Solves the normal equations, rejecting numerically rank-deficient systems.
pub fn solve_normal(a: &DMatrix<f64>, v: &DVector<f64>) -> Result<Vec<f64>> {
    let dim = a.nrows();
    // equilibrate before judging the rank
    let d: Vec<f64> = (0..dim).map(|i| a[(i, i)].sqrt()).collect();
    if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Basis(
            "regressor column is identically zero or non-finite".into(),
        ));
    }
    let scaled = DMatrix::from_fn(dim, dim, |r, c| a[(r, c)] / (d[r] * d[c]));
    let eig = scaled.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 1e-13 * max) {
        return Err(Error::Basis(format!(
            "normal matrix is rank deficient (eigenvalue ratio {:.3e})",
            min / max
        )));
    }
    let rhs = DVector::from_fn(dim, |r, _| v[r] / d[r]);
    let chol = scaled
        .cholesky()
        .ok_or_else(|| Error::Basis("normal matrix is not positive definite".into()))?;
    let sol = chol.solve(&rhs);
    Ok((0..dim).map(|i| sol[i] / d[i]).collect())
}

/// Ordinary least squares of `ys` on a degree-`degree` polynomial of `xs`.
pub fn fit_least_squares(xs: &[f64], ys: &[f64], degree: usize) -> Result<Fit> {
    fit_on_basis(PolyBasis::standardized(xs, degree), xs, ys)
}

/// Least squares of `ys` on a given basis of `xs`.
pub fn fit_on_basis(basis: PolyBasis, xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() {
        return Err(Error::Argument(format!(
            "regression with {} states and {} targets",
            xs.len(),
            ys.len()
        )));
    }
    let dim = basis.dim();
    if xs.len() < dim {
        return Err(Error::Basis(format!(
            "{} samples cannot identify {dim} coefficients",
            xs.len()
        )));
    }
    let (a, v) = accumulate(xs.len(), dim, |i, row| {
        basis.fill(xs[i], row);
        (ys[i], 1.0)
    });
    let coefficients = solve_normal(&a, &v)?;
    Ok(Fit { basis, coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_cubic() {
        let xs: Vec<f64> = (0..500).map(|i| -2.0 + 4.0 * i as f64 / 499.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x * x * x).collect();
        let fit = fit_least_squares(&xs, &ys, 3).unwrap();
        for &x in &[-1.7, 0.0, 0.3, 1.9] {
            let exact = 1.0 - 2.0 * x + 0.5 * x * x * x;
            assert!((fit.predict(x) - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_state_falls_back_to_mean() {
        let xs = vec![0.7; 100];
        let ys: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let fit = fit_least_squares(&xs, &ys, 3).unwrap();
        assert_eq!(fit.basis.degree(), 0);
        assert!((fit.predict(0.7) - 49.5).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_is_a_basis_error() {
        // two distinct states cannot carry a cubic
        let xs: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let ys = xs.clone();
        assert!(matches!(fit_least_squares(&xs, &ys, 3), Err(Error::Basis(_))));
        assert!(matches!(
            fit_least_squares(&[1.0, 2.0], &[1.0, 2.0], 3),
            Err(Error::Basis(_))
        ));
    }

    #[test]
    fn accumulation_is_thread_count_free() {
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin()).collect();
        let a = fit_least_squares(&xs, &ys, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| fit_least_squares(&xs, &ys, 3)).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
    }
}
