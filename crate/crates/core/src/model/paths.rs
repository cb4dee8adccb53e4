use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{ImpactModel, RiskModel, TimeGrid};
use crate::error::{Error, Result};

/// Paths per RNG substream. Block `b` draws from ChaCha8 stream `b` of the
/// run seed, so the sample does not depend on how blocks are scheduled.
pub const BLOCK_PATHS: usize = 256;

/// Row-major `paths × nodes` matrix. A single-row matrix stands for a
/// deterministic quantity shared by every path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PathMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Argument(format!(
                "matrix of {rows}x{cols} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// A deterministic row shared by all paths.
    pub fn shared(row: Vec<f64>) -> Self {
        let cols = row.len();
        Self {
            rows: 1,
            cols,
            data: row,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_shared(&self) -> bool {
        self.rows == 1
    }

    /// Row for `path`; a shared matrix returns its single row for every path.
    #[inline]
    pub fn row(&self, path: usize) -> &[f64] {
        let i = if self.rows == 1 { 0 } else { path };
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, path: usize, col: usize) -> f64 {
        self.row(path)[col]
    }

    pub fn row_mut(&mut self, path: usize) -> &mut [f64] {
        &mut self.data[path * self.cols..(path + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Values of column `col` for paths `0..n_paths`.
    pub fn column(&self, col: usize, n_paths: usize) -> Vec<f64> {
        (0..n_paths).map(|i| self.get(i, col)).collect()
    }

    /// Expands a shared matrix to `rows` explicit copies.
    pub fn expanded(&self, rows: usize) -> Self {
        if !self.is_shared() {
            return self.clone();
        }
        let mut data = Vec::with_capacity(rows * self.cols);
        for _ in 0..rows {
            data.extend_from_slice(&self.data);
        }
        Self {
            rows,
            cols: self.cols,
            data,
        }
    }
}

/// Seeded Monte Carlo sample of Brownian increments and the impact and risk
/// processes on a time grid.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub seed: u64,
    pub n_paths: usize,
    pub grid: TimeGrid,
    /// `n_paths × N` Brownian increments `W_{t_{k+1}} - W_{t_k}`.
    pub brownian_increments: PathMatrix,
    /// `η` at each node; shared when the impact is deterministic.
    pub eta_paths: PathMatrix,
    /// `γ` at each node; always shared (risk families are deterministic).
    pub gamma_paths: PathMatrix,
}

impl PathEnsemble {
    /// Brownian motion `W` at every node of `path`.
    pub fn brownian_path(&self, path: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.grid.intervals() + 1);
        let mut acc = 0.0;
        w.push(0.0);
        for &dw in self.brownian_increments.row(path) {
            acc += dw;
            w.push(acc);
        }
        w
    }

    /// Whether `η` is the same on every path.
    pub fn is_deterministic(&self) -> bool {
        self.eta_paths.is_shared()
    }
}

fn fill_increments(grid: &TimeGrid, seed: u64, n_paths: usize) -> PathMatrix {
    let n = grid.intervals();
    let sqrt_h: Vec<f64> = (0..n).map(|k| grid.step(k).sqrt()).collect();
    let mut data = vec![0.0; n_paths * n];
    data.par_chunks_mut(BLOCK_PATHS * n)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block as u64);
            for row in chunk.chunks_mut(n) {
                for (dw, s) in row.iter_mut().zip(&sqrt_h) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *dw = s * z;
                }
            }
        });
    PathMatrix {
        rows: n_paths,
        cols: n,
        data,
    }
}

/// Samples `n_paths` paths of the model on `grid`.
///
/// GBM uses the exact lognormal transition. Deterministic impact families
/// produce a shared row. For the power family the value at `T` is `0` when
/// `β > 0`; every node before `T` is strictly positive.
pub fn sample_paths(
    impact: &ImpactModel,
    risk: &RiskModel,
    grid: &TimeGrid,
    seed: u64,
    n_paths: usize,
) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(Error::Argument("n_paths must be positive".into()));
    }
    impact.validate()?;
    risk.validate()?;
    let nodes = grid.nodes();
    let horizon = grid.horizon();
    let n = grid.intervals();
    let brownian_increments = fill_increments(grid, seed, n_paths);
    let eta_paths = match impact {
        ImpactModel::Gbm { eta0, mu, sigma } if *sigma > 0.0 => {
            let mut m = PathMatrix::zeros(n_paths, n + 1);
            let drift: Vec<f64> = (0..n).map(|k| (mu - 0.5 * sigma * sigma) * grid.step(k)).collect();
            m.data
                .par_chunks_mut(n + 1)
                .zip(brownian_increments.data.par_chunks(n))
                .for_each(|(row, dw)| {
                    // accumulate the log so the value at each node is one exp
                    let mut log_eta = eta0.ln();
                    row[0] = *eta0;
                    for k in 0..n {
                        log_eta += drift[k] + sigma * dw[k];
                        row[k + 1] = log_eta.exp();
                    }
                });
            m
        }
        ImpactModel::BrownianSquare => {
            let mut m = PathMatrix::zeros(n_paths, n + 1);
            m.data
                .par_chunks_mut(n + 1)
                .zip(brownian_increments.data.par_chunks(n))
                .for_each(|(row, dw)| {
                    let mut w = 0.0;
                    row[0] = 1.0;
                    for k in 0..n {
                        w += dw[k];
                        row[k + 1] = 1.0 + w * w;
                    }
                });
            m
        }
        _ => PathMatrix::shared(
            nodes
                .iter()
                .map(|&t| impact.deterministic_value(t, horizon).expect("deterministic family"))
                .collect(),
        ),
    };
    for (idx, &v) in eta_paths.data.iter().enumerate() {
        let k = idx % (n + 1);
        if k < n && !(v > 0.0 && v.is_finite()) {
            return Err(Error::Positivity(format!(
                "sampled η = {v} at node {k} of path {}",
                idx / (n + 1)
            )));
        }
    }
    let gamma_paths = PathMatrix::shared(nodes.iter().map(|&t| risk.value(t)).collect());
    Ok(PathEnsemble {
        seed,
        n_paths,
        grid: grid.clone(),
        brownian_increments,
        eta_paths,
        gamma_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_exponential_when_sigma_zero() {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let model = ImpactModel::Gbm {
            eta0: 1.0,
            mu: 1.0,
            sigma: 0.0,
        };
        let ens = sample_paths(&model, &RiskModel::Zero, &grid, 1, 5).unwrap();
        for i in 0..5 {
            assert!((ens.eta_paths.get(i, 10) - 1f64.exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_model_is_shared() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let ens = sample_paths(
            &ImpactModel::Constant { eta0: 2.0 },
            &RiskModel::Constant { c: 0.5 },
            &grid,
            0,
            3,
        )
        .unwrap();
        assert!(ens.is_deterministic());
        assert!((0..3).all(|i| ens.eta_paths.row(i).iter().all(|&v| v == 2.0)));
        assert_eq!(ens.brownian_increments.rows(), 3);
        assert_eq!(ens.brownian_increments.cols(), 4);
        assert_eq!(ens.gamma_paths.get(2, 4), 0.5);
    }

    #[test]
    fn same_seed_is_bit_identical_and_thread_count_free() {
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let model = ImpactModel::Gbm {
            eta0: 1.0,
            mu: 0.3,
            sigma: 0.4,
        };
        let a = sample_paths(&model, &RiskModel::Zero, &grid, 9, 1000).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool
            .install(|| sample_paths(&model, &RiskModel::Zero, &grid, 9, 1000))
            .unwrap();
        assert_eq!(a.eta_paths, b.eta_paths);
        assert_eq!(a.brownian_increments, b.brownian_increments);
        let c = sample_paths(&model, &RiskModel::Zero, &grid, 10, 1000).unwrap();
        assert_ne!(a.eta_paths, c.eta_paths);
    }

    #[test]
    fn rejects_empty_ensembles() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(sample_paths(&ImpactModel::Constant { eta0: 1.0 }, &RiskModel::Zero, &grid, 0, 0).is_err());
    }

    #[test]
    fn power_family_vanishes_only_at_horizon() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let ens = sample_paths(&ImpactModel::PowerSingular { beta: 0.5 }, &RiskModel::Zero, &grid, 0, 2).unwrap();
        assert_eq!(ens.eta_paths.get(1, 4), 0.0);
        assert!((ens.eta_paths.get(1, 3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn brownian_square_uses_the_increments() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let ens = sample_paths(&ImpactModel::BrownianSquare, &RiskModel::Zero, &grid, 3, 4).unwrap();
        for i in 0..4 {
            let w = ens.brownian_path(i);
            for (k, wk) in w.iter().enumerate() {
                assert!((ens.eta_paths.get(i, k) - (1.0 + wk * wk)).abs() < 1e-15);
            }
        }
    }
}
