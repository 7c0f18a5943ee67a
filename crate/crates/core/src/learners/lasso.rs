//! Lasso regression by cyclic coordinate descent.
//!
//! Minimizes `1/2 * mean((y - b0 - Z beta)^2) + lambda * ||beta||_1` where
//! `Z` is the column-standardized design (mean 0, population sd 1) and the
//! intercept `b0` is unpenalized. Coefficients are reported on the original
//! scale. Columns with zero variance get a zero coefficient.

use crate::folds::FoldPartition;
use crate::linalg::Matrix;
use crate::numeric::{sample_sd, soft_threshold};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Stop when the largest standardized coefficient change in a sweep is below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { tolerance: 1e-9, max_sweeps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub intercept: f64,
    /// Coefficients on the original feature scale.
    pub coef: Vec<f64>,
    /// Coefficients on the standardized scale (the penalized ones).
    pub std_coef: Vec<f64>,
    pub lambda: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Largest violation of the optimality conditions on the standardized problem.
    pub kkt_residual: f64,
}

impl LassoFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// `1.1 * sd(y) * sqrt(log(p) / n)`, with `p` floored at 2.
pub fn default_lambda(y: &[f64], p: usize) -> f64 {
    let n = y.len() as f64;
    1.1 * sample_sd(y) * ((p.max(2) as f64).ln() / n).sqrt()
}

struct Standardized {
    /// Column-major standardized columns; empty for dropped columns.
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    sds: Vec<f64>,
    y_mean: f64,
    yc: Vec<f64>,
}

fn standardize(x: &Matrix, y: &[f64]) -> Standardized {
    let n = x.rows();
    let nf = n as f64;
    let mut cols = Vec::with_capacity(x.cols());
    let mut means = Vec::with_capacity(x.cols());
    let mut sds = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let c = x.column(j);
        let m = c.iter().sum::<f64>() / nf;
        let var = c.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / nf;
        let sd = var.sqrt();
        means.push(m);
        if sd > 1e-12 * (1.0 + m.abs()) {
            sds.push(sd);
            cols.push(c.iter().map(|a| (a - m) / sd).collect());
        } else {
            sds.push(0.0);
            cols.push(Vec::new());
        }
    }
    let y_mean = y.iter().sum::<f64>() / nf;
    let yc = y.iter().map(|a| a - y_mean).collect();
    Standardized { cols, means, sds, y_mean, yc }
}

pub fn fit_lasso(x: &Matrix, y: &[f64], lambda: f64, opts: &LassoOptions) -> LassoFit {
    assert_eq!(x.rows(), y.len(), "design and response lengths differ");
    assert!(lambda >= 0.0, "lambda must be nonnegative");
    let n = x.rows();
    let nf = n as f64;
    let p = x.cols();
    let s = standardize(x, y);
    let norms: Vec<f64> = s.cols.iter().map(|c| c.iter().map(|a| a * a).sum::<f64>() / nf).collect();

    let mut beta = vec![0.0; p];
    let mut resid = s.yc.clone();
    let mut sweeps = 0;
    let mut converged = false;

    let update = |j: usize, beta: &mut [f64], resid: &mut [f64]| -> f64 {
        let col = &s.cols[j];
        if col.is_empty() {
            return 0.0;
        }
        let old = beta[j];
        let rho = col.iter().zip(resid.iter()).map(|(a, r)| a * r).sum::<f64>() / nf + norms[j] * old;
        let new = soft_threshold(rho, lambda) / norms[j];
        let delta = new - old;
        if delta != 0.0 {
            for (r, a) in resid.iter_mut().zip(col) {
                *r -= a * delta;
            }
            beta[j] = new;
        }
        delta.abs()
    };

    // Full sweeps alternate with sweeps over the current active set.
    while sweeps < opts.max_sweeps {
        let mut max_delta = 0.0_f64;
        for j in 0..p {
            max_delta = max_delta.max(update(j, &mut beta, &mut resid));
        }
        sweeps += 1;
        if max_delta < opts.tolerance {
            converged = true;
            break;
        }
        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        while sweeps < opts.max_sweeps {
            let mut inner = 0.0_f64;
            for &j in &active {
                inner = inner.max(update(j, &mut beta, &mut resid));
            }
            sweeps += 1;
            if inner < opts.tolerance {
                break;
            }
        }
    }

    let kkt_residual = (0..p)
        .filter(|&j| !s.cols[j].is_empty())
        .map(|j| {
            let grad = -s.cols[j].iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf;
            if beta[j] != 0.0 {
                (grad + lambda * beta[j].signum()).abs()
            } else {
                (grad.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    if !converged {
        log::warn!("lasso hit the sweep cap ({}) with KKT residual {kkt_residual:.3e}", opts.max_sweeps);
    }

    let coef: Vec<f64> = (0..p).map(|j| if s.sds[j] > 0.0 { beta[j] / s.sds[j] } else { 0.0 }).collect();
    let intercept = s.y_mean - coef.iter().zip(&s.means).map(|(c, m)| c * m).sum::<f64>();
    LassoFit { intercept, coef, std_coef: beta, lambda, sweeps, converged, kkt_residual }
}

/// Picks the grid value with the smallest pooled held-out squared error over
/// the folds of `partition`; ties go to the larger `lambda`.
pub fn cross_val_lambda(x: &Matrix, y: &[f64], grid: &[f64], partition: &FoldPartition, opts: &LassoOptions) -> f64 {
    assert!(!grid.is_empty(), "lambda grid must be nonempty");
    if grid.len() == 1 {
        return grid[0];
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> =
        (0..partition.n_folds()).map(|f| (partition.training(f), partition.held_out(f))).collect();
    let mut best = (f64::INFINITY, f64::NEG_INFINITY);
    for &lambda in grid {
        let mut sse = 0.0;
        for (train, test) in &splits {
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let fit = fit_lasso(&x.select_rows(train), &ytr, lambda, opts);
            sse += test.iter().map(|&i| (y[i] - fit.predict_row(x.row(i))).powi(2)).sum::<f64>();
        }
        let mse = sse / y.len() as f64;
        if mse < best.0 || (mse == best.0 && lambda > best.1) {
            best = (mse, lambda);
        }
    }
    best.1
}
