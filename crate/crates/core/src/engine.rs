//! Cross-fitted debiased estimation.
//!
//! For each fold the regression and the representer are fitted on the other
//! folds and evaluated on the held-out rows. With
//! `c_i = m(W_i, gamma_l) + alpha_l(W_i) (Y_i - gamma_l(W_i))` the estimate is
//! `theta = mean(c)`, the scale is `sigma^2 = mean((c - theta)^2)` and the
//! interval is `theta +- z_{1 - a/2} sigma / sqrt(n)`.
//!
//! Training rows are handed to learners in canonical content order and sums
//! are correctly rounded, so the estimate depends only on fold contents.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Dataset, Obs};
use crate::error::{DmlError, Result};
use crate::folds::{partition_folds, FoldPartition};
use crate::functional::FunctionalSpec;
use crate::learners::{Dictionary, Predictor, RegressionLearner};
use crate::moment::moment_psi;
use crate::numeric::{exact_sum, fingerprint};
use crate::riesz::{RieszEstimate, RieszLearner};

/// Nuisances fitted on the complement of one fold.
#[derive(Debug, Clone)]
pub struct FoldFit {
    pub fold: usize,
    /// Held-out rows, ascending.
    pub held_out: Vec<usize>,
    /// Fingerprint of the training rows.
    pub fingerprint: u64,
    pub gamma: Predictor,
    pub alpha: RieszEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub size: usize,
    pub fingerprint: String,
    pub gamma_kind: String,
    pub alpha_kind: String,
    /// Held-out mean of `m + correction`.
    pub mean_contribution: f64,
    pub mean_m: f64,
    pub mean_correction: f64,
    pub max_abs_alpha: f64,
    /// Held-out rows whose representer evaluation hit the trim bound.
    pub trimmed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlResult {
    pub theta: f64,
    pub sigma: f64,
    /// `sigma / sqrt(n)`.
    pub se: f64,
    pub level: f64,
    pub critical_value: f64,
    pub ci: [f64; 2],
    pub n: usize,
    pub folds: Vec<FoldRecord>,
    /// `c_i - theta` per observation.
    pub psi: Vec<f64>,
    /// `c_i = m_i + correction_i` per observation.
    pub contributions: Vec<f64>,
}

impl DmlResult {
    pub fn half_width(&self) -> f64 {
        self.critical_value * self.se
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci[0] <= value && value <= self.ci[1]
    }
}

/// The `1 - a/2` standard normal quantile.
pub fn critical_value(a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(DmlError::InvalidArgument(format!("level must lie in (0, 1), got {a}")));
    }
    let z = Normal::standard();
    Ok(z.inverse_cdf(1.0 - a / 2.0))
}

pub(crate) fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Fits `(gamma_l, alpha_l)` on the complement of every fold.
pub fn cross_fit(
    data: &Dataset,
    spec: &FunctionalSpec,
    partition: &FoldPartition,
    gamma: &dyn RegressionLearner,
    riesz: &dyn RieszLearner,
    seed: u64,
) -> Result<Vec<FoldFit>> {
    if partition.n() != data.n() {
        return Err(DmlError::InvalidArgument(format!("partition covers {} rows, data has {}", partition.n(), data.n())));
    }
    (0..partition.n_folds())
        .into_par_iter()
        .map(|f| {
            let mut train = partition.training(f);
            let fp = fingerprint(&train);
            data.sort_canonical(&mut train);
            let sub = data.subset(&train);
            let s = fold_seed(seed, f);
            let g = gamma.fit(&sub, s).map_err(|e| e.in_fold(f))?;
            let a = riesz.fit(&sub, spec, s).map_err(|e| e.in_fold(f))?;
            Ok(FoldFit { fold: f, held_out: partition.held_out(f), fingerprint: fp, gamma: g, alpha: a })
        })
        .collect()
}

/// Evaluates the moments on the held-out rows and forms the estimate.
pub fn assemble(data: &Dataset, spec: &FunctionalSpec, fits: &[FoldFit], level: f64) -> Result<DmlResult> {
    let c_a = critical_value(level)?;
    let n = data.n();
    let mut contributions = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    let mut folds = Vec::with_capacity(fits.len());
    for fit in fits {
        let mut ms = Vec::with_capacity(fit.held_out.len());
        let mut corrs = Vec::with_capacity(fit.held_out.len());
        let mut max_abs_alpha = 0.0_f64;
        let mut trimmed = 0;
        for &i in &fit.held_out {
            if std::mem::replace(&mut seen[i], true) {
                return Err(DmlError::InvalidArgument(format!("row {i} is held out by more than one fold")));
            }
            let o = data.obs(i);
            let mv = moment_psi(&o, 0.0, &fit.gamma, &fit.alpha, spec).map_err(|e| e.in_fold(fit.fold))?;
            let a = fit.alpha.eval(&o).map_err(|e| e.in_fold(fit.fold))?;
            max_abs_alpha = max_abs_alpha.max(a.abs());
            if a.abs() >= fit.alpha.trim_bound() {
                trimmed += 1;
            }
            contributions[i] = mv.contribution();
            ms.push(mv.m_part);
            corrs.push(mv.correction);
        }
        let k = fit.held_out.len().max(1) as f64;
        let cs: Vec<f64> = fit.held_out.iter().map(|&i| contributions[i]).collect();
        folds.push(FoldRecord {
            fold: fit.fold,
            size: fit.held_out.len(),
            fingerprint: format!("{:016x}", fit.fingerprint),
            gamma_kind: fit.gamma.kind().into(),
            alpha_kind: fit.alpha.kind().into(),
            mean_contribution: exact_sum(cs) / k,
            mean_m: exact_sum(ms) / k,
            mean_correction: exact_sum(corrs) / k,
            max_abs_alpha,
            trimmed,
        });
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(DmlError::InvalidArgument(format!("row {i} is not held out by any fold")));
    }
    if let Some(i) = contributions.iter().position(|c| !c.is_finite()) {
        return Err(DmlError::InvalidData(format!("moment at row {i} is not finite")));
    }
    let nf = n as f64;
    let theta = exact_sum(contributions.iter().copied()) / nf;
    let psi: Vec<f64> = contributions.iter().map(|c| c - theta).collect();
    let sigma = (exact_sum(psi.iter().map(|p| p * p)) / nf).sqrt();
    let se = sigma / nf.sqrt();
    let half = c_a * se;
    Ok(DmlResult { theta, sigma, se, level, critical_value: c_a, ci: [theta - half, theta + half], n, folds, psi, contributions })
}

pub fn dml_estimate_with_partition(
    data: &Dataset,
    spec: &FunctionalSpec,
    gamma: &dyn RegressionLearner,
    riesz: &dyn RieszLearner,
    partition: &FoldPartition,
    level: f64,
    seed: u64,
) -> Result<DmlResult> {
    let fits = cross_fit(data, spec, partition, gamma, riesz, seed)?;
    assemble(data, spec, &fits, level)
}

/// Cross-fitted estimate with `folds` folds drawn from `seed`.
pub fn dml_estimate(
    data: &Dataset,
    spec: &FunctionalSpec,
    gamma: &dyn RegressionLearner,
    riesz: &dyn RieszLearner,
    folds: usize,
    level: f64,
    seed: u64,
) -> Result<DmlResult> {
    let partition = partition_folds(data.n(), folds, seed)?;
    dml_estimate_with_partition(data, spec, gamma, riesz, &partition, level, seed)
}

/// The same moment pipeline with known nuisances and no fitting.
pub fn oracle_estimate(data: &Dataset, spec: &FunctionalSpec, gamma0: &Predictor, alpha0: &RieszEstimate, level: f64) -> Result<DmlResult> {
    let fit = FoldFit { fold: 0, held_out: (0..data.n()).collect(), fingerprint: 0, gamma: gamma0.clone(), alpha: alpha0.clone() };
    assemble(data, spec, &[fit], level)
}

/// How a known nuisance is spoiled for a robustness probe.
#[derive(Debug, Clone)]
pub enum Corruption {
    /// Replace the nuisance by zero.
    Zero,
    /// Add `scale * b_basis` from the dictionary.
    Shift { dict: Arc<Dictionary>, basis: usize, scale: f64 },
}

impl Corruption {
    pub fn apply_to_regression(&self, gamma0: &Predictor) -> Predictor {
        match self {
            Corruption::Zero => Predictor::function_with_derivative(|_| 0.0, |_| 0.0),
            Corruption::Shift { dict, basis, scale } => {
                let (g, d, j, s) = (gamma0.clone(), dict.clone(), *basis, *scale);
                let f = move |o: &Obs<'_>| g.predict(o) + s * d.expand(o)[j];
                let (g, d) = (gamma0.clone(), dict.clone());
                let df = move |o: &Obs<'_>| g.d_derivative(o).map_or(f64::NAN, |v| v + s * d.d_derivative(o)[j]);
                Predictor::function_with_derivative(f, df)
            }
        }
    }

    pub fn apply_to_riesz(&self, alpha0: &RieszEstimate) -> Result<RieszEstimate> {
        match self {
            Corruption::Zero => Ok(RieszEstimate::zero()),
            Corruption::Shift { dict, basis, scale } => {
                let (a, d, j, s) = (alpha0.clone(), dict.clone(), *basis, *scale);
                let bound = alpha0.trim_bound();
                RieszEstimate::function(move |o| a.eval(o).map_or(f64::NAN, |v| v + s * d.expand(o)[j]), bound)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessProbe {
    /// Correct regression, corrupted representer.
    pub wrong_alpha: DmlResult,
    /// Corrupted regression, correct representer.
    pub wrong_gamma: DmlResult,
}

pub fn double_robustness_probe(
    data: &Dataset,
    spec: &FunctionalSpec,
    gamma0: &Predictor,
    alpha0: &RieszEstimate,
    corrupt_gamma: &Corruption,
    corrupt_alpha: &Corruption,
    level: f64,
) -> Result<RobustnessProbe> {
    let wrong_alpha = oracle_estimate(data, spec, gamma0, &corrupt_alpha.apply_to_riesz(alpha0)?, level)?;
    let wrong_gamma = oracle_estimate(data, spec, &corrupt_gamma.apply_to_regression(gamma0), alpha0, level)?;
    Ok(RobustnessProbe { wrong_alpha, wrong_gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::FixedRegression;
    use crate::riesz::FixedRiesz;

    #[test]
    fn critical_values() {
        assert!((critical_value(0.05).unwrap() - 1.959_963_984_540_054).abs() < 1e-8);
        assert!((critical_value(0.20).unwrap() - 1.281_551_565_544_600_4).abs() < 1e-8);
        assert!(critical_value(0.0).is_err());
        assert!(critical_value(1.0).is_err());
    }

    #[test]
    fn hand_worked_four_rows() {
        // gamma = 1 + d, alpha = 2 d - 1 (constant learners)
        // rows (y, d): (3, 1), (0, 0), (1, 1), (2, 0)
        // m = 1 for every row; residuals 1, -1, -1, 1; alpha 1, -1, 1, -1
        // contributions 1 + 1, 1 + 1, 1 - 1, 1 - 1 = 2, 2, 0, 0
        // theta = 1, psi = 1, 1, -1, -1, sigma = 1
        let rows = [(3.0, 1.0), (0.0, 0.0), (1.0, 1.0), (2.0, 0.0)];
        let data = Dataset::from_rows(rows.iter().map(|&(y, d)| (y, d, None, &[][..]))).unwrap();
        let gamma = FixedRegression(Predictor::function(|o| 1.0 + o.d));
        let alpha = FixedRiesz(RieszEstimate::function(|o| 2.0 * o.d - 1.0, 50.0).unwrap());
        let r = dml_estimate(&data, &FunctionalSpec::ate(), &gamma, &alpha, 2, 0.05, 3).unwrap();
        assert_eq!(r.theta, 1.0);
        assert_eq!(r.contributions, vec![2.0, 2.0, 0.0, 0.0]);
        assert_eq!(r.sigma, 1.0);
        assert_eq!(r.se, 0.5);
        assert_eq!(r.ci, [1.0 - 0.5 * r.critical_value, 1.0 + 0.5 * r.critical_value]);
    }

    #[test]
    fn zero_representer_reduces_to_plug_in() {
        let rows = [(0.3, 1.0, 0.5), (1.1, 0.0, -0.2), (-0.4, 1.0, 0.9), (0.0, 0.0, 0.1), (2.0, 1.0, 0.0), (0.7, 0.0, 0.3)];
        let xs: Vec<[f64; 1]> = rows.iter().map(|r| [r.2]).collect();
        let data = Dataset::from_rows(rows.iter().zip(&xs).map(|(r, x)| (r.0, r.1, None, &x[..]))).unwrap();
        let g = Predictor::function(|o| o.d * (1.0 + o.x[0]));
        let r = dml_estimate(&data, &FunctionalSpec::ate(), &FixedRegression(g.clone()), &FixedRiesz(RieszEstimate::zero()), 3, 0.05, 0).unwrap();
        let plug_in = exact_sum(data.iter().map(|o| FunctionalSpec::ate().m(&o, &g).unwrap())) / data.n() as f64;
        assert_eq!(r.theta, plug_in);
    }

    #[test]
    fn oracle_estimate_ignores_folds() {
        let rows = [(0.3, 1.0), (1.1, 0.0), (-0.4, 1.0), (0.0, 0.0)];
        let data = Dataset::from_rows(rows.iter().map(|&(y, d)| (y, d, None, &[][..]))).unwrap();
        let g = Predictor::function(|o| 0.5 * o.d);
        let a = RieszEstimate::function(|o| 4.0 * o.d - 2.0, 50.0).unwrap();
        let r = oracle_estimate(&data, &FunctionalSpec::ate(), &g, &a, 0.05).unwrap();
        let fixed = (FixedRegression(g), FixedRiesz(a));
        for (l, s) in [(2, 0), (2, 9)] {
            let cf = dml_estimate(&data, &FunctionalSpec::ate(), &fixed.0, &fixed.1, l, 0.05, s).unwrap();
            assert_eq!(cf.theta, r.theta);
        }
    }

    #[test]
    fn fold_errors_name_the_fold() {
        let rows = [(0.3, 1.0), (1.1, 0.0), (-0.4, 1.0), (0.0, 0.0)];
        let data = Dataset::from_rows(rows.iter().map(|&(y, d)| (y, d, None, &[][..]))).unwrap();
        let g = FixedRegression(Predictor::function(|o| o.d));
        let err = dml_estimate(&data, &FunctionalSpec::avg_deriv(), &g, &FixedRiesz(RieszEstimate::zero()), 2, 0.05, 0).unwrap_err();
        assert!(matches!(err, DmlError::Fold { .. }));
        assert!(err.to_string().starts_with("fold "));
    }
}
