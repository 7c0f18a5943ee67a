//! Riesz representer estimates.
//!
//! The lasso estimate minimizes `rho' G rho - 2 M' rho + 2 sum_j lambda_j |rho_j|`
//! with `G = E_n[b b'] + 1e-10 I` and `M_j = E_n[m(W, b_j)]`, so that
//! `rho' b(w)` approximates the representer of `m` on the dictionary span.
//! Closed forms are available for the treatment-effect and discontinuity
//! designs. All estimates are clamped to `[-trim, trim]` on evaluation.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Obs};
use crate::error::{DmlError, Result};
use crate::functional::{FunctionalKind, FunctionalSpec, Localizer};
use crate::kernel::LocalWeighting;
use crate::learners::{Dictionary, DictionaryKind, ObsFn};
use crate::linalg::{dot, Matrix};
use crate::numeric::soft_threshold;

pub const GRAM_JITTER: f64 = 1e-10;
/// Trim bound for global functionals; local ones use this over the bandwidth.
pub const DEFAULT_TRIM: f64 = 50.0;

pub fn trim(value: f64, bound: f64) -> f64 {
    value.clamp(-bound, bound)
}

pub fn default_trim(spec: &FunctionalSpec) -> f64 {
    spec.bandwidth().map_or(DEFAULT_TRIM, |h| DEFAULT_TRIM / h)
}

#[derive(Clone)]
pub enum RieszForm {
    /// `rho' b(w)`.
    Linear { dict: Arc<Dictionary>, coef: Vec<f64> },
    /// `l(v) (d / pi(v, x) - (1 - d) / (1 - pi(v, x)))`, with `l = 1` when global.
    ClosedFormCate { propensity: ObsFn, weighting: Option<LocalWeighting>, delta: f64 },
    /// `l_h^+(d) - l_h^-(d)`.
    ClosedFormRdd { right: LocalWeighting, left: LocalWeighting },
    /// A global estimate multiplied by a localization weight.
    Localized { global: Box<RieszEstimate>, localizer: Localizer },
    Function(ObsFn),
}

#[derive(Clone)]
pub struct RieszEstimate {
    form: RieszForm,
    trim: f64,
}

impl fmt::Debug for RieszEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RieszEstimate").field("kind", &self.kind()).field("trim", &self.trim).finish()
    }
}

impl RieszEstimate {
    pub fn new(form: RieszForm, trim: f64) -> Result<Self> {
        if !(trim > 0.0) {
            return Err(DmlError::InvalidArgument(format!("trim bound must be positive, got {trim}")));
        }
        Ok(RieszEstimate { form, trim })
    }

    pub fn function(f: impl Fn(&Obs<'_>) -> f64 + Send + Sync + 'static, trim: f64) -> Result<Self> {
        Self::new(RieszForm::Function(Arc::new(f)), trim)
    }

    /// The identically zero representer.
    pub fn zero() -> Self {
        RieszEstimate { form: RieszForm::Function(Arc::new(|_| 0.0)), trim: f64::INFINITY }
    }

    pub fn kind(&self) -> &'static str {
        match self.form {
            RieszForm::Linear { .. } => "lasso-qp",
            RieszForm::ClosedFormCate { .. } => "closed-form-cate",
            RieszForm::ClosedFormRdd { .. } => "closed-form-rdd",
            RieszForm::Localized { .. } => "localized",
            RieszForm::Function(_) => "function",
        }
    }

    pub fn form(&self) -> &RieszForm {
        &self.form
    }

    pub fn trim_bound(&self) -> f64 {
        self.trim
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.form {
            RieszForm::Linear { coef, .. } => Some(coef),
            _ => None,
        }
    }

    pub fn eval_untrimmed(&self, obs: &Obs<'_>) -> Result<f64> {
        match &self.form {
            RieszForm::Linear { dict, coef } => Ok(dot(coef, &dict.expand(obs))),
            RieszForm::ClosedFormCate { propensity, weighting, delta } => {
                let pi = propensity(obs);
                if !(pi > *delta && pi < 1.0 - delta) {
                    return Err(DmlError::OverlapViolation { value: pi, delta: *delta });
                }
                let w = weighting.as_ref().map_or(1.0, |l| l.weight_obs(obs));
                Ok(w * (obs.d / pi - (1.0 - obs.d) / (1.0 - pi)))
            }
            RieszForm::ClosedFormRdd { right, left } => Ok(right.weight_obs(obs) - left.weight_obs(obs)),
            RieszForm::Localized { global, localizer } => {
                let w = localizer.weight(obs);
                if w == 0.0 {
                    return Ok(0.0);
                }
                Ok(w * global.eval(obs)?)
            }
            RieszForm::Function(f) => Ok(f(obs)),
        }
    }

    pub fn eval(&self, obs: &Obs<'_>) -> Result<f64> {
        Ok(trim(self.eval_untrimmed(obs)?, self.trim))
    }
}

/// `M_j = E_n[m(W, b_j)]`.
pub fn riesz_moments(dict: &Dictionary, spec: &FunctionalSpec, data: &Dataset) -> Vec<f64> {
    moments_with(dict, data, |o| spec.m_basis(o, dict))
}

fn moments_with(dict: &Dictionary, data: &Dataset, m_basis: impl Fn(&Obs<'_>) -> Vec<f64>) -> Vec<f64> {
    let mut acc = vec![0.0; dict.len()];
    for o in data.iter() {
        for (a, v) in acc.iter_mut().zip(m_basis(&o)) {
            *a += v;
        }
    }
    let n = data.n() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// `E_n[b b'] + 1e-10 I`.
pub fn riesz_gram(design: &Matrix) -> Matrix {
    let mut g = design.gram();
    for j in 0..g.rows() {
        g.set(j, j, g.get(j, j) + GRAM_JITTER);
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    /// Stop when the largest `sqrt(G_jj) |delta rho_j|` in a full sweep is below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions { tolerance: 1e-11, max_sweeps: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpFit {
    pub coef: Vec<f64>,
    pub objective: f64,
    /// Objective after each full sweep, starting from `rho = 0`.
    pub trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

pub fn qp_objective(g: &Matrix, m: &[f64], penalties: &[f64], rho: &[f64]) -> f64 {
    let grho = g.mul_vec(rho);
    dot(rho, &grho) - 2.0 * dot(m, rho) + 2.0 * penalties.iter().zip(rho).map(|(l, r)| l * r.abs()).sum::<f64>()
}

/// Minimizes `rho' G rho - 2 M' rho + 2 lambda ||rho||_1`.
pub fn solve_riesz_qp(g: &Matrix, m: &[f64], lambda: f64, opts: &QpOptions) -> QpFit {
    solve_weighted_qp(g, m, &vec![lambda; m.len()], opts)
}

fn kkt_residual(grho: &[f64], m: &[f64], penalties: &[f64], rho: &[f64]) -> f64 {
    (0..rho.len())
        .map(|j| {
            let grad = grho[j] - m[j];
            if rho[j] != 0.0 {
                (grad + penalties[j] * rho[j].signum()).abs()
            } else {
                (grad.abs() - penalties[j]).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimizer of the smooth objective restricted to the current support with
/// the current signs: `G_AA rho_A = M_A - lambda_A sign(rho_A)`.
fn face_solution(g: &Matrix, m: &[f64], penalties: &[f64], rho: &[f64], active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let a = nalgebra::DMatrix::from_fn(k, k, |r, c| g.get(active[r], active[c]));
    let b = nalgebra::DVector::from_iterator(k, active.iter().map(|&j| m[j] - penalties[j] * rho[j].signum()));
    let sol = a.cholesky()?.solve(&b);
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

/// Coordinate descent with a per-coordinate penalty `lambda_j |rho_j|`.
///
/// Between sweeps the solver jumps toward the exact minimizer on the current
/// support, stopping where a penalized coefficient would change sign. This
/// keeps collinear dictionaries from stalling plain coordinate descent.
pub fn solve_weighted_qp(g: &Matrix, m: &[f64], penalties: &[f64], opts: &QpOptions) -> QpFit {
    let p = m.len();
    assert_eq!(g.rows(), p);
    assert_eq!(penalties.len(), p);
    let mut rho = vec![0.0; p];
    // grho = G rho, kept current after every coordinate move
    let mut grho = vec![0.0; p];
    let objective = |rho: &[f64], grho: &[f64]| {
        dot(rho, grho) - 2.0 * dot(m, rho) + 2.0 * penalties.iter().zip(rho).map(|(l, r)| l * r.abs()).sum::<f64>()
    };
    let update = |j: usize, rho: &mut [f64], grho: &mut [f64]| -> f64 {
        let gjj = g.get(j, j);
        let z = m[j] - (grho[j] - gjj * rho[j]);
        let new = soft_threshold(z, penalties[j]) / gjj;
        let delta = new - rho[j];
        if delta != 0.0 {
            let col = g.row(j);
            for (a, c) in grho.iter_mut().zip(col) {
                *a += c * delta;
            }
            rho[j] = new;
        }
        delta.abs() * gjj.sqrt()
    };
    let kkt_tol = 100.0 * opts.tolerance * (1.0 + m.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
    let mut trace = vec![0.0];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        let mut max_delta = 0.0_f64;
        for j in 0..p {
            max_delta = max_delta.max(update(j, &mut rho, &mut grho));
        }
        sweeps += 1;
        trace.push(objective(&rho, &grho));
        if max_delta < opts.tolerance {
            converged = true;
            break;
        }
        let active: Vec<usize> = (0..p).filter(|&j| rho[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        if let Some(target) = face_solution(g, m, penalties, &rho, &active) {
            // largest step keeping every penalized sign
            let mut t = 1.0_f64;
            for (k, &j) in active.iter().enumerate() {
                if penalties[j] > 0.0 && target[k] * rho[j] < 0.0 {
                    t = t.min(rho[j] / (rho[j] - target[k]));
                }
            }
            let mut cand = rho.clone();
            for (k, &j) in active.iter().enumerate() {
                let v = rho[j] + t * (target[k] - rho[j]);
                cand[j] = if penalties[j] > 0.0 && v * rho[j] <= 0.0 { 0.0 } else { v };
            }
            let cand_g = g.mul_vec(&cand);
            let current = objective(&rho, &g.mul_vec(&rho));
            let next = objective(&cand, &cand_g);
            if next <= current {
                rho = cand;
                grho = cand_g;
                trace.push(next);
                if kkt_residual(&grho, m, penalties, &rho) <= kkt_tol {
                    converged = true;
                    break;
                }
            }
        }
    }
    // refresh G rho to shed accumulated drift before reporting
    let grho = g.mul_vec(&rho);
    let kkt_residual = kkt_residual(&grho, m, penalties, &rho);
    if !converged {
        log::warn!("riesz lasso hit the sweep cap ({}) with KKT residual {kkt_residual:.3e}", opts.max_sweeps);
    }
    let objective = objective(&rho, &grho);
    QpFit { coef: rho, objective, trace, sweeps, converged, kkt_residual }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RieszPenalty {
    /// `c * max_j |M_j| / s_j * sqrt(ln p / n)` on the scale-free problem.
    Auto {
        #[serde(default = "RieszPenalty::default_c")]
        c: f64,
    },
    /// A single `lambda` applied to every raw coefficient.
    Fixed { lambda: f64 },
}

impl RieszPenalty {
    fn default_c() -> f64 {
        0.5
    }
}

impl Default for RieszPenalty {
    fn default() -> Self {
        RieszPenalty::Auto { c: Self::default_c() }
    }
}

/// Fits the lasso representer of `spec` on `data`.
pub fn fit_riesz_lasso(dict: Arc<Dictionary>, spec: &FunctionalSpec, data: &Dataset, penalty: RieszPenalty, trim: f64) -> Result<RieszEstimate> {
    let m = riesz_moments(&dict, spec, data);
    fit_from_moments(dict, data, m, penalty, trim)
}

/// Fits the representer of the unlocalized part of `spec` (weight one).
pub fn fit_global_riesz_lasso(dict: Arc<Dictionary>, spec: &FunctionalSpec, data: &Dataset, penalty: RieszPenalty, trim: f64) -> Result<RieszEstimate> {
    let base = spec.base();
    let m = moments_with(&dict, data, |o| base.eval_basis(o, &dict));
    fit_from_moments(dict, data, m, penalty, trim)
}

fn fit_from_moments(dict: Arc<Dictionary>, data: &Dataset, m: Vec<f64>, penalty: RieszPenalty, trim: f64) -> Result<RieszEstimate> {
    let design = dict.design(data);
    let g = riesz_gram(&design);
    let p = dict.len();
    let penalties = match penalty {
        RieszPenalty::Fixed { lambda } => {
            if !(lambda >= 0.0) {
                return Err(DmlError::InvalidArgument(format!("riesz penalty must be nonnegative, got {lambda}")));
            }
            vec![lambda; p]
        }
        RieszPenalty::Auto { c } => {
            // loadings put every non-constant element on unit scale; the constant is unpenalized
            let scales: Vec<f64> = (0..p)
                .map(|j| {
                    let col = design.column(j);
                    let mean = col.iter().sum::<f64>() / col.len() as f64;
                    (col.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt()
                })
                .collect();
            let top = (0..p).filter(|&j| scales[j] > 0.0).map(|j| m[j].abs() / scales[j]).fold(0.0, f64::max);
            let lambda = c * top * ((p.max(2) as f64).ln() / data.n() as f64).sqrt();
            scales.iter().map(|s| lambda * s).collect()
        }
    };
    let fit = solve_weighted_qp(&g, &m, &penalties, &QpOptions::default());
    RieszEstimate::new(RieszForm::Linear { dict, coef: fit.coef }, trim)
}

/// `l(v) (d / pi - (1 - d) / (1 - pi))`; evaluation fails where `pi` leaves `(delta, 1 - delta)`.
pub fn closed_form_cate_riesz(propensity: ObsFn, weighting: Option<LocalWeighting>, delta: f64, trim: f64) -> Result<RieszEstimate> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(DmlError::InvalidArgument(format!("overlap delta must lie in (0, 1/2), got {delta}")));
    }
    RieszEstimate::new(RieszForm::ClosedFormCate { propensity, weighting, delta }, trim)
}

pub fn closed_form_rdd_riesz(right: LocalWeighting, left: LocalWeighting, trim: f64) -> Result<RieszEstimate> {
    RieszEstimate::new(RieszForm::ClosedFormRdd { right, left }, trim)
}

/// `l(w) * alpha(w)`, clamped at `trim` after the multiplication.
pub fn localize_riesz(global: RieszEstimate, localizer: Localizer, trim: f64) -> Result<RieszEstimate> {
    RieszEstimate::new(RieszForm::Localized { global: Box::new(global), localizer }, trim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RieszStrategy {
    /// Fit the representer of the unlocalized functional, then multiply by the weight.
    #[default]
    Localize,
    /// Fit the representer of the weighted functional directly.
    Direct,
    /// Closed form; discontinuity designs only.
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RieszConfig {
    #[serde(default = "RieszConfig::default_dictionary")]
    pub dictionary: DictionaryKind,
    #[serde(default)]
    pub strategy: RieszStrategy,
    #[serde(default)]
    pub penalty: RieszPenalty,
    /// Defaults to 50 for global kinds and 50/h for local kinds.
    #[serde(default)]
    pub trim: Option<f64>,
}

impl RieszConfig {
    fn default_dictionary() -> DictionaryKind {
        DictionaryKind::Low
    }

    pub fn lasso(dictionary: DictionaryKind) -> Self {
        RieszConfig { dictionary, strategy: RieszStrategy::default(), penalty: RieszPenalty::default(), trim: None }
    }

    pub fn effective_trim(&self, spec: &FunctionalSpec) -> f64 {
        self.trim.unwrap_or_else(|| default_trim(spec))
    }
}

impl Default for RieszConfig {
    fn default() -> Self {
        Self::lasso(Self::default_dictionary())
    }
}

/// Estimates the representer of `spec` from training rows.
pub trait RieszLearner: Send + Sync {
    fn fit(&self, train: &Dataset, spec: &FunctionalSpec, seed: u64) -> Result<RieszEstimate>;
}

impl RieszLearner for RieszConfig {
    fn fit(&self, train: &Dataset, spec: &FunctionalSpec, _seed: u64) -> Result<RieszEstimate> {
        let trim = self.effective_trim(spec);
        let dict = || Arc::new(Dictionary::for_data(self.dictionary, train));
        match (self.strategy, spec.localizer()) {
            (RieszStrategy::ClosedForm, Some(Localizer::Discontinuity { right, left })) => closed_form_rdd_riesz(*right, *left, trim),
            (RieszStrategy::ClosedForm, _) => Err(DmlError::InvalidArgument(format!(
                "closed-form representer needs the propensity for {}; only rdd is supported",
                spec.kind().name()
            ))),
            (RieszStrategy::Localize, Some(localizer)) => {
                let global = fit_global_riesz_lasso(dict(), spec, train, self.penalty, DEFAULT_TRIM)?;
                localize_riesz(global, *localizer, trim)
            }
            _ => fit_riesz_lasso(dict(), spec, train, self.penalty, trim),
        }
    }
}

/// Returns a fixed representer regardless of the training rows.
#[derive(Debug, Clone)]
pub struct FixedRiesz(pub RieszEstimate);

impl RieszLearner for FixedRiesz {
    fn fit(&self, _train: &Dataset, _spec: &FunctionalSpec, _seed: u64) -> Result<RieszEstimate> {
        Ok(self.0.clone())
    }
}

/// True when the strategy fits a representer that does not depend on the
/// localization, so one global fit per fold can serve many windows.
pub fn shares_global_fit(config: &RieszConfig, kind: FunctionalKind) -> bool {
    config.strategy == RieszStrategy::Localize && kind.is_local()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Kernel, KernelKind, Side};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_qp(seed: u64, p: usize) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..3 * p).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let g = riesz_gram(&Matrix::from_rows(&rows));
        let m = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        (g, m)
    }

    #[test]
    fn trim_clamps() {
        assert_eq!(trim(5.0, 3.0), 3.0);
        assert_eq!(trim(-5.0, 3.0), -3.0);
        assert_eq!(trim(1.0, 3.0), 1.0);
    }

    #[test]
    fn huge_penalty_gives_zero() {
        let (g, m) = random_qp(1, 4);
        let fit = solve_riesz_qp(&g, &m, 1e6, &QpOptions::default());
        assert!(fit.coef.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn unpenalized_solution_solves_normal_equations() {
        let (g, m) = random_qp(2, 3);
        let fit = solve_riesz_qp(&g, &m, 0.0, &QpOptions::default());
        let r = g.mul_vec(&fit.coef);
        assert!(r.iter().zip(&m).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    proptest! {
        #[test]
        fn objective_never_increases_and_kkt_holds(seed in 0u64..1000, p in 1usize..8, lambda in 0.0f64..0.5) {
            let (g, m) = random_qp(seed, p);
            let fit = solve_riesz_qp(&g, &m, lambda, &QpOptions::default());
            prop_assert!(fit.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs())));
            prop_assert!(fit.kkt_residual < 1e-7);
        }

        #[test]
        fn trim_is_idempotent(a in -1e3f64..1e3, b in 1e-3f64..1e2) {
            prop_assert_eq!(trim(trim(a, b), b), trim(a, b));
        }
    }

    fn obs_at(d: f64, v: f64) -> (f64, f64, Option<f64>) {
        (0.0, d, Some(v))
    }

    #[test]
    fn cate_closed_form_at_half_propensity() {
        let a = closed_form_cate_riesz(Arc::new(|_| 0.5), None, 0.01, 50.0).unwrap();
        let x = [0.0];
        let (y, d, v) = obs_at(1.0, 0.0);
        assert_eq!(a.eval(&Obs { y, d, v, x: &x }).unwrap(), 2.0);
        assert_eq!(a.eval(&Obs { y, d: 0.0, v, x: &x }).unwrap(), -2.0);
    }

    #[test]
    fn cate_closed_form_rejects_poor_overlap() {
        let a = closed_form_cate_riesz(Arc::new(|_| 0.995), None, 0.01, 50.0).unwrap();
        let err = a.eval(&Obs { y: 0.0, d: 1.0, v: None, x: &[] }).unwrap_err();
        assert_eq!(err.kind(), "overlap-violation");
    }

    #[test]
    fn rdd_closed_form_uses_disjoint_half_windows() {
        let ds: Vec<f64> = (-10..10).map(|i| (i as f64 + 0.5) / 20.0).collect();
        let h = 0.2;
        let right = LocalWeighting::fit(Kernel::uniform_half(), 0.0, h, Side::Right, &ds).unwrap();
        let left = LocalWeighting::fit(Kernel::uniform_half(), 0.0, h, Side::Left, &ds).unwrap();
        let a = closed_form_rdd_riesz(right, left, 1e3).unwrap();
        let at = |d: f64| a.eval(&Obs { y: 0.0, d, v: None, x: &[] }).unwrap();
        assert_eq!(at(0.1), right.weight(0.1));
        assert!(at(0.1) > 0.0);
        assert_eq!(left.weight(0.1), 0.0);
        assert_eq!(at(h), 0.0);
        // symmetric grid: the two half-windows hold equally many points
        let mean: f64 = ds.iter().map(|&d| at(d)).sum::<f64>() / ds.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn localization_by_unit_weight_is_identity() {
        let vs = [0.0; 5];
        let w = LocalWeighting::fit(Kernel::new(KernelKind::Uniform, 1.0).unwrap(), 0.0, 1.0, Side::TwoSided, &vs).unwrap();
        let global = RieszEstimate::function(|o| 3.0 * o.d - 1.0, 50.0).unwrap();
        let local = localize_riesz(global.clone(), Localizer::Kernel(w), 50.0).unwrap();
        for d in [0.0, 0.3, 1.0, 7.0] {
            let o = Obs { y: 0.0, d, v: Some(0.0), x: &[] };
            assert_eq!(local.eval(&o).unwrap(), global.eval(&o).unwrap());
        }
        let outside = Obs { y: 0.0, d: 1.0, v: Some(2.0), x: &[] };
        assert_eq!(local.eval(&outside).unwrap(), 0.0);
    }

    #[test]
    fn halving_uniform_bandwidth_scales_by_normalizer_ratio() {
        let vs: Vec<f64> = (0..200).map(|i| -1.0 + i as f64 / 100.0).collect();
        let k = Kernel::new(KernelKind::Uniform, 1.0).unwrap();
        let wide = LocalWeighting::fit(k, 0.0, 0.4, Side::TwoSided, &vs).unwrap();
        let narrow = LocalWeighting::fit(k, 0.0, 0.2, Side::TwoSided, &vs).unwrap();
        let global = RieszEstimate::function(|_| 1.5, 50.0).unwrap();
        let a = localize_riesz(global.clone(), Localizer::Kernel(wide), 1e6).unwrap();
        let b = localize_riesz(global, Localizer::Kernel(narrow), 1e6).unwrap();
        let o = Obs { y: 0.0, d: 0.0, v: Some(0.05), x: &[] };
        let ratio = b.eval(&o).unwrap() / a.eval(&o).unwrap();
        let expected = (0.4 * wide.omega) / (0.2 * narrow.omega);
        assert!((ratio - expected).abs() < 1e-12);
    }

    #[test]
    fn trimming_applies_after_localization() {
        // one of two points in the window: weight 2 there
        let vs = [0.0, 5.0];
        let w = LocalWeighting::fit(Kernel::new(KernelKind::Uniform, 1.0).unwrap(), 0.0, 0.01, Side::TwoSided, &vs).unwrap();
        let global = RieszEstimate::function(|_| 2.0, 50.0).unwrap();
        let local = localize_riesz(global, Localizer::Kernel(w), 3.0).unwrap();
        let o = Obs { y: 0.0, d: 0.0, v: Some(0.0), x: &[] };
        assert_eq!(local.eval_untrimmed(&o).unwrap(), 4.0);
        assert_eq!(local.eval(&o).unwrap(), 3.0);
    }
}
