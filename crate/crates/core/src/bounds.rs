//! Finite-sample error bounds and their diagnostics.
//!
//! Notation: `R_gamma`, `R_alpha` are mean square errors of the fold
//! nuisances, `P_gamma`, `P_alpha` their projected counterparts (equal to
//! `R` for ordinary regressions), `sigma`, `kappa`, `zeta` the second,
//! third and fourth moment scales of the oracle moment, `Q` and `q` the
//! mean-square-continuity constant and exponent.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{oracle_estimate, DmlResult, FoldFit};
use crate::error::{DmlError, Result};
use crate::functional::FunctionalSpec;
use crate::learners::Predictor;
use crate::riesz::RieszEstimate;

/// Berry-Esseen constant for independent summands.
pub const C_BE: f64 = 0.4748;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub q_bar: f64,
    pub q: f64,
    pub sigma_bar: f64,
    pub alpha_bar: f64,
    #[serde(default)]
    pub alpha_bar_prime: f64,
    pub epsilon: f64,
    #[serde(default = "BoundInputs::default_epsilon")]
    pub epsilon_prime: f64,
    pub folds: usize,
    pub n: usize,
    pub r_gamma: f64,
    pub r_alpha: f64,
    /// Defaults to `r_gamma`.
    #[serde(default)]
    pub p_gamma: Option<f64>,
    /// Defaults to `r_alpha`.
    #[serde(default)]
    pub p_alpha: Option<f64>,
    pub sigma: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub zeta: f64,
    /// `theta_hat - theta_0`.
    #[serde(default)]
    pub theta_error: f64,
    #[serde(default)]
    pub approximation: Option<ApproximationInputs>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximationInputs {
    pub c: f64,
    pub h: f64,
    pub v_order: f64,
    pub sigma_h: f64,
}

impl BoundInputs {
    fn default_epsilon() -> f64 {
        0.1
    }

    pub fn p_gamma(&self) -> f64 {
        self.p_gamma.unwrap_or(self.r_gamma)
    }

    pub fn p_alpha(&self) -> f64 {
        self.p_alpha.unwrap_or(self.r_alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("q_bar", self.q_bar),
            ("sigma_bar", self.sigma_bar),
            ("alpha_bar", self.alpha_bar),
            ("alpha_bar_prime", self.alpha_bar_prime),
            ("r_gamma", self.r_gamma),
            ("r_alpha", self.r_alpha),
            ("p_gamma", self.p_gamma()),
            ("p_alpha", self.p_alpha()),
            ("sigma", self.sigma),
            ("kappa", self.kappa),
            ("zeta", self.zeta),
        ];
        if let Some((k, v)) = named.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(DmlError::InvalidArgument(format!("{k} must be finite and nonnegative, got {v}")));
        }
        for (k, v) in [("epsilon", self.epsilon), ("epsilon_prime", self.epsilon_prime)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(DmlError::InvalidArgument(format!("{k} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(DmlError::InvalidArgument(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if self.folds == 0 || self.n == 0 {
            return Err(DmlError::InvalidArgument("folds and n must be positive".into()));
        }
        if !self.theta_error.is_finite() {
            return Err(DmlError::InvalidArgument("theta_error must be finite".into()));
        }
        Ok(())
    }

    fn checked_sigma(&self) -> Result<f64> {
        self.validate()?;
        if self.sigma > 0.0 {
            Ok(self.sigma)
        } else {
            Err(DmlError::UndefinedScale(self.sigma))
        }
    }
}

/// `3L / (eps sigma) [(Q^1/2 + a) R_g^(q/2) + s R_a^1/2 + (n R_g R_a)^1/2]`.
pub fn delta_basic(b: &BoundInputs) -> Result<f64> {
    let sigma = b.checked_sigma()?;
    let l = b.folds as f64;
    let bracket = (b.q_bar.sqrt() + b.alpha_bar) * b.r_gamma.powf(b.q / 2.0)
        + b.sigma_bar * b.r_alpha.sqrt()
        + (b.n as f64 * b.r_gamma * b.r_alpha).sqrt();
    Ok(3.0 * l / (b.epsilon * sigma) * bracket)
}

/// `(1/sigma) min{(n P_g R_a)^1/2, (n R_g P_a)^1/2}`.
pub fn product_term(b: &BoundInputs, sigma: f64) -> f64 {
    let n = b.n as f64;
    (n * b.p_gamma() * b.r_alpha).sqrt().min((n * b.r_gamma * b.p_alpha()).sqrt()) / sigma
}

/// `4L / (eps^1/2 sigma) [(Q^1/2 + a + a') R_g^(q/2) + s R_a^1/2] + product term`.
pub fn delta_refined(b: &BoundInputs) -> Result<f64> {
    let sigma = b.checked_sigma()?;
    let l = b.folds as f64;
    let bracket = (b.q_bar.sqrt() + b.alpha_bar + b.alpha_bar_prime) * b.r_gamma.powf(b.q / 2.0) + b.sigma_bar * b.r_alpha.sqrt();
    Ok(4.0 * l / (b.epsilon.sqrt() * sigma) * bracket + product_term(b, sigma))
}

/// `0.4748 (kappa / sigma)^3 n^(-1/2)`.
pub fn berry_esseen_term(kappa: f64, sigma: f64, n: usize) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(DmlError::UndefinedScale(sigma));
    }
    if n == 0 || !(kappa >= 0.0) {
        return Err(DmlError::InvalidArgument("berry-esseen term needs n >= 1 and kappa >= 0".into()));
    }
    Ok(C_BE * (kappa / sigma).powi(3) / (n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceBound {
    pub delta_prime: f64,
    pub delta_double_prime: f64,
    /// Bound on `|sigma_hat^2 - sigma^2|`.
    pub total: f64,
}

pub fn variance_bound(b: &BoundInputs) -> Result<VarianceBound> {
    b.validate()?;
    let l = b.folds as f64;
    let dp = 4.0 * b.theta_error.powi(2)
        + 24.0 * l / b.epsilon_prime * ((b.q_bar + b.alpha_bar_prime.powi(2)) * b.r_gamma.powf(b.q) + b.sigma_bar.powi(2) * b.r_alpha);
    let dpp = (2.0 / b.epsilon_prime).sqrt() * b.zeta.powi(2) / (b.n as f64).sqrt();
    let total = dp + 2.0 * dp.sqrt() * (dpp.sqrt() + b.sigma) + dpp;
    Ok(VarianceBound { delta_prime: dp, delta_double_prime: dpp, total })
}

/// `n^(1/2) C h^v / sigma_h`, the standardized localization bias.
pub fn approximation_error(c: f64, h: f64, v_order: f64, n: usize, sigma_h: f64) -> Result<f64> {
    if !(c > 0.0 && h > 0.0 && v_order >= 1.0) {
        return Err(DmlError::InvalidArgument(format!("approximation error needs C > 0, h > 0, v >= 1; got C={c}, h={h}, v={v_order}")));
    }
    if !(sigma_h > 0.0) {
        return Err(DmlError::UndefinedScale(sigma_h));
    }
    Ok((n as f64).sqrt() * c * h.powf(v_order) / sigma_h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub delta_basic: f64,
    pub delta_refined: f64,
    pub berry_esseen: f64,
    pub variance: VarianceBound,
    pub approximation_error: Option<f64>,
    /// Bound on the Kolmogorov distance with the refined `Delta` (plus `Delta_h` when given):
    /// `BE + Delta / sqrt(2 pi) + epsilon`.
    pub kolmogorov_bound: f64,
}

pub fn bound_report(b: &BoundInputs) -> Result<BoundReport> {
    let delta_basic = delta_basic(b)?;
    let delta_refined = delta_refined(b)?;
    let berry_esseen = berry_esseen_term(b.kappa, b.sigma, b.n)?;
    let variance = variance_bound(b)?;
    let approximation_error = b.approximation.map(|a| approximation_error(a.c, a.h, a.v_order, b.n, a.sigma_h)).transpose()?;
    let delta = delta_refined.min(delta_basic) + approximation_error.unwrap_or(0.0);
    let kolmogorov_bound = berry_esseen + delta / (2.0 * std::f64::consts::PI).sqrt() + b.epsilon;
    Ok(BoundReport { inputs: b.clone(), delta_basic, delta_refined, berry_esseen, variance, approximation_error, kolmogorov_bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub values: Vec<f64>,
    pub non_increasing: bool,
}

impl Trajectory {
    fn new(values: Vec<f64>) -> Self {
        let non_increasing = values.windows(2).all(|w| w[1] <= w[0]);
        Trajectory { values, non_increasing }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checklist {
    pub n: Vec<usize>,
    /// `((kappa/sigma)^3 + zeta^2) n^(-1/2)`.
    pub moments: Trajectory,
    /// `(Q^1/2 + a/sigma + a') R_g^(q/2)`.
    pub regression_rate: Trajectory,
    /// `s R_a^1/2`.
    pub representer_rate: Trajectory,
    /// `min{(n R_g R_a)^1/2, (n P_g R_a)^1/2, (n R_g P_a)^1/2} / sigma`.
    pub product_rate: Trajectory,
}

/// Evaluates the learning-rate conditions along a sequence of sample sizes.
pub fn corollary_checklist(seq: &[BoundInputs]) -> Result<Checklist> {
    let mut cols: [Vec<f64>; 4] = Default::default();
    for b in seq {
        let sigma = b.checked_sigma()?;
        let n = b.n as f64;
        cols[0].push(((b.kappa / sigma).powi(3) + b.zeta.powi(2)) / n.sqrt());
        cols[1].push((b.q_bar.sqrt() + b.alpha_bar / sigma + b.alpha_bar_prime) * b.r_gamma.powf(b.q / 2.0));
        cols[2].push(b.sigma_bar * b.r_alpha.sqrt());
        cols[3].push((n * b.r_gamma * b.r_alpha).sqrt().min(product_term(b, 1.0)) / sigma);
    }
    let [m, c1, c2, c3] = cols;
    Ok(Checklist {
        n: seq.iter().map(|b| b.n).collect(),
        moments: Trajectory::new(m),
        regression_rate: Trajectory::new(c1),
        representer_rate: Trajectory::new(c2),
        product_rate: Trajectory::new(c3),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// `(R_gamma, R_alpha)` per fold.
    pub per_fold: Vec<(f64, f64)>,
    pub r_gamma: f64,
    pub r_alpha: f64,
}

/// Monte Carlo mean square errors of fitted nuisances against known truths on `fresh` rows.
pub fn empirical_rates(fits: &[FoldFit], gamma0: &Predictor, alpha0: &RieszEstimate, fresh: &Dataset) -> Result<Rates> {
    let n = fresh.n() as f64;
    let mut per_fold = Vec::with_capacity(fits.len());
    for fit in fits {
        let mut rg = 0.0;
        let mut ra = 0.0;
        for o in fresh.iter() {
            rg += (fit.gamma.predict(&o) - gamma0.predict(&o)).powi(2);
            ra += (fit.alpha.eval(&o)? - alpha0.eval(&o)?).powi(2);
        }
        per_fold.push((rg / n, ra / n));
    }
    let k = per_fold.len().max(1) as f64;
    let r_gamma = per_fold.iter().map(|r| r.0).sum::<f64>() / k;
    let r_alpha = per_fold.iter().map(|r| r.1).sum::<f64>() / k;
    Ok(Rates { per_fold, r_gamma, r_alpha })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbe {
    pub h: Vec<f64>,
    pub sigma_h: Vec<f64>,
    /// Least-squares slope of `log sigma_h` on `log h`.
    pub slope: f64,
}

/// Oracle moment scale across bandwidths on one sample.
///
/// `spec_at(h)` builds the functional for bandwidth `h`; `alpha_at` gives the
/// true representer for that functional.
pub fn sigma_h_scaling_probe(
    data: &Dataset,
    h_grid: &[f64],
    gamma0: &Predictor,
    spec_at: impl Fn(f64) -> Result<FunctionalSpec>,
    alpha_at: impl Fn(&FunctionalSpec) -> Result<RieszEstimate>,
) -> Result<ScalingProbe> {
    if h_grid.len() < 4 {
        return Err(DmlError::InvalidArgument("scaling probe needs at least four bandwidths".into()));
    }
    let mut sigma_h = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let spec = spec_at(h)?;
        let res = oracle_estimate(data, &spec, gamma0, &alpha_at(&spec)?, 0.05)?;
        sigma_h.push(res.sigma);
    }
    let xs: Vec<f64> = h_grid.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = sigma_h.iter().map(|s| s.ln()).collect();
    Ok(ScalingProbe { h: h_grid.to_vec(), sigma_h, slope: ls_slope(&xs, &ys) })
}

pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Moment scales estimated from the fitted `psi` rather than the oracle moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlugInDiagnostics {
    /// Always `"plug-in"`; bound inputs from simulations are flagged `"oracle"`.
    pub source: String,
    pub sigma: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub berry_esseen: Option<f64>,
    /// `((kappa/sigma)^3 + zeta^2) n^(-1/2)`, undefined when `sigma = 0`.
    pub moment_condition: Option<f64>,
    pub max_abs_alpha: f64,
    pub trimmed: usize,
}

pub fn plug_in_diagnostics(res: &DmlResult) -> PlugInDiagnostics {
    let n = res.psi.len().max(1) as f64;
    let abs_moment = |k: i32| res.psi.iter().map(|p| p.abs().powi(k)).sum::<f64>() / n;
    let kappa = abs_moment(3).cbrt();
    let zeta = abs_moment(4).powf(0.25);
    let defined = res.sigma > 0.0;
    PlugInDiagnostics {
        source: "plug-in".into(),
        sigma: res.sigma,
        kappa,
        zeta,
        berry_esseen: defined.then(|| C_BE * (kappa / res.sigma).powi(3) / n.sqrt()),
        moment_condition: defined.then(|| ((kappa / res.sigma).powi(3) + zeta * zeta) / n.sqrt()),
        max_abs_alpha: res.folds.iter().map(|f| f.max_abs_alpha).fold(0.0, f64::max),
        trimmed: res.folds.iter().map(|f| f.trimmed).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn base() -> BoundInputs {
        BoundInputs {
            q_bar: 1.0,
            q: 1.0,
            sigma_bar: 1.0,
            alpha_bar: 1.0,
            alpha_bar_prime: 1.0,
            epsilon: 0.1,
            epsilon_prime: 0.1,
            folds: 5,
            n: 100,
            r_gamma: 0.01,
            r_alpha: 0.01,
            p_gamma: None,
            p_alpha: None,
            sigma: 1.0,
            kappa: 1.0,
            zeta: 1.0,
            theta_error: 0.0,
            approximation: None,
        }
    }

    #[test]
    fn basic_hand_value() {
        // 150 * ((1 + 1) * 0.1 + 0.1 + (100 * 1e-4)^(1/2)) = 150 * 0.4
        assert!((delta_basic(&base()).unwrap() - 60.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rates_give_zero() {
        let b = BoundInputs { r_gamma: 0.0, r_alpha: 0.0, ..base() };
        assert_eq!(delta_basic(&b).unwrap(), 0.0);
        assert_eq!(delta_refined(&b).unwrap(), 0.0);
        let v = variance_bound(&BoundInputs { zeta: 0.0, ..b }).unwrap();
        assert_eq!(v.total, 0.0);
    }

    #[test]
    fn basic_scales_inversely_with_epsilon() {
        let a = delta_basic(&base()).unwrap();
        let b = delta_basic(&BoundInputs { epsilon: 0.2, ..base() }).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-12);
    }

    #[test]
    fn refined_product_term_cases() {
        let b = base();
        let expected = (100.0 * 0.01 * 0.01f64).sqrt();
        assert!((product_term(&b, 1.0) - expected).abs() < 1e-15);
        assert_eq!(product_term(&BoundInputs { p_gamma: Some(0.0), r_alpha: 5.0, ..base() }, 1.0), 0.0);
    }

    #[test]
    fn zero_sigma_is_undefined() {
        let b = BoundInputs { sigma: 0.0, ..base() };
        assert_eq!(delta_basic(&b).unwrap_err().kind(), "undefined-scale");
        assert_eq!(delta_refined(&b).unwrap_err().kind(), "undefined-scale");
        assert_eq!(berry_esseen_term(1.0, 0.0, 4).unwrap_err().kind(), "undefined-scale");
    }

    #[test]
    fn berry_esseen_values() {
        assert_eq!(berry_esseen_term(1.0, 1.0, 1).unwrap(), 0.4748);
        assert!((berry_esseen_term(2.0, 1.0, 64).unwrap() - 0.4748).abs() < 1e-15);
        let a = berry_esseen_term(1.3, 0.7, 10).unwrap();
        assert!((berry_esseen_term(1.3, 0.7, 40).unwrap() - a / 2.0).abs() < 1e-15);
    }

    #[test]
    fn plug_in_moments_of_sign_vector() {
        let psi = vec![1.0, -1.0, 1.0, -1.0];
        let res = DmlResult {
            theta: 0.0,
            sigma: 1.0,
            se: 0.5,
            level: 0.05,
            critical_value: 1.96,
            ci: [-0.98, 0.98],
            n: 4,
            folds: Vec::new(),
            psi: psi.clone(),
            contributions: psi,
        };
        let d = plug_in_diagnostics(&res);
        assert_eq!((d.kappa, d.zeta), (1.0, 1.0));
        assert_eq!(d.berry_esseen, Some(0.4748 / 2.0));
        assert_eq!(d.moment_condition, Some(1.0));
        let flat = plug_in_diagnostics(&DmlResult { sigma: 0.0, psi: vec![0.0; 4], ..res });
        assert_eq!(flat.berry_esseen, None);
    }

    #[test]
    fn variance_double_prime_halves_with_four_times_n() {
        let a = variance_bound(&base()).unwrap().delta_double_prime;
        let b = variance_bound(&BoundInputs { n: 400, ..base() }).unwrap().delta_double_prime;
        assert!((a - 2.0 * b).abs() < 1e-15);
    }

    #[test]
    fn approximation_error_exponents() {
        assert!(approximation_error(1.0, 1e-8, 2.0, 100, 1.0).unwrap() < 1e-14);
        // sigma_h proportional to h^(-1/2)
        let at = |h: f64| approximation_error(2.0, h, 2.0, 1000, h.powf(-0.5)).unwrap();
        assert!((at(0.1) / at(0.2) - 2f64.powf(-2.5)).abs() < 1e-12);
    }

    #[test]
    fn checklist_flags() {
        let zero = BoundInputs { r_gamma: 0.0, r_alpha: 0.0, kappa: 0.0, zeta: 0.0, ..base() };
        let c = corollary_checklist(&[BoundInputs { n: 100, ..zero.clone() }, BoundInputs { n: 1000, ..zero }]).unwrap();
        assert!(c.moments.non_increasing && c.regression_rate.non_increasing && c.representer_rate.non_increasing && c.product_rate.non_increasing);

        let constant: Vec<BoundInputs> = [100, 1000, 10000].iter().map(|&n| BoundInputs { n, ..base() }).collect();
        assert!(!corollary_checklist(&constant).unwrap().product_rate.non_increasing);

        let decaying: Vec<BoundInputs> = [100usize, 1000, 10000]
            .iter()
            .map(|&n| {
                let r = (n as f64).powf(-0.6);
                BoundInputs { n, r_gamma: r, r_alpha: r, ..base() }
            })
            .collect();
        let c = corollary_checklist(&decaying).unwrap();
        assert!(c.product_rate.non_increasing);
        let ratio = c.product_rate.values[1] / c.product_rate.values[0];
        assert!((ratio - 10f64.powf(0.5 - 0.6)).abs() < 1e-12);
    }

    #[test]
    fn report_parses_with_defaults() {
        let json = r#"{"q_bar":1,"q":1,"sigma_bar":1,"alpha_bar":1,"epsilon":0.1,"folds":5,"n":100,"r_gamma":0,"r_alpha":0,"sigma":1}"#;
        let b: BoundInputs = serde_json::from_str(json).unwrap();
        let r = bound_report(&b).unwrap();
        assert_eq!((r.delta_basic, r.delta_refined), (0.0, 0.0));
        assert!(serde_json::from_str::<BoundInputs>(r#"{"q_bar":1,"qq":1}"#).is_err());
    }

    fn arb_inputs() -> impl Strategy<Value = BoundInputs> {
        let constants = (0.0f64..4.0, 0.05f64..1.0, 0.0f64..3.0, 0.0f64..5.0, 0.0f64..5.0, 0.01f64..0.99, 1usize..10, 1usize..10_000);
        let rates = (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.05f64..4.0);
        (constants, rates)
            .prop_map(|((q_bar, q, sigma_bar, alpha_bar, alpha_bar_prime, epsilon, folds, n), (rg, ra, pg, pa, sigma))| BoundInputs {
                q_bar,
                q,
                sigma_bar,
                alpha_bar,
                alpha_bar_prime,
                epsilon,
                epsilon_prime: epsilon,
                folds,
                n,
                r_gamma: rg,
                r_alpha: ra,
                p_gamma: Some(pg),
                p_alpha: Some(pa),
                sigma,
                kappa: 1.0,
                zeta: 1.0,
                theta_error: 0.0,
                approximation: None,
            })
    }

    proptest! {
        #[test]
        fn monotone_in_every_input(b in arb_inputs(), bump in 0.01f64..1.0) {
            let both = |b: &BoundInputs| (delta_basic(b).unwrap(), delta_refined(b).unwrap());
            let (db, dr) = both(&b);
            let ups: Vec<BoundInputs> = vec![
                BoundInputs { r_gamma: b.r_gamma + bump, ..b.clone() },
                BoundInputs { r_alpha: b.r_alpha + bump, ..b.clone() },
                BoundInputs { p_gamma: Some(b.p_gamma() + bump), ..b.clone() },
                BoundInputs { p_alpha: Some(b.p_alpha() + bump), ..b.clone() },
                BoundInputs { q_bar: b.q_bar + bump, ..b.clone() },
                BoundInputs { alpha_bar: b.alpha_bar + bump, ..b.clone() },
                BoundInputs { alpha_bar_prime: b.alpha_bar_prime + bump, ..b.clone() },
                BoundInputs { sigma_bar: b.sigma_bar + bump, ..b.clone() },
            ];
            for u in &ups {
                let (ub, ur) = both(u);
                prop_assert!(ub >= db && ur >= dr);
            }
            let downs = [
                BoundInputs { epsilon: (b.epsilon + bump).min(0.999), ..b.clone() },
                BoundInputs { sigma: b.sigma + bump, ..b.clone() },
            ];
            for d in &downs {
                let (ub, ur) = both(d);
                prop_assert!(ub <= db && ur <= dr);
            }
        }

        #[test]
        fn product_term_symmetric_under_nuisance_swap(rg in 0.0f64..1.0, pg in 0.0f64..1.0, ra in 0.0f64..1.0, pa in 0.0f64..1.0) {
            let a = BoundInputs { r_gamma: rg, p_gamma: Some(pg), r_alpha: ra, p_alpha: Some(pa), ..base() };
            let b = BoundInputs { r_gamma: ra, p_gamma: Some(pa), r_alpha: rg, p_alpha: Some(pg), ..base() };
            let (x, y) = (product_term(&a, 1.0), product_term(&b, 1.0));
            prop_assert!((x - y).abs() <= 1e-14 * x.max(1.0));
        }

        #[test]
        fn variance_total_zero_iff_parts_zero(b in arb_inputs(), zero in any::<bool>()) {
            let b = if zero { BoundInputs { r_gamma: 0.0, r_alpha: 0.0, zeta: 0.0, ..b } } else { b };
            let v = variance_bound(&b).unwrap();
            prop_assert_eq!(v.total == 0.0, v.delta_prime == 0.0 && v.delta_double_prime == 0.0);
        }
    }
}
