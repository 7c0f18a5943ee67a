//! The doubly robust moment `psi(w, theta, gamma, alpha) = m(w, gamma) + alpha(w) (y - gamma(w)) - theta`.

use serde::{Deserialize, Serialize};

use crate::data::Obs;
use crate::error::Result;
use crate::functional::FunctionalSpec;
use crate::learners::Predictor;
use crate::riesz::RieszEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub m_part: f64,
    pub correction: f64,
    pub combined: f64,
}

impl MomentValue {
    pub fn new(m_part: f64, correction: f64, theta: f64) -> Self {
        MomentValue { m_part, correction, combined: m_part + correction - theta }
    }

    /// `m + correction`, the per-observation contribution to the estimate.
    pub fn contribution(&self) -> f64 {
        self.m_part + self.correction
    }
}

pub fn moment_psi(obs: &Obs<'_>, theta: f64, gamma: &Predictor, alpha: &RieszEstimate, spec: &FunctionalSpec) -> Result<MomentValue> {
    let m_part = spec.m(obs, gamma)?;
    let a = alpha.eval(obs)?;
    // skip the regression call where the representer vanishes
    let correction = if a == 0.0 { 0.0 } else { a * (obs.y - gamma.predict(obs)) };
    Ok(MomentValue::new(m_part, correction, theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_truth_and_zero_representer_give_zero() {
        let gamma = Predictor::function(|o| 2.0 * o.d + o.x[0]);
        let o = Obs { y: 2.5, d: 1.0, v: None, x: &[0.5] };
        let theta = FunctionalSpec::ate().m(&o, &gamma).unwrap();
        let psi = moment_psi(&o, theta, &gamma, &RieszEstimate::zero(), &FunctionalSpec::ate()).unwrap();
        assert_eq!(psi.combined, 0.0);
    }

    #[test]
    fn zero_theta_and_representer_leave_m() {
        let gamma = Predictor::function(|o| 3.0 * o.d);
        let o = Obs { y: 9.0, d: 0.0, v: None, x: &[] };
        let psi = moment_psi(&o, 0.0, &gamma, &RieszEstimate::zero(), &FunctionalSpec::ate()).unwrap();
        assert_eq!(psi.combined, 3.0);
    }

    #[test]
    fn hand_computed_observation() {
        // gamma(d, x) = 1 + 2d + x, alpha = 1.5 at this point
        // m = gamma(1) - gamma(0) = 2
        // residual = y - gamma(w) = 4.25 - (1 + 2 + 0.5) = 0.75
        // correction = 1.5 * 0.75 = 1.125
        // psi = 2 + 1.125 - 0.625 = 2.5
        let gamma = Predictor::function(|o| 1.0 + 2.0 * o.d + o.x[0]);
        let alpha = RieszEstimate::function(|_| 1.5, 50.0).unwrap();
        let o = Obs { y: 4.25, d: 1.0, v: None, x: &[0.5] };
        let psi = moment_psi(&o, 0.625, &gamma, &alpha, &FunctionalSpec::ate()).unwrap();
        assert_eq!((psi.m_part, psi.correction, psi.combined), (2.0, 1.125, 2.5));
    }
}
