//! Target functionals `theta = E[m(W, gamma)]`.
//!
//! Every supported `m` factors as `weight(w) * base(w, f)` where the base is
//! a treatment contrast `f(1, v, x) - f(0, v, x)`, the derivative
//! `d f / d d`, or the evaluation `f(w)`, and the weight is one (global),
//! a kernel weight in `v` (heterogeneous kinds) or the signed difference of
//! the two one-sided weights in `d` (discontinuity design).

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Obs};
use crate::error::{DmlError, Result};
use crate::kernel::{bandwidth_heuristic, Kernel, LocalWeighting, Side};
use crate::learners::{Dictionary, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    /// Average treatment effect.
    Ate,
    /// Treatment effect localized at `v = v*`.
    Cate,
    /// Jump of the regression at the cutoff `d = c`.
    Rdd,
    /// Average partial derivative in `d`.
    AvgDeriv,
    /// Partial derivative in `d` localized at `v = v*`.
    HetDeriv,
}

impl FunctionalKind {
    pub fn is_local(self) -> bool {
        matches!(self, FunctionalKind::Cate | FunctionalKind::Rdd | FunctionalKind::HetDeriv)
    }

    /// Mean-square-continuity exponent.
    pub fn q(self) -> f64 {
        match self {
            FunctionalKind::AvgDeriv | FunctionalKind::HetDeriv => 0.5,
            _ => 1.0,
        }
    }

    pub fn base(self) -> Base {
        match self {
            FunctionalKind::Ate | FunctionalKind::Cate => Base::Contrast,
            FunctionalKind::AvgDeriv | FunctionalKind::HetDeriv => Base::Derivative,
            FunctionalKind::Rdd => Base::Evaluation,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FunctionalKind::Ate => "ate",
            FunctionalKind::Cate => "cate",
            FunctionalKind::Rdd => "rdd",
            FunctionalKind::AvgDeriv => "avg-deriv",
            FunctionalKind::HetDeriv => "het-deriv",
        }
    }
}

/// The unlocalized part of `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Base {
    Contrast,
    Derivative,
    Evaluation,
}

impl Base {
    pub fn eval(self, obs: &Obs<'_>, f: &Predictor) -> Result<f64> {
        match self {
            Base::Contrast => Ok(f.predict(&obs.with_d(1.0)) - f.predict(&obs.with_d(0.0))),
            Base::Derivative => f.d_derivative(obs).ok_or(DmlError::UnsupportedFunctional("derivative")),
            Base::Evaluation => Ok(f.predict(obs)),
        }
    }

    /// `base(w, b_j)` for every dictionary element.
    pub fn eval_basis(self, obs: &Obs<'_>, dict: &Dictionary) -> Vec<f64> {
        match self {
            Base::Contrast => {
                let one = dict.expand(&obs.with_d(1.0));
                let zero = dict.expand(&obs.with_d(0.0));
                one.iter().zip(&zero).map(|(a, b)| a - b).collect()
            }
            Base::Derivative => dict.d_derivative(obs),
            Base::Evaluation => dict.expand(obs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Localizer {
    Kernel(LocalWeighting),
    Discontinuity { right: LocalWeighting, left: LocalWeighting },
}

impl Localizer {
    /// `l_h(v)` for a kernel window, `l_h^+(d) - l_h^-(d)` for a discontinuity.
    pub fn weight(&self, obs: &Obs<'_>) -> f64 {
        match self {
            Localizer::Kernel(w) => w.weight_obs(obs),
            Localizer::Discontinuity { right, left } => right.weight_obs(obs) - left.weight_obs(obs),
        }
    }

    pub fn bandwidth(&self) -> f64 {
        match self {
            Localizer::Kernel(w) => w.bandwidth,
            Localizer::Discontinuity { right, .. } => right.bandwidth,
        }
    }

    /// Upper bound on `|weight|`.
    pub fn sup_weight(&self) -> f64 {
        match self {
            Localizer::Kernel(w) => w.sup_weight(),
            Localizer::Discontinuity { right, left } => right.sup_weight().max(left.sup_weight()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    kind: FunctionalKind,
    point: f64,
    local: Option<Localizer>,
}

impl FunctionalSpec {
    pub fn ate() -> Self {
        FunctionalSpec { kind: FunctionalKind::Ate, point: 0.0, local: None }
    }

    pub fn avg_deriv() -> Self {
        FunctionalSpec { kind: FunctionalKind::AvgDeriv, point: 0.0, local: None }
    }

    pub fn cate(weighting: LocalWeighting) -> Result<Self> {
        Self::two_sided(FunctionalKind::Cate, weighting)
    }

    pub fn het_deriv(weighting: LocalWeighting) -> Result<Self> {
        Self::two_sided(FunctionalKind::HetDeriv, weighting)
    }

    fn two_sided(kind: FunctionalKind, weighting: LocalWeighting) -> Result<Self> {
        if weighting.side != Side::TwoSided {
            return Err(DmlError::InvalidArgument(format!("{} needs a two-sided weighting", kind.name())));
        }
        Ok(FunctionalSpec { kind, point: weighting.center, local: Some(Localizer::Kernel(weighting)) })
    }

    pub fn rdd(right: LocalWeighting, left: LocalWeighting) -> Result<Self> {
        if right.side != Side::Right || left.side != Side::Left {
            return Err(DmlError::InvalidArgument("rdd needs a right and a left weighting".into()));
        }
        if right.center != left.center || right.bandwidth != left.bandwidth {
            return Err(DmlError::InvalidArgument("rdd half-windows must share cutoff and bandwidth".into()));
        }
        Ok(FunctionalSpec { kind: FunctionalKind::Rdd, point: right.center, local: Some(Localizer::Discontinuity { right, left }) })
    }

    pub fn kind(&self) -> FunctionalKind {
        self.kind
    }

    pub fn point(&self) -> f64 {
        self.point
    }

    pub fn q(&self) -> f64 {
        self.kind.q()
    }

    pub fn localizer(&self) -> Option<&Localizer> {
        self.local.as_ref()
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.local.as_ref().map(Localizer::bandwidth)
    }

    pub fn local_weight(&self, obs: &Obs<'_>) -> f64 {
        self.local.as_ref().map_or(1.0, |l| l.weight(obs))
    }

    pub fn base(&self) -> Base {
        self.kind.base()
    }

    /// `m(w, f)`.
    pub fn m(&self, obs: &Obs<'_>, f: &Predictor) -> Result<f64> {
        let w = self.local_weight(obs);
        if w == 0.0 {
            if self.base() == Base::Derivative && f.d_derivative(obs).is_none() {
                return Err(DmlError::UnsupportedFunctional("derivative"));
            }
            return Ok(0.0);
        }
        Ok(w * self.base().eval(obs, f)?)
    }

    /// `m(w, b_j)` for every dictionary element.
    pub fn m_basis(&self, obs: &Obs<'_>, dict: &Dictionary) -> Vec<f64> {
        let w = self.local_weight(obs);
        let mut out = self.base().eval_basis(obs, dict);
        if w != 1.0 {
            out.iter_mut().for_each(|a| *a *= w);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BandwidthRule {
    /// `c_h * sd * n^(-0.2)` with the sample sd of the localizing variable.
    Heuristic { c_h: f64 },
    Fixed { h: f64 },
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::Heuristic { c_h: 0.5 }
    }
}

/// Declarative functional description, turned into a [`FunctionalSpec`]
/// once the normalizing sample is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    pub kind: FunctionalKind,
    /// `v*` for heterogeneous kinds, the cutoff for the discontinuity design.
    #[serde(default)]
    pub point: f64,
    #[serde(default)]
    pub bandwidth: BandwidthRule,
    /// Defaults to Epanechnikov on `[-1, 1]`, or uniform on `(-1/2, 1/2)` for the discontinuity design.
    #[serde(default)]
    pub kernel: Option<Kernel>,
}

impl FunctionalConfig {
    pub fn new(kind: FunctionalKind) -> Self {
        FunctionalConfig { kind, point: 0.0, bandwidth: BandwidthRule::default(), kernel: None }
    }

    pub fn effective_kernel(&self) -> Kernel {
        self.kernel.unwrap_or(match self.kind {
            FunctionalKind::Rdd => Kernel::uniform_half(),
            _ => Kernel::epanechnikov(),
        })
    }

    /// Builds the spec with `omega` fitted on all rows of `data`.
    pub fn build(&self, data: &Dataset) -> Result<FunctionalSpec> {
        let kernel = self.effective_kernel();
        let localizing: Vec<f64> = match self.kind {
            FunctionalKind::Ate | FunctionalKind::AvgDeriv => return Ok(FunctionalSpec { kind: self.kind, point: 0.0, local: None }),
            FunctionalKind::Rdd => data.d().to_vec(),
            FunctionalKind::Cate | FunctionalKind::HetDeriv => {
                data.v().ok_or_else(|| DmlError::InvalidData(format!("{} needs a v column", self.kind.name())))?.to_vec()
            }
        };
        let h = match self.bandwidth {
            BandwidthRule::Heuristic { c_h } => bandwidth_heuristic(c_h, &localizing, data.n())?,
            BandwidthRule::Fixed { h } => h,
        };
        match self.kind {
            FunctionalKind::Rdd => FunctionalSpec::rdd(
                LocalWeighting::fit(kernel, self.point, h, Side::Right, &localizing)?,
                LocalWeighting::fit(kernel, self.point, h, Side::Left, &localizing)?,
            ),
            kind => FunctionalSpec::two_sided(kind, LocalWeighting::fit(kernel, self.point, h, Side::TwoSided, &localizing)?),
        }
    }
}
