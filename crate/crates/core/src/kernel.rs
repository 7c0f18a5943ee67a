//! Compact-support kernels, Nadaraya-Watson localization weights and the
//! rule-of-thumb bandwidth.
//!
//! A two-sided weighting localizes on `v` around a point `v*`:
//! `l_h(v) = K((v - v*)/h) / (h * omega)`. The one-sided weightings used
//! for discontinuity designs localize on `d` with the shifted argument
//! `(2(d - c) - h) / (2h)` (right) or `(-2(d - c) - h) / (2h)` (left), which
//! for a kernel supported on `(-1/2, 1/2)` selects `d - c` in `(0, h)` and
//! `(-h, 0)` respectively. In every case `omega` is the sample plug-in
//! `mean(K(arg_i) / h)` over the normalizing sample, so the weights average
//! to one there.

use serde::{Deserialize, Serialize};

use crate::data::Obs;
use crate::error::{DmlError, Result};
use crate::numeric::sample_sd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Uniform,
    Epanechnikov,
    Biweight,
    /// Fourth-order polynomial kernel with vanishing second moment.
    Order4,
}

/// A symmetric kernel supported on the open interval `(-half_width, half_width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub half_width: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(DmlError::InvalidArgument(format!("kernel half-width must be positive, got {half_width}")));
        }
        Ok(Kernel { kind, half_width })
    }

    pub fn epanechnikov() -> Self {
        Kernel { kind: KernelKind::Epanechnikov, half_width: 1.0 }
    }

    /// Uniform kernel on `(-1/2, 1/2)`, the default for discontinuity designs.
    pub fn uniform_half() -> Self {
        Kernel { kind: KernelKind::Uniform, half_width: 0.5 }
    }

    /// `K(u)`, zero outside the open support.
    pub fn eval(&self, u: f64) -> f64 {
        let a = self.half_width;
        let t = u / a;
        if !(t.abs() < 1.0) {
            return 0.0;
        }
        let t2 = t * t;
        let base = match self.kind {
            KernelKind::Uniform => 0.5,
            KernelKind::Epanechnikov => 0.75 * (1.0 - t2),
            KernelKind::Biweight => 15.0 / 16.0 * (1.0 - t2) * (1.0 - t2),
            KernelKind::Order4 => 15.0 / 32.0 * (3.0 - 10.0 * t2 + 7.0 * t2 * t2),
        };
        base / a
    }
}

/// Which side of the point a weighting covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// Symmetric window on `v`.
    TwoSided,
    /// Window on `d` just above the cutoff.
    Right,
    /// Window on `d` just below the cutoff.
    Left,
}

/// A kernel weighting with its plug-in normalizer already estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalWeighting {
    pub kernel: Kernel,
    pub center: f64,
    pub bandwidth: f64,
    pub omega: f64,
    pub side: Side,
}

impl LocalWeighting {
    /// Estimates `omega` as the sample mean of `K(arg_i) / h` over `values`.
    pub fn fit(kernel: Kernel, center: f64, bandwidth: f64, side: Side, values: &[f64]) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(DmlError::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let mut w = LocalWeighting { kernel, center, bandwidth, omega: 1.0, side };
        let total: f64 = values.iter().map(|&s| w.kernel.eval(w.argument(s))).sum();
        if total == 0.0 {
            return Err(DmlError::EmptyWindow { point: center, bandwidth });
        }
        w.omega = total / (values.len() as f64 * bandwidth);
        Ok(w)
    }

    pub fn argument(&self, s: f64) -> f64 {
        let h = self.bandwidth;
        match self.side {
            Side::TwoSided => (s - self.center) / h,
            Side::Right => (2.0 * (s - self.center) - h) / (2.0 * h),
            Side::Left => (-2.0 * (s - self.center) - h) / (2.0 * h),
        }
    }

    /// Weight at a raw covariate value.
    pub fn weight(&self, s: f64) -> f64 {
        self.kernel.eval(self.argument(s)) / (self.bandwidth * self.omega)
    }

    /// Weight at an observation: `v` for two-sided, `d` for one-sided windows.
    pub fn weight_obs(&self, obs: &Obs<'_>) -> f64 {
        match self.side {
            Side::TwoSided => self.weight(obs.v.expect("two-sided localization requires a v column")),
            Side::Right | Side::Left => self.weight(obs.d),
        }
    }

    pub fn weights(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&s| self.weight(s)).collect()
    }

    /// Upper bound on the weight, `sup K / (h omega)`.
    pub fn sup_weight(&self) -> f64 {
        self.kernel.eval(0.0) / (self.bandwidth * self.omega)
    }
}

/// Fits the normalizer on `values` and returns the weights at those values.
pub fn local_weights(kernel: Kernel, center: f64, bandwidth: f64, side: Side, values: &[f64]) -> Result<Vec<f64>> {
    Ok(LocalWeighting::fit(kernel, center, bandwidth, side, values)?.weights(values))
}

/// `h = c_h * sd * n^(-0.2)` with a given standard deviation.
pub fn bandwidth_from_sd(c_h: f64, sd: f64, n: usize) -> f64 {
    c_h * sd * (n as f64).powf(-0.2)
}

/// Rule-of-thumb bandwidth `c_h * sd(v) * n^(-0.2)` using the sample
/// standard deviation of `v_values`.
pub fn bandwidth_heuristic(c_h: f64, v_values: &[f64], n: usize) -> Result<f64> {
    if !(c_h > 0.0) {
        return Err(DmlError::InvalidArgument(format!("c_h must be positive, got {c_h}")));
    }
    if n < 2 || v_values.len() < 2 {
        return Err(DmlError::InvalidArgument("bandwidth heuristic needs at least two observations".into()));
    }
    let sd = sample_sd(v_values);
    if !(sd > 0.0) {
        return Err(DmlError::DegenerateCovariate);
    }
    Ok(bandwidth_from_sd(c_h, sd, n))
}
