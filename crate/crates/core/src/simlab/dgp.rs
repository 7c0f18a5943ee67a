//! The heterogeneous treatment effect design.
//!
//! Per observation, with `e_j ~ U(-1/2, 1/2)` independent:
//! `V = e_1`, `X_1 = 1 + 2V + e_2`, `X_2 = 1 + 2V + e_3`, `X_3 = (V - 1)^2 + e_4`,
//! `D ~ Bernoulli(logistic((V + X_1 + X_2 + X_3) / 2))` and
//! `Y = D (V X_1 X_2 X_3 + nu)` with `nu ~ N(0, 1/16)`.
//! Hence `gamma_0(d, v, x) = d v x_1 x_2 x_3` and `CATE(v) = v (1 + 2v)^2 (v - 1)^2`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, Obs};
use crate::error::Result;
use crate::kernel::LocalWeighting;
use crate::learners::{ObsFn, Predictor};
use crate::riesz::{closed_form_cate_riesz, RieszEstimate};

pub const NOISE_SD: f64 = 0.25;
/// `E[CATE(V)]` for `V ~ U(-1/2, 1/2)`, exactly 7/60.
pub const TRUE_ATE: f64 = 7.0 / 60.0;
/// Overlap margin used by the oracle representer.
pub const OVERLAP_DELTA: f64 = 0.01;

pub fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn true_cate(v: f64) -> f64 {
    v * (1.0 + 2.0 * v).powi(2) * (v - 1.0).powi(2)
}

pub fn true_propensity(v: f64, x: &[f64]) -> f64 {
    logistic(0.5 * (v + x[0] + x[1] + x[2]))
}

/// `n` draws from replication stream `stream` of `seed`.
pub fn dgp_sample_stream(n: usize, seed: u64, stream: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let noise = Normal::new(0.0, NOISE_SD).expect("valid noise sd");
    let mut y = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let e: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
        let vi = e[0];
        let xi = [1.0 + 2.0 * vi + e[1], 1.0 + 2.0 * vi + e[2], (vi - 1.0).powi(2) + e[3]];
        let u: f64 = rng.random();
        let nu = noise.sample(&mut rng);
        let di = if u < true_propensity(vi, &xi) { 1.0 } else { 0.0 };
        y.push(di * (vi * xi[0] * xi[1] * xi[2] + nu));
        d.push(di);
        v.push(vi);
        x.extend_from_slice(&xi);
    }
    Dataset::new(y, d, Some(v), x, 3).expect("generated data is well formed")
}

pub fn dgp_sample(n: usize, seed: u64) -> Dataset {
    dgp_sample_stream(n, seed, 0)
}

pub fn true_regression() -> Predictor {
    Predictor::function_with_derivative(
        |o: &Obs<'_>| o.d * o.v.unwrap_or(0.0) * o.x[0] * o.x[1] * o.x[2],
        |o: &Obs<'_>| o.v.unwrap_or(0.0) * o.x[0] * o.x[1] * o.x[2],
    )
}

pub fn propensity_fn() -> ObsFn {
    Arc::new(|o: &Obs<'_>| true_propensity(o.v.unwrap_or(0.0), o.x))
}

/// Closed-form representer of the treatment effect, localized when a weighting is given.
pub fn true_riesz(weighting: Option<LocalWeighting>, trim: f64) -> Result<RieszEstimate> {
    closed_form_cate_riesz(propensity_fn(), weighting, OVERLAP_DELTA, trim)
}
