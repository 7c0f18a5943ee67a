//! Nuisance regression learners and the fitted-surface type they produce.
//!
//! Every learner sees the same inputs: the dictionary expansion of
//! `(d, v?, x)`. The lasso is linear in the full dictionary; the forest and
//! the network use the non-constant features.

pub mod dictionary;
pub mod forest;
pub mod lasso;
pub mod mlp;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Obs};
use crate::error::Result;
use crate::folds::partition_folds;
use crate::linalg::{dot, Matrix};

pub use dictionary::{Dictionary, DictionaryKind};
pub use forest::{fit_forest, Forest, ForestConfig};
pub use lasso::{cross_val_lambda, default_lambda, fit_lasso, LassoFit, LassoOptions};
pub use mlp::{fit_mlp, Mlp, MlpConfig};

pub type ObsFn = Arc<dyn Fn(&Obs<'_>) -> f64 + Send + Sync>;

/// A fitted regression surface `f(d, v, x)`.
#[derive(Clone)]
pub enum Predictor {
    /// `sum_j coef[j] * b_j(w)`; the intercept sits on the constant term.
    Linear { dict: Arc<Dictionary>, coef: Vec<f64> },
    Forest { dict: Arc<Dictionary>, forest: Arc<Forest> },
    Mlp { dict: Arc<Dictionary>, net: Arc<Mlp> },
    /// A known function, optionally with its derivative in `d`.
    Function { f: ObsFn, df: Option<ObsFn> },
}

impl fmt::Debug for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predictor::Linear { coef, .. } => f.debug_struct("Linear").field("coef", coef).finish(),
            Predictor::Forest { forest, .. } => f.debug_struct("Forest").field("trees", &forest.trees().len()).finish(),
            Predictor::Mlp { .. } => f.write_str("Mlp"),
            Predictor::Function { df, .. } => f.debug_struct("Function").field("derivative", &df.is_some()).finish(),
        }
    }
}

fn features(dict: &Dictionary, obs: &Obs<'_>) -> Vec<f64> {
    let mut out = Vec::with_capacity(dict.len());
    dict.expand_vars_into(&obs.vars(), &mut out);
    out
}

impl Predictor {
    pub fn constant(dict: Arc<Dictionary>, value: f64) -> Self {
        let mut coef = vec![0.0; dict.len()];
        coef[0] = value;
        Predictor::Linear { dict, coef }
    }

    pub fn function(f: impl Fn(&Obs<'_>) -> f64 + Send + Sync + 'static) -> Self {
        Predictor::Function { f: Arc::new(f), df: None }
    }

    pub fn function_with_derivative(
        f: impl Fn(&Obs<'_>) -> f64 + Send + Sync + 'static,
        df: impl Fn(&Obs<'_>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Predictor::Function { f: Arc::new(f), df: Some(Arc::new(df)) }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Predictor::Linear { .. } => "linear",
            Predictor::Forest { .. } => "forest",
            Predictor::Mlp { .. } => "mlp",
            Predictor::Function { .. } => "function",
        }
    }

    pub fn predict(&self, obs: &Obs<'_>) -> f64 {
        match self {
            Predictor::Linear { dict, coef } => dot(coef, &features(dict, obs)),
            Predictor::Forest { dict, forest } => forest.predict(&features(dict, obs)[1..]),
            Predictor::Mlp { dict, net } => net.predict(&features(dict, obs)[1..]),
            Predictor::Function { f, .. } => f(obs),
        }
    }

    /// `d f / d d` at `obs`, when available in closed form.
    pub fn d_derivative(&self, obs: &Obs<'_>) -> Option<f64> {
        match self {
            Predictor::Linear { dict, coef } => Some(dot(coef, &dict.d_derivative(obs))),
            Predictor::Function { df, .. } => df.as_ref().map(|g| g(obs)),
            Predictor::Forest { .. } | Predictor::Mlp { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Penalty {
    /// `c * sd(y) * sqrt(ln p / n)`.
    Theory {
        #[serde(default = "Penalty::default_c")]
        c: f64,
    },
    Fixed { lambda: f64 },
    /// K-fold selection over a log grid descending from the theory value times 10.
    CrossValidated {
        #[serde(default = "Penalty::default_grid")]
        grid_size: usize,
        #[serde(default = "Penalty::default_folds")]
        folds: usize,
    },
}

impl Penalty {
    fn default_c() -> f64 {
        1.1
    }
    fn default_grid() -> usize {
        20
    }
    fn default_folds() -> usize {
        5
    }
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty::Theory { c: 1.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegressionModel {
    Lasso {
        #[serde(default)]
        penalty: Penalty,
    },
    Forest(ForestConfig),
    Mlp(MlpConfig),
}

/// A regression learner: model family plus the dictionary it consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionConfig {
    pub dictionary: DictionaryKind,
    pub model: RegressionModel,
}

impl RegressionConfig {
    pub fn lasso(dictionary: DictionaryKind) -> Self {
        RegressionConfig { dictionary, model: RegressionModel::Lasso { penalty: Penalty::default() } }
    }

    pub fn forest(dictionary: DictionaryKind) -> Self {
        RegressionConfig { dictionary, model: RegressionModel::Forest(ForestConfig::default()) }
    }

    pub fn mlp(dictionary: DictionaryKind) -> Self {
        RegressionConfig { dictionary, model: RegressionModel::Mlp(MlpConfig::default()) }
    }
}

/// Fits a regression of `y` on `(d, v, x)` from training rows.
pub trait RegressionLearner: Send + Sync {
    fn fit(&self, train: &Dataset, seed: u64) -> Result<Predictor>;
}

impl RegressionLearner for RegressionConfig {
    fn fit(&self, train: &Dataset, seed: u64) -> Result<Predictor> {
        let dict = Arc::new(Dictionary::for_data(self.dictionary, train));
        let y = train.y();
        if y.iter().all(|&a| a == y[0]) {
            return Ok(Predictor::constant(dict, y[0]));
        }
        let design = dict.design(train);
        match &self.model {
            RegressionModel::Lasso { penalty } => {
                let opts = LassoOptions::default();
                let p = dict.len() - 1;
                let lambda = match *penalty {
                    Penalty::Theory { c } => c / 1.1 * default_lambda(y, p),
                    Penalty::Fixed { lambda } => lambda,
                    Penalty::CrossValidated { grid_size, folds } => {
                        let top = 10.0 * default_lambda(y, p);
                        let grid: Vec<f64> =
                            (0..grid_size.max(1)).map(|k| top * 1e-3f64.powf(k as f64 / (grid_size.max(2) - 1) as f64)).collect();
                        let partition = partition_folds(train.n(), folds, seed)?;
                        cross_val_lambda(&design, y, &grid, &partition, &opts)
                    }
                };
                let fit = fit_lasso(&design, y, lambda, &opts);
                let mut coef = fit.coef;
                coef[0] += fit.intercept;
                Ok(Predictor::Linear { dict, coef })
            }
            RegressionModel::Forest(cfg) => {
                let x = drop_constant(&design);
                Ok(Predictor::Forest { dict, forest: Arc::new(fit_forest(&x, y, cfg, seed)) })
            }
            RegressionModel::Mlp(cfg) => {
                let x = drop_constant(&design);
                Ok(Predictor::Mlp { dict, net: Arc::new(fit_mlp(&x, y, cfg, seed)?) })
            }
        }
    }
}

/// Returns a fixed surface regardless of the training rows.
#[derive(Debug, Clone)]
pub struct FixedRegression(pub Predictor);

impl RegressionLearner for FixedRegression {
    fn fit(&self, _train: &Dataset, _seed: u64) -> Result<Predictor> {
        Ok(self.0.clone())
    }
}

fn drop_constant(design: &Matrix) -> Matrix {
    let k = design.cols() - 1;
    let mut out = Matrix::zeros(design.rows(), k);
    for i in 0..design.rows() {
        out.row_mut(i).copy_from_slice(&design.row(i)[1..]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let rows: Vec<(f64, f64, Option<f64>, Vec<f64>)> = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0;
                let d = (i % 2) as f64;
                (2.0 * d + t, d, Some(t - 0.5), vec![t * t])
            })
            .collect();
        Dataset::from_rows(rows.iter().map(|(y, d, v, x)| (*y, *d, *v, x.as_slice()))).unwrap()
    }

    #[test]
    fn constant_response_gives_constant_predictor_for_every_learner() {
        let base = toy();
        let data = Dataset::new(vec![3.0; base.n()], base.d().to_vec(), base.v().map(|v| v.to_vec()), (0..base.n()).map(|i| base.x_row(i)[0]).collect(), 1)
            .unwrap();
        for cfg in [RegressionConfig::lasso(DictionaryKind::Low), RegressionConfig::forest(DictionaryKind::Low), RegressionConfig::mlp(DictionaryKind::Low)] {
            let f = cfg.fit(&data, 1).unwrap();
            assert!(data.iter().all(|o| f.predict(&o) == 3.0));
        }
    }

    #[test]
    fn lasso_predictor_is_dictionary_linear() {
        let data = toy();
        let f = RegressionConfig::lasso(DictionaryKind::Low).fit(&data, 0).unwrap();
        let Predictor::Linear { dict, coef } = &f else { panic!("expected linear") };
        for o in data.iter() {
            assert_eq!(f.predict(&o), dot(coef, &dict.expand(&o)));
        }
        assert!(f.d_derivative(&data.obs(0)).is_some());
    }

    #[test]
    fn refits_are_bit_identical() {
        let data = toy();
        let small_forest = RegressionConfig { dictionary: DictionaryKind::Low, model: RegressionModel::Forest(ForestConfig { trees: 20, ..Default::default() }) };
        let small_mlp = RegressionConfig { dictionary: DictionaryKind::Low, model: RegressionModel::Mlp(MlpConfig { epochs: 50, ..Default::default() }) };
        for cfg in [RegressionConfig::lasso(DictionaryKind::High), small_forest, small_mlp] {
            let a = cfg.fit(&data, 11).unwrap();
            let b = cfg.fit(&data, 11).unwrap();
            assert!(data.iter().all(|o| a.predict(&o).to_bits() == b.predict(&o).to_bits()));
        }
    }

    #[test]
    fn forest_and_network_lack_derivatives() {
        let data = toy();
        let cfg = RegressionConfig { dictionary: DictionaryKind::Low, model: RegressionModel::Forest(ForestConfig { trees: 3, ..Default::default() }) };
        assert!(cfg.fit(&data, 0).unwrap().d_derivative(&data.obs(0)).is_none());
    }

    #[test]
    fn config_parses_with_defaults() {
        let cfg: RegressionConfig = serde_json::from_str(r#"{"dictionary":"high","model":{"kind":"forest","trees":10}}"#).unwrap();
        assert_eq!(cfg.model, RegressionModel::Forest(ForestConfig { trees: 10, ..Default::default() }));
        let cfg: RegressionConfig = serde_json::from_str(r#"{"dictionary":"low","model":{"kind":"lasso"}}"#).unwrap();
        assert_eq!(cfg, RegressionConfig::lasso(DictionaryKind::Low));
        assert!(serde_json::from_str::<RegressionConfig>(r#"{"dictionary":"low","model":{"kind":"forest","tres":10}}"#).is_err());
    }
}
