//! Monte Carlo coverage replications of the localized treatment effect.
//!
//! Replication `r` draws its sample from stream `r` of the master seed and
//! derives every other seed from `(seed, r)`, so results do not depend on
//! scheduling or the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{assemble, critical_value, cross_fit, dml_estimate_with_partition, oracle_estimate, DmlResult, FoldFit};
use crate::error::{DmlError, Result};
use crate::folds::partition_folds;
use crate::functional::{BandwidthRule, FunctionalConfig, FunctionalKind, FunctionalSpec};
use crate::kernel::Kernel;
use crate::learners::{DictionaryKind, RegressionConfig, RegressionModel};
use crate::riesz::{fit_global_riesz_lasso, localize_riesz, shares_global_fit, RieszConfig, RieszEstimate, RieszLearner, DEFAULT_TRIM};

use super::dgp::{dgp_sample_stream, true_cate, true_regression, true_riesz, TRUE_ATE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub regression: RegressionConfig,
    #[serde(default)]
    pub riesz: Option<RieszConfig>,
    #[serde(default = "SimulationConfig::default_v_grid")]
    pub v_grid: Vec<f64>,
    #[serde(default = "SimulationConfig::default_c_h_grid")]
    pub c_h_grid: Vec<f64>,
    #[serde(default = "SimulationConfig::default_replications")]
    pub replications: usize,
    #[serde(default = "SimulationConfig::default_n")]
    pub n: usize,
    #[serde(default = "SimulationConfig::default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub kernel: Option<Kernel>,
    #[serde(default)]
    pub seed: u64,
}

impl SimulationConfig {
    fn default_v_grid() -> Vec<f64> {
        vec![-0.25, 0.0, 0.25]
    }
    fn default_c_h_grid() -> Vec<f64> {
        vec![0.25, 0.5, 1.0]
    }
    fn default_replications() -> usize {
        500
    }
    fn default_n() -> usize {
        100
    }
    fn default_folds() -> usize {
        5
    }

    /// The published design for a regression learner; the representer uses the same dictionary.
    pub fn standard(regression: RegressionConfig, seed: u64) -> Self {
        SimulationConfig {
            regression,
            riesz: None,
            v_grid: Self::default_v_grid(),
            c_h_grid: Self::default_c_h_grid(),
            replications: Self::default_replications(),
            n: Self::default_n(),
            folds: Self::default_folds(),
            kernel: None,
            seed,
        }
    }

    pub fn effective_riesz(&self) -> RieszConfig {
        self.riesz.clone().unwrap_or_else(|| RieszConfig::lasso(self.regression.dictionary))
    }

    pub fn regime(&self) -> &'static str {
        match self.regression.dictionary {
            DictionaryKind::Low => "low",
            DictionaryKind::High => "high",
        }
    }

    pub fn learner(&self) -> &'static str {
        match self.regression.model {
            RegressionModel::Lasso { .. } => "lasso",
            RegressionModel::Forest(_) => "forest",
            RegressionModel::Mlp(_) => "mlp",
        }
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.v_grid.iter().flat_map(|&v| self.c_h_grid.iter().map(move |&c| (v, c))).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.v_grid.is_empty() || self.c_h_grid.is_empty() {
            return Err(DmlError::InvalidArgument("simulation needs replications and nonempty grids".into()));
        }
        if self.n < 2 * self.folds || self.folds < 2 {
            return Err(DmlError::PartitionInfeasible { n: self.n, folds: self.folds });
        }
        Ok(())
    }
}

/// Seed for everything in replication `rep` other than the sample itself.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    let mut z = seed ^ rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Estimate and standard error from one replication of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub theta: f64,
    pub se: f64,
}

pub type CellOutcome = std::result::Result<Draw, String>;

struct GlobalRiesz<'a>(&'a RieszConfig);

impl RieszLearner for GlobalRiesz<'_> {
    fn fit(&self, train: &Dataset, spec: &FunctionalSpec, _seed: u64) -> Result<RieszEstimate> {
        let dict = std::sync::Arc::new(crate::learners::Dictionary::for_data(self.0.dictionary, train));
        fit_global_riesz_lasso(dict, spec, train, self.0.penalty, DEFAULT_TRIM)
    }
}

/// One replication: every cell estimated on the same sample and folds.
pub fn run_replication(cfg: &SimulationConfig, rep: u64) -> Vec<CellOutcome> {
    let data = dgp_sample_stream(cfg.n, cfg.seed, rep);
    let seed = replication_seed(cfg.seed, rep);
    let riesz = cfg.effective_riesz();
    let cells = cfg.cells();
    let fail = |e: DmlError| vec![Err(e.kind().to_string()); cells.len()];
    let partition = match partition_folds(cfg.n, cfg.folds, seed) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let specs: Vec<Result<FunctionalSpec>> = cells
        .iter()
        .map(|&(v, c_h)| {
            FunctionalConfig { kind: FunctionalKind::Cate, point: v, bandwidth: BandwidthRule::Heuristic { c_h }, kernel: cfg.kernel }.build(&data)
        })
        .collect();
    let draw = |r: Result<DmlResult>| r.map(|d| Draw { theta: d.theta, se: d.se }).map_err(|e| e.kind().to_string());

    if shares_global_fit(&riesz, FunctionalKind::Cate) {
        // regression and global representer do not depend on the window
        let shared = match cross_fit(&data, &FunctionalSpec::ate(), &partition, &cfg.regression, &GlobalRiesz(&riesz), seed) {
            Ok(f) => f,
            Err(e) => return fail(e),
        };
        specs
            .into_iter()
            .map(|spec| {
                draw(spec.and_then(|spec| {
                    let trim = riesz.effective_trim(&spec);
                    let localizer = *spec.localizer().expect("cate is local");
                    let fits = shared
                        .iter()
                        .map(|f| Ok(FoldFit { alpha: localize_riesz(f.alpha.clone(), localizer, trim)?, ..f.clone() }))
                        .collect::<Result<Vec<_>>>()?;
                    assemble(&data, &spec, &fits, 0.05)
                }))
            })
            .collect()
    } else {
        specs
            .into_iter()
            .map(|spec| draw(spec.and_then(|spec| dml_estimate_with_partition(&data, &spec, &cfg.regression, &riesz, &partition, 0.05, seed))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub v: f64,
    pub cate: f64,
    pub c_h: f64,
    pub replications: usize,
    pub completed: usize,
    pub failures: usize,
    pub ave_est: f64,
    pub ave_se: f64,
    /// Monte Carlo standard deviation of the estimates.
    pub sd_est: f64,
    pub cov80: f64,
    pub cov95: f64,
    pub mcse80: f64,
    pub mcse95: f64,
    /// More than 1% of replications failed.
    pub flagged: bool,
}

impl CoverageCell {
    /// Aggregates the draws of one cell against the true value `truth`.
    pub fn from_draws(v: f64, truth: f64, c_h: f64, outcomes: &[CellOutcome]) -> Self {
        let z80 = critical_value(0.2).expect("valid level");
        let z95 = critical_value(0.05).expect("valid level");
        let draws: Vec<Draw> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
        let k = draws.len();
        let kf = k.max(1) as f64;
        let covered = |z: f64| draws.iter().filter(|d| (d.theta - truth).abs() <= z * d.se).count() as f64 / kf;
        let (cov80, cov95) = (covered(z80), covered(z95));
        let mcse = |c: f64| (c * (1.0 - c) / kf).sqrt();
        let failures = outcomes.len() - k;
        CoverageCell {
            v,
            cate: truth,
            c_h,
            replications: outcomes.len(),
            completed: k,
            failures,
            ave_est: if k == 0 { f64::NAN } else { draws.iter().map(|d| d.theta).sum::<f64>() / kf },
            ave_se: if k == 0 { f64::NAN } else { draws.iter().map(|d| d.se).sum::<f64>() / kf },
            sd_est: crate::numeric::sample_sd(&draws.iter().map(|d| d.theta).collect::<Vec<_>>()),
            cov80,
            cov95,
            mcse80: mcse(cov80),
            mcse95: mcse(cov95),
            flagged: failures * 100 > outcomes.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub cells: Vec<CoverageCell>,
    /// Failure tags per cell, in cell order, for replications that failed.
    pub failure_kinds: Vec<Vec<String>>,
}

pub fn run_monte_carlo(cfg: &SimulationConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let outcomes: Vec<Vec<CellOutcome>> = (0..cfg.replications as u64).into_par_iter().map(|r| run_replication(cfg, r)).collect();
    let cells = cfg.cells();
    let mut report = SimulationReport { config: cfg.clone(), cells: Vec::new(), failure_kinds: Vec::new() };
    for (c, &(v, c_h)) in cells.iter().enumerate() {
        let column: Vec<CellOutcome> = outcomes.iter().map(|o| o[c].clone()).collect();
        let mut kinds: Vec<String> = column.iter().filter_map(|o| o.as_ref().err().cloned()).collect();
        kinds.dedup();
        report.cells.push(CoverageCell::from_draws(v, true_cate(v), c_h, &column));
        report.failure_kinds.push(kinds);
    }
    Ok(report)
}

/// Oracle-nuisance replications of the global treatment effect.
pub fn run_oracle_ate(n: usize, replications: usize, seed: u64) -> Result<Vec<Draw>> {
    let gamma0 = true_regression();
    let alpha0 = true_riesz(None, DEFAULT_TRIM)?;
    (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let data = dgp_sample_stream(n, seed, r);
            let res = oracle_estimate(&data, &FunctionalSpec::ate(), &gamma0, &alpha0, 0.05)?;
            Ok(Draw { theta: res.theta, se: res.se })
        })
        .collect()
}

/// Coverage summary of oracle draws around the true average effect.
pub fn oracle_ate_cell(draws: &[Draw]) -> CoverageCell {
    let outcomes: Vec<CellOutcome> = draws.iter().map(|d| Ok(*d)).collect();
    CoverageCell::from_draws(f64::NAN, TRUE_ATE, f64::NAN, &outcomes)
}
