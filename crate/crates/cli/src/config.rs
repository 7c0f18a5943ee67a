//! Run configuration.
//!
//! One TOML (or JSON) document drives every subcommand. Sections that a
//! subcommand does not use may be present and are ignored; unknown keys are
//! rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dml_core::bounds::BoundInputs;
use dml_core::kernel::Kernel;
use dml_core::learners::DictionaryKind;
use dml_core::simlab::SimulationConfig;
use dml_core::{ColumnRoles, FunctionalConfig, RegressionConfig, RieszConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Estimate,
    Simulate,
    Bounds,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Simulate => "simulate",
            Command::Bounds => "bounds",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub columns: ColumnRoles,
}

/// Monte Carlo design; seed and fold count come from the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "SimulationSection::default_v_grid")]
    pub v_grid: Vec<f64>,
    #[serde(default = "SimulationSection::default_c_h_grid")]
    pub c_h_grid: Vec<f64>,
    #[serde(default = "SimulationSection::default_replications")]
    pub replications: usize,
    #[serde(default = "SimulationSection::default_n")]
    pub n: usize,
    #[serde(default)]
    pub kernel: Option<Kernel>,
}

impl SimulationSection {
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
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            v_grid: Self::default_v_grid(),
            c_h_grid: Self::default_c_h_grid(),
            replications: Self::default_replications(),
            n: Self::default_n(),
            kernel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present it must match the subcommand being run.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "RunConfig::default_folds")]
    pub folds: usize,
    /// Significance level `a` of the `1 - a` interval.
    #[serde(default = "RunConfig::default_level")]
    pub level: f64,
    #[serde(default = "RunConfig::default_output")]
    pub output: PathBuf,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub functional: Option<FunctionalConfig>,
    #[serde(default)]
    pub regression: Option<RegressionConfig>,
    #[serde(default)]
    pub riesz: Option<RieszConfig>,
    #[serde(default)]
    pub simulation: Option<SimulationSection>,
    #[serde(default)]
    pub bounds: Option<BoundInputs>,
    /// A sequence of bound inputs along growing `n` for the rate checklist.
    #[serde(default)]
    pub checklist: Vec<BoundInputs>,
}

impl RunConfig {
    fn default_folds() -> usize {
        5
    }
    fn default_level() -> f64 {
        0.05
    }
    fn default_output() -> PathBuf {
        PathBuf::from("out")
    }

    /// A configuration with every default and no sections.
    pub fn empty() -> Self {
        RunConfig {
            command: None,
            seed: 0,
            folds: Self::default_folds(),
            level: Self::default_level(),
            output: Self::default_output(),
            threads: None,
            data: None,
            functional: None,
            regression: None,
            riesz: None,
            simulation: None,
            bounds: None,
            checklist: Vec::new(),
        }
    }

    pub fn regression_or_default(&self) -> RegressionConfig {
        self.regression.clone().unwrap_or_else(|| RegressionConfig::lasso(DictionaryKind::Low))
    }

    /// The representer learner; by default a lasso over the regression's dictionary.
    pub fn riesz_or_default(&self) -> RieszConfig {
        self.riesz.clone().unwrap_or_else(|| RieszConfig::lasso(self.regression_or_default().dictionary))
    }

    pub fn simulation_config(&self) -> SimulationConfig {
        let s = self.simulation.clone().unwrap_or_default();
        SimulationConfig {
            regression: self.regression_or_default(),
            riesz: Some(self.riesz_or_default()),
            v_grid: s.v_grid,
            c_h_grid: s.c_h_grid,
            replications: s.replications,
            n: s.n,
            folds: self.folds,
            kernel: s.kernel,
            seed: self.seed,
        }
    }

    /// Fills every section the command reads with its effective value, so the
    /// echoed configuration states each default explicitly.
    pub fn effective(&self, command: Command) -> RunConfig {
        let mut c = self.clone();
        c.command = Some(command);
        match command {
            Command::Estimate => {
                c.regression = Some(self.regression_or_default());
                c.riesz = Some(self.riesz_or_default());
                if let Some(f) = c.functional.as_mut() {
                    f.kernel = Some(f.effective_kernel());
                }
            }
            Command::Simulate => {
                c.regression = Some(self.regression_or_default());
                c.riesz = Some(self.riesz_or_default());
                let mut s = self.simulation.clone().unwrap_or_default();
                s.kernel = Some(s.kernel.unwrap_or_else(Kernel::epanechnikov));
                c.simulation = Some(s);
            }
            Command::Bounds | Command::Report => {}
        }
        c
    }

    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::config(format!("configuration is for `{}` but `{}` was requested", c.name(), command.name())));
            }
        }
        if self.folds < 2 {
            return Err(CliError::config(format!("`folds` must be at least 2, got {}", self.folds)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::config(format!("`level` must lie in (0, 1), got {}", self.level)));
        }
        if self.threads == Some(0) {
            return Err(CliError::config("`threads` must be positive".into()));
        }
        match command {
            Command::Estimate => {
                if self.data.is_none() {
                    return Err(CliError::config("estimate needs a [data] section".into()));
                }
                if self.functional.is_none() {
                    return Err(CliError::config("estimate needs a [functional] section".into()));
                }
            }
            Command::Bounds => {
                if self.bounds.is_none() && self.checklist.is_empty() {
                    return Err(CliError::config("bounds needs a [bounds] section or [[checklist]] entries".into()));
                }
            }
            Command::Simulate | Command::Report => {}
        }
        Ok(())
    }
}

/// Reads a configuration file; `.json` files are parsed as JSON, anything else as TOML.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, path.extension().is_some_and(|e| e == "json"))
}

pub fn parse_config_str(text: &str, json: bool) -> Result<RunConfig, CliError> {
    if json {
        serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }
}
