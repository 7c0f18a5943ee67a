//! Simulation design, Monte Carlo runner and coverage tables.

pub mod dgp;
pub mod runner;
pub mod table;

pub use dgp::{dgp_sample, dgp_sample_stream, true_cate, true_propensity, true_regression, true_riesz, TRUE_ATE};
pub use runner::{run_monte_carlo, run_oracle_ate, CoverageCell, Draw, SimulationConfig, SimulationReport};
pub use table::{assemble_table, Table};
