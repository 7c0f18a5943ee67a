//! Cross-fitted debiased machine learning for global and kernel-localized
//! linear functionals of a regression, with finite-sample bound
//! calculators and a Monte Carlo coverage lab.

pub mod bounds;
pub mod data;
pub mod engine;
pub mod error;
pub mod folds;
pub mod functional;
pub mod kernel;
pub mod learners;
pub mod linalg;
pub mod moment;
pub mod numeric;
pub mod riesz;
pub mod simlab;

pub use data::{ColumnRoles, Dataset, Obs};
pub use error::{DmlError, Result};
pub use folds::{partition_folds, FoldPartition};
pub use functional::{BandwidthRule, FunctionalConfig, FunctionalKind, FunctionalSpec, Localizer};
pub use kernel::{bandwidth_heuristic, local_weights, Kernel, KernelKind, LocalWeighting, Side};
pub use learners::{Predictor, RegressionConfig, RegressionLearner};
pub use moment::{moment_psi, MomentValue};
pub use riesz::{RieszConfig, RieszEstimate, RieszLearner};
