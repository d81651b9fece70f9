//! Problem generation, experiment orchestration, configuration parsing
//! and reporting around the padnet solver crate.

pub mod config;
pub mod experiment;
pub mod problems;
pub mod report;

use thiserror::Error;

pub use config::{parse_config, parse_config_str, serialize_config, BenchConfig, ConfigError};
pub use experiment::{run_experiment, run_training, SolverKind};
pub use problems::{
    make_deconv_gradient_problem, make_deconv_image_problem, make_problem, DomainKind, KernelKind,
    ProblemInstance, ProblemSpec,
};
pub use report::{ExperimentReport, SolverOutcome};

/// Process exit codes: 0 success, 2 configuration error, 3 solver
/// divergence, 4 I/O error.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] padnet_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(ConfigError::Io(_)) => 4,
            BenchError::Config(_) => 2,
            BenchError::Core(padnet_core::Error::SolverDiverged { .. })
            | BenchError::Core(padnet_core::Error::TrainingDiverged { .. }) => 3,
            BenchError::Core(padnet_core::Error::Io(_)) => 4,
            BenchError::Core(_) => 2,
            BenchError::Io(_) => 4,
        }
    }
}
