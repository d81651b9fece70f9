use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {got_rows}x{got_cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        got_rows: usize,
        got_cols: usize,
    },

    #[error("grid {rows}x{cols} is smaller than kernel {k_rows}x{k_cols}")]
    KernelTooLarge {
        rows: usize,
        cols: usize,
        k_rows: usize,
        k_cols: usize,
    },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("singular system: frequency denominator {min_denominator:e} below 1e-14")]
    SingularSystem { min_denominator: f64 },

    #[error("inverse transform produced non-real output: imaginary residue {residue:e}")]
    ComplexResidue { residue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("energy not evaluable: prior is implicit")]
    EnergyNotEvaluable,

    #[error("prox intractable for implicit prior")]
    ImplicitProx,

    #[error("training data is empty")]
    EmptyTrainingData,

    #[error("training diverged at stage {stage}, epoch {epoch}: loss is not finite")]
    TrainingDiverged { stage: usize, epoch: usize },

    #[error("solver produced non-finite state at iteration {k}")]
    SolverDiverged { k: usize },

    #[error("network container: {0}")]
    Container(String),

    #[error("pgm: {0}")]
    Pgm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
