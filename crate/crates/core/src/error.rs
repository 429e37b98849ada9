//! Error type shared by all simulator modules.

use thiserror::Error;

/// Errors surfaced by the simulator and the optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("UE {0} has an empty AP cluster (C_u = 0); it cannot participate")]
    EmptyCluster(usize),

    #[error("zero-norm channel vector for AP {ap}, UE {ue}")]
    ZeroChannel { ap: usize, ue: usize },

    #[error("zero rate for UE {0}; transmission latency is undefined")]
    ZeroRate(usize),

    #[error("split index {split} out of range 1..={num_points}")]
    SplitOutOfRange { split: usize, num_points: usize },

    #[error("bisection failed to bracket a root: {0}")]
    BisectionBracket(String),

    #[error("linear system is singular or badly conditioned")]
    SingularSystem,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
