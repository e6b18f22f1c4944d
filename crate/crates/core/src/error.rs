use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("vector norm {norm:e} is below the floor {floor:e}")]
    ZeroVector { norm: f64, floor: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("posterior normalizer {0:e} is degenerate")]
    DegeneratePosterior(f64),
    #[error("neurons {first} and {second} both match component {component}")]
    UnmatchedNeuron {
        first: usize,
        second: usize,
        component: usize,
    },
    #[error("quadrature normalization {0:e} is too small")]
    QuadratureFailure(f64),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("no neuron carries a valid label")]
    NoValidNeurons,
    #[error("training diverged at step {step}: loss {loss}")]
    DivergenceDetected { step: usize, loss: f64 },
    #[error("replay diverged from the recorded run at step {step}")]
    ReplayMismatch { step: u64 },
    #[error("pipeline does not expose input gradients")]
    GradientUnavailable,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
