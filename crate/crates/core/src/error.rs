use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(&'static str),

    #[error("invalid probability {0}; expected a value in [0, 1]")]
    InvalidProbability(f64),

    #[error("edge ({0}, {1}) is out of range for a graph with {2} nodes")]
    InvalidEdge(usize, usize, usize),

    #[error("shape mismatch in {op}: expected {expected:?}, got {got:?}")]
    Shape {
        op: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("non-finite activation input {0}")]
    NonFiniteInput(f64),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid aggregation: {0}")]
    InvalidAggregation(String),

    #[error("invalid noise variance {0}; must be finite and non-negative")]
    InvalidNoise(f64),

    #[error("unknown activation `{0}`")]
    UnknownActivation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("auxiliary matrix is ill-conditioned (cond {cond:e} > threshold {threshold:e}); use more samples")]
    IllConditioned { cond: f64, threshold: f64 },

    #[error("degenerate update: ‖U‖_F = {0:e}")]
    DegenerateUpdate(f64),

    #[error("training diverged: loss {0:e}")]
    Diverged(f64),
}

impl Error {
    /// Failures caused by the numerics of a run rather than by its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. } | Error::DegenerateUpdate(_) | Error::Diverged(_) | Error::NonFinite(_)
        )
    }
}
