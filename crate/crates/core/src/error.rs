use thiserror::Error;

/// Errors raised by the sampler, its kernels, targets and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("proposal density zero at own sample")]
    ZeroProposalDensity,

    #[error("kernel sampling failed: {0}")]
    KernelSampling(String),

    #[error("initial state outside support after {attempts} attempts")]
    InitialOutOfSupport { attempts: usize },

    #[error("regeneration detection requires normalized target")]
    UnnormalizedTarget,

    #[error("regeneration detection requires a normalized proposal density")]
    UnnormalizedKernel,

    #[error("insufficient data: {have} points, need {need}")]
    InsufficientData { have: usize, need: usize },

    #[error("surrogate degenerate: {0} consecutive rejections")]
    SurrogateDegenerate(u64),

    #[error("surrogate normal equations are singular")]
    SingularFit,

    #[error("history entry at iteration {0} carries no simulator response")]
    MissingResponse(u64),

    #[error("simulator timeout")]
    SimulatorTimeout,

    #[error("simulator died")]
    SimulatorDied,

    #[error("malformed simulator reply: {0:?}")]
    MalformedReply(String),

    #[error("simulator error for request {id}: {message}")]
    Simulator { id: u64, message: String },

    #[error("target is not directly sampleable")]
    NotSampleable,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{message}")]
    Config { message: String, line: Option<usize> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(message: impl Into<String>, line: Option<usize>) -> Self {
        let message = message.into();
        let message = match line {
            Some(l) => format!("{message} (line {l})"),
            None => message,
        };
        Error::Config { message, line }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
