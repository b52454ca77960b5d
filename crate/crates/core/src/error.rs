use thiserror::Error;

/// Crate-wide error type. Validation failures (bad arguments, infeasible
/// configurations) are distinguished from runtime failures (solver breakdown,
/// bridge faults, I/O) so callers can map them to different exit codes.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible sampling mask: {0}")]
    MaskInfeasible(String),

    #[error("conjugate gradient did not reach tolerance {tolerance:.3e} within {iterations} iterations (residual {residual:.3e})")]
    CgNoConvergence {
        residual: f64,
        tolerance: f64,
        iterations: usize,
    },

    #[error("iterate became non-finite at iteration {iteration} ({what})")]
    NonFinite { iteration: usize, what: String },

    /// Attaches the failing outer iteration to an error from inside a
    /// solver loop. The source variant stays inspectable through `source`.
    #[error("at iteration {iteration}: {source}")]
    At {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("solver diverged: {0}")]
    Diverged(String),

    #[error("denoiser failure: {0}")]
    Denoiser(String),

    #[error("external denoiser timed out after {0:?}")]
    BridgeTimeout(std::time::Duration),

    #[error("malformed bridge response: {0}")]
    BridgeMalformed(String),

    #[error("bridge response layout does not match request: {0}")]
    BridgeLayoutMismatch(String),

    #[error("bridge response contains non-finite values")]
    BridgeNonFinite,

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("unsupported image: {0}")]
    ImageFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
