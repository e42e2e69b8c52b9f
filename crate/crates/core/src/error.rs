use thiserror::Error;

/// Errors raised across the lab.
///
/// The variants map onto the CLI exit codes: parameter/structural/thickness
/// problems are validation failures, numerical variants are solver failures,
/// and `LemmaViolation` signals that a checked inequality failed at the
/// current resolution.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("malformed interval set: {0}")]
    Structural(String),

    #[error("set is not ({l}, {zeta})-thick: window [{window_start}, {window_end}] holds {measure} < {required}")]
    ThicknessViolation {
        l: f64,
        zeta: f64,
        window_start: f64,
        window_end: f64,
        measure: f64,
        required: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("not observable at this resolution: lambda_min = {lambda_min:e} (norm {norm:e})")]
    NotObservable { lambda_min: f64, norm: f64 },

    #[error("degenerate control set: {0}")]
    DegenerateSet(String),

    #[error("conjugate gradients stalled after {iterations} iterations (last residual {last:e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("identity violated: {0}")]
    IdentityViolation(String),

    #[error("lemma violated: {0}")]
    LemmaViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Parameter(msg.into()))
}
