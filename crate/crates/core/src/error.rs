use thiserror::Error;

/// Errors raised by the solvers and the bi-fidelity machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("reproduction number undefined: {0}")]
    UndefinedR0(String),

    #[error("numeric failure at step {step}, stage {stage}{}: {detail}", node.map(|n| format!(", node {n}")).unwrap_or_default())]
    NumericFailure {
        step: usize,
        stage: usize,
        node: Option<usize>,
        detail: String,
    },

    #[error("negative density {value:e} in compartment {compartment} at step {step}")]
    Positivity {
        step: usize,
        compartment: usize,
        value: f64,
    },

    #[error("rank deficient candidate set: requested {requested} points, only {achievable} achievable")]
    RankDeficient { requested: usize, achievable: usize },

    #[error("ill-conditioned Gramian factor: diagonal entry {0:e}")]
    Conditioning(f64),

    #[error("relative error undefined: reference has zero norm")]
    ZeroReference,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn length_mismatch(what: &str, expected: usize, got: usize) -> Error {
    Error::Config(format!("{what}: expected length {expected}, got {got}"))
}

impl Error {
    /// Attaches a time-step index to step-local failures.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::NumericFailure {
                stage, node, detail, ..
            } => Error::NumericFailure {
                step,
                stage,
                node,
                detail,
            },
            Error::Positivity {
                compartment, value, ..
            } => Error::Positivity {
                step,
                compartment,
                value,
            },
            other => other,
        }
    }
}
