use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("time step {dt:e} s violates the CFL bound; use dt <= {suggested:e} s")]
    Cfl { dt: f64, suggested: f64 },

    #[error("model run failed at omega = ({omega1}, {omega2}, {omega3}): {reason}")]
    ModelRun {
        omega1: f64,
        omega2: f64,
        omega3: f64,
        reason: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sample {index} violates invariant: {message}")]
    Invariant { index: usize, message: String },

    #[error("singular or ill-posed system: {0}")]
    Singular(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by the inputs' shape.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Cfl { .. } | Error::ModelRun { .. } | Error::Singular(_) | Error::Numeric(_)
        )
    }
}
