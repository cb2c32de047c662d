use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("branch {from}-{to} has zero series impedance")]
    SingularBranch { from: usize, to: usize },

    #[error("branch {from}-{to} not found")]
    BranchNotFound { from: usize, to: usize },

    #[error("branch {from}-{to} already carries a series device")]
    DeviceStacking { from: usize, to: usize },

    #[error("invalid device configuration: {0}")]
    InvalidDevice(String),

    #[error("series order error: need coefficient {needed}, have {available}")]
    Order { needed: usize, available: usize },

    #[error("singular reciprocal series: |I[0]| = {0:e} is below the zero threshold")]
    SingularReciprocal(f64),

    #[error("singular magnitude series: |I[0]| = {0:e} is below the zero threshold")]
    SingularMagnitude(f64),

    #[error("coefficient matrix is singular: {0}")]
    SingularMatrix(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("limit enforcement did not settle after {0} passes")]
    LimitCycling(usize),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
