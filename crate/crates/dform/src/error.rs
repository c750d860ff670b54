use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("degree overflow: ({k},{m}) exceeds dimension {dim}")]
    DegreeOverflow { k: usize, m: usize, dim: usize },
    #[error("degree underflow: operation needs a positive degree, got ({k},{m})")]
    DegreeUnderflow { k: usize, m: usize },
    #[error("degree mismatch: ({0},{1}) vs ({2},{3})")]
    DegreeMismatch(usize, usize, usize, usize),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("point {0:?} lies outside the chart domain")]
    OutOfDomain(Vec<f64>),
    #[error("node {0} is not a boundary node")]
    NotBoundaryNode(usize),
    #[error("face {0} is not a face of this grid")]
    NotBoundaryFace(usize),
    #[error("field is not symmetric (deviation {0:.3e})")]
    NotSymmetric(f64),
    #[error("fields live on different charts or grids")]
    DomainMismatch,
    #[error("operation requires dimension {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("solver did not converge: {0}")]
    SolverDiverged(String),
    #[error("no spectral gap: ratio {ratio:.3e} below {required:.1e}")]
    NoSpectralGap { ratio: f64, required: f64 },
    #[error("Killing basis was computed on a different chart or grid")]
    BasisMismatch,
    #[error("problem too large: {unknowns} unknowns (limit {limit})")]
    TooLarge { unknowns: usize, limit: usize },
    #[error("field file: {0}")]
    Format(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the command-line tool: 2 for invalid input,
    /// 3 for solver failures, 4 when no Killing gap is found.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverDiverged(_) => 3,
            Error::NoSpectralGap { .. } => 4,
            _ => 2,
        }
    }
}
