use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension d = {0}: only d = 3 is implemented")]
    UnsupportedDimension(usize),

    #[error("kernel is singular at the lattice origin (reduced |x| = {0:.3e})")]
    SingularInput(f64),

    #[error("particles {i} and {j} coincide (distance {dist:.3e})")]
    CoincidentPoints { i: usize, j: usize, dist: f64 },

    #[error("smearing radius r = {0} outside the open interval (0, 1/2)")]
    SmearingRadius(f64),

    #[error("unsupported confinement: {0}")]
    UnsupportedPotential(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel table: {0}")]
    TableFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error("certified energy floor violated: {0}")]
    FloorViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
