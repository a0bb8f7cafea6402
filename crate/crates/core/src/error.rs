use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error. Every variant names the module that raised it so that
/// front ends can report "which stage failed" without matching on text.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("potential: {0}")]
    Potential(String),
    #[error("operator: {0}")]
    Operator(String),
    #[error("eigen: {0}")]
    Eigen(String),
    #[error("semigroup: {0}")]
    Semigroup(String),
    #[error("verify: {0}")]
    Verify(String),
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::Potential(_) => "potential",
            Error::Operator(_) => "operator",
            Error::Eigen(_) => "eigen",
            Error::Semigroup(_) => "semigroup",
            Error::Verify(_) => "verify",
        }
    }
}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(format!($($arg)*)))
    };
}
pub(crate) use bail;
