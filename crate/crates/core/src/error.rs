use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Input data violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// Dimensions of two operands do not line up.
    #[error("shape error: {0}")]
    Shape(String),
    /// A caller broke an API precondition (non-scalar loss, missing dependency, ...).
    #[error("contract error: {0}")]
    Contract(String),
    /// Non-finite values appeared during optimization.
    #[error("training diverged: {0}")]
    Training(String),
    /// A correlation was requested over a pool without variance.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
