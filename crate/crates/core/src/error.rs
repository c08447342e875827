use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("multisine band contains no harmonic of fs/N")]
    EmptyHarmonicSet,

    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} diverged at sample {index}")]
    Diverged { what: &'static str, index: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("output is constant over the evaluated range; fit index undefined")]
    ConstantOutput,

    #[error("optimizer aborted at iteration {iteration}: {reason}")]
    OptimizerAborted {
        iteration: usize,
        reason: &'static str,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
