use alloc::boxed::Box;
use alloc::string::String;

use crate::train::TrainTrace;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A non-finite value showed up while differentiating.
    #[error("non-finite value in gradient block `{block}`")]
    NonFinite { block: &'static str },
    /// Training produced a non-finite loss. The trace up to that point is kept
    /// for diagnosis.
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, trace: Box<TrainTrace> },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
