//! The hybrid recurrent + graph classifier: architecture, parameters,
//! training, checkpoints and inference.

pub mod arch;
pub mod checkpoint;
pub mod classifier;
pub mod forward;
pub mod params;
pub mod train;

pub use arch::{ArchitectureConfig, NUM_CLASSES};
pub use checkpoint::Classifier;
pub use classifier::{encode_unit, train_classifier, Prediction, Trained};
pub use forward::{argmax, forward, forward_batch, logits_batch, Encoded};
pub use params::ModelParams;
pub use train::{
    evaluate, log_csv, train, train_step, train_with, EpochLog, Evaluation, Example, TrainConfig, TrainOutcome,
};

use thiserror::Error;

use crate::cfg::CfgError;
use crate::frontend::{LexError, VocabError};
use crate::nn::{NnError, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("lex error at {}:{}: {}", .0.line, .0.col, .0.message)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Cfg(CfgError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("training and validation splits must be non-empty")]
    EmptySplit,
    #[error("loss became non-finite in epoch {epoch}")]
    DivergenceDetected { epoch: usize, last_good: Box<ModelParams<Tensor>> },
}

impl From<CfgError> for ModelError {
    fn from(e: CfgError) -> Self {
        match e {
            CfgError::Lex(l) => ModelError::Lex(l),
            other => ModelError::Cfg(other),
        }
    }
}
