//! Three-class clarity classification (Specific, Ambiguous, Generic).
//!
//! Two few-shot strategies share one [`Encoder`]:
//!
//! - **Contrastive**: [`generate_contrastive_pairs`] builds same-label and
//!   cross-label pairs, [`finetune_encoder_contrastive`] tunes the encoder so
//!   pair cosines match their targets, then [`train_head`] fits a linear head
//!   on the tuned embeddings.
//! - **Prompt tuning**: [`train_prompt_tuned`] keeps the encoder frozen and
//!   learns only a [`SoftPrompt`] and the head.
//!
//! The bundled encoder is a single self-attention block over hashed word
//! embeddings, small enough to train on a CPU in seconds. It starts from a
//! random initialization; [`self_supervised_pairs`] can adapt it to a domain
//! corpus before few-shot training.

mod contrastive;
mod encoder;
mod head;
mod model;
mod pairs;
mod prompt;

use thiserror::Error;

use crate::io::IoError;
use crate::label::ClarityLabel;

pub use contrastive::{cosine_loss, finetune_encoder_contrastive, pair_set_loss, ContrastiveOptions, LossTrace};
pub use encoder::{
    Encoder, EncoderConfig, EncoderGrads, EncoderHandle, EncoderMode, EncoderWeights, Pooling, Trace,
    MAX_SEQUENCE_LENGTH,
};
pub use head::{argmax_canonical, softmax, HeadOptions, LinearHead, NUM_CLASSES};
pub use model::{
    evaluate_clarity, predict_batch, predict_clarity, train_contrastive_classifier, train_head, train_head_with,
    ClarityModel, ClarityPrediction, ClarityTrainingMeta, ModelKind, PredictionRecord, MODEL_FORMAT_VERSION,
};
pub use pairs::{generate_contrastive_pairs, self_supervised_pairs, Pair, PairBatch, DEFAULT_PAIRS_PER_ITEM};
pub use prompt::{train_prompt_tuned, trainable_parameter_count, PromptOptions, SoftPrompt, DEFAULT_VIRTUAL_TOKENS};

#[derive(Debug, Error)]
pub enum ClarityError {
    #[error("need at least 2 labeled items, got {0}")]
    TooFewItems(usize),
    #[error("all items share one label, so no negative pairs exist")]
    SingleClassSet,
    #[error("training data has no {0} examples; all three classes are required")]
    MissingClass(ClarityLabel),
    #[error("loss became non-finite at epoch {epoch}, step {step}; lower the learning rate")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("encoder is frozen and cannot be fine-tuned")]
    EncoderFrozen,
    #[error("encoder digest mismatch: expected {expected}, found {actual}")]
    DigestMismatch { expected: String, actual: String },
    #[error("unsupported model format_version {0}")]
    FormatVersion(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] IoError),
}
