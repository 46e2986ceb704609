//! ESG vs non-ESG sentence filtering.
//!
//! A keyword [`Lexicon`] weak-labels sentences to bootstrap training data.
//! The production filter is a class-weighted logistic regression over
//! [`TermFeaturizer`] TF-IDF vectors, with the regularization strength picked
//! by stratified cross-validation.

mod featurizer;
mod lexicon;
mod logistic;

use thiserror::Error;

pub use featurizer::{SparseVec, TermFeaturizer};
pub use lexicon::{weak_label_lexicon, Lexicon, LexiconError};
pub use logistic::{
    evaluate_relevance, predict_relevance, train_relevance, LinearRelevanceModel, RelevanceHyper, TrainingMeta,
    MODEL_FORMAT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelevanceError {
    #[error("cannot fit a featurizer on an empty corpus")]
    EmptyCorpus,
    #[error("training set has a single class; both ESG and NonESG examples are required")]
    SingleClassTrainingSet,
    #[error("training set has {0} examples; at least {min} are required", min = logistic::MIN_TRAINING_SIZE)]
    TooFewExamples(usize),
    #[error("unsupported model format_version {0}")]
    FormatVersion(u32),
    #[error("malformed model: {0}")]
    Malformed(String),
}
