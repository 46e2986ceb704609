//! Model-assisted annotation: seed sampling, weak-label proposals, the
//! append-only annotation store, agreement statistics, gold export and
//! stratified splits.

mod agreement;
mod gold;
mod round;
mod store;

use chrono::{SecondsFormat, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clarity::{predict_batch, ClarityError, ClarityModel};
use crate::ingest::SentenceRecord;
use crate::io::IoError;
use crate::label::{AnnotationLabel, ClarityLabel};

pub use agreement::{cohen_kappa, compute_agreement, AgreementReport, PairAgreement};
pub use gold::{
    export_gold, import_dataset, make_splits, ExportReport, GoldDataset, GoldExport, GoldItem, ImportMapping,
    ImportReport, SplitFractions, SplitSet,
};
pub use round::{resolved_training_set, run_annotation_round, LoopState, ReviewItem, Reviewer, RoundSummary, TrainFn};
pub use store::{AnnotationStore, StoreSnapshot, JOURNAL_FILE, SNAPSHOT_FILE};

pub const DEFAULT_SEED_BATCH: usize = 20;

/// Annotator id whose records settle disagreements at export.
pub const ADJUDICATOR: &str = "adjudicator";

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("requested {n} sentences but only {available} are available")]
    NTooLarge { n: usize, available: usize },
    #[error("no trained model is available to propose labels")]
    UntrainedModel,
    #[error("unknown sentence_id {0:?}")]
    UnknownSentence(String),
    #[error("{annotator_id} already labeled {sentence_id} in round {round}")]
    DuplicateAnnotation {
        sentence_id: String,
        annotator_id: String,
        round: u32,
    },
    #[error("agreement needs at least two annotators sharing a sentence")]
    InsufficientOverlap,
    #[error("label {label} has {n} items; at least 3 are needed to fill every split")]
    LabelTooSmall { label: ClarityLabel, n: usize },
    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    InvalidFractions([f64; 3]),
    #[error("every sentence is resolved")]
    NoUnresolvedSentences,
    #[error("import failed: {0}")]
    Import(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Clarity(#[from] ClarityError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub sentence_id: String,
    pub annotator_id: String,
    pub label: AnnotationLabel,
    /// 0 is the seed round.
    pub round: u32,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

impl AnnotationRecord {
    pub fn new(sentence_id: &str, annotator_id: &str, label: AnnotationLabel, round: u32) -> Self {
        Self {
            sentence_id: sentence_id.to_string(),
            annotator_id: annotator_id.to_string(),
            label,
            round,
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        }
    }

    /// `sentence_id#annotator_id#round`, unique within a store.
    pub fn record_id(&self) -> String {
        format!("{}#{}#{}", self.sentence_id, self.annotator_id, self.round)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLabelProposal {
    pub sentence_id: String,
    pub proposed: ClarityLabel,
    /// Largest class probability, in `[1/3, 1]`.
    pub confidence: f64,
    pub model_version: String,
}

/// `n` distinct sentence ids drawn uniformly without replacement.
pub fn select_seed_batch(sentences: &[SentenceRecord], n: usize, seed: u64) -> Result<Vec<String>, AnnotationError> {
    if n > sentences.len() {
        return Err(AnnotationError::NTooLarge {
            n,
            available: sentences.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<String> = sentences.iter().map(|s| s.sentence_id.clone()).collect();
    let (picked, _) = ids.partial_shuffle(&mut rng, n);
    Ok(picked.to_vec())
}

/// One proposal per sentence, least confident first.
pub fn propose_weak_labels(
    model: Option<&ClarityModel>,
    model_version: &str,
    unlabeled: &[SentenceRecord],
) -> Result<Vec<WeakLabelProposal>, AnnotationError> {
    let model = model.ok_or(AnnotationError::UntrainedModel)?;
    let preds = predict_batch(model, unlabeled);
    let mut out: Vec<WeakLabelProposal> = unlabeled
        .iter()
        .zip(preds)
        .map(|(s, p)| WeakLabelProposal {
            sentence_id: s.sentence_id.clone(),
            proposed: p.label,
            confidence: p.probs.iter().copied().fold(0.0, f64::max),
            model_version: model_version.to_string(),
        })
        .collect();
    out.sort_by(|a, b| a.confidence.total_cmp(&b.confidence));
    Ok(out)
}
