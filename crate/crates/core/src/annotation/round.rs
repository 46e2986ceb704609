use serde::{Deserialize, Serialize};

use super::store::AnnotationStore;
use super::{propose_weak_labels, select_seed_batch, AnnotationError, AnnotationRecord, WeakLabelProposal};
use crate::clarity::{ClarityError, ClarityModel};
use crate::label::{AnnotationLabel, ClarityLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub sentence_id: String,
    pub text: String,
    /// Absent in the seed round, before any model exists.
    pub proposal: Option<WeakLabelProposal>,
}

/// A human (or scripted) reviewer. Returning `None` skips the item.
pub trait Reviewer {
    fn id(&self) -> &str;
    fn review(&mut self, item: &ReviewItem) -> Option<AnnotationLabel>;
}

/// What carries over between rounds.
#[derive(Debug, Clone, Default)]
pub struct LoopState {
    pub round: u32,
    pub model: Option<ClarityModel>,
    pub model_version: Option<String>,
    pub retrains: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u32,
    pub queued: usize,
    pub reviewed: usize,
    pub resolved_before: usize,
    pub resolved_after: usize,
    pub retrained: bool,
    pub model_version: Option<String>,
}

/// Trainable labels from the store, latest record per sentence.
pub fn resolved_training_set(store: &AnnotationStore) -> Vec<(String, ClarityLabel)> {
    store
        .resolved()
        .into_iter()
        .filter_map(|(sid, l)| Some((store.sentence(&sid)?.text.clone(), l.clarity()?)))
        .collect()
}

/// Fits a clarity model on resolved labels.
pub type TrainFn<'a> = dyn FnMut(&[(String, ClarityLabel)]) -> Result<ClarityModel, ClarityError> + 'a;

/// One iteration of the model-assisted loop.
///
/// Without a model the queue is a random seed batch; with one, the
/// least-confident weak labels come first. After the queue is reviewed the
/// model is retrained on every resolved trainable label, provided all three
/// classes are present.
pub fn run_annotation_round(
    state: &mut LoopState,
    store: &mut AnnotationStore,
    reviewer: &mut dyn Reviewer,
    batch_size: usize,
    train: &mut TrainFn<'_>,
) -> Result<RoundSummary, AnnotationError> {
    let unresolved = store.unresolved();
    if unresolved.is_empty() {
        return Err(AnnotationError::NoUnresolvedSentences);
    }
    let resolved_before = store.resolved().len();
    let take = batch_size.min(unresolved.len());

    let queue: Vec<ReviewItem> = match (&state.model, &state.model_version) {
        (Some(model), Some(version)) => propose_weak_labels(Some(model), version, &unresolved)?
            .into_iter()
            .take(take)
            .map(|p| ReviewItem {
                text: store
                    .sentence(&p.sentence_id)
                    .map(|s| s.text.clone())
                    .unwrap_or_default(),
                sentence_id: p.sentence_id.clone(),
                proposal: Some(p),
            })
            .collect(),
        _ => select_seed_batch(&unresolved, take, state.seed.wrapping_add(u64::from(state.round)))?
            .into_iter()
            .map(|sid| ReviewItem {
                text: store.sentence(&sid).map(|s| s.text.clone()).unwrap_or_default(),
                sentence_id: sid,
                proposal: None,
            })
            .collect(),
    };

    let mut reviewed = 0;
    for item in &queue {
        if let Some(label) = reviewer.review(item) {
            store.record(AnnotationRecord::new(
                &item.sentence_id,
                reviewer.id(),
                label,
                state.round,
            ))?;
            reviewed += 1;
        }
    }

    let training = resolved_training_set(store);
    let has_all = <ClarityLabel as crate::label::ClassLabel>::ALL
        .iter()
        .all(|c| training.iter().any(|(_, l)| l == c));
    let mut retrained = false;
    if has_all && reviewed > 0 {
        state.model = Some(train(&training)?);
        state.retrains += 1;
        state.model_version = Some(format!("v{}", state.retrains));
        retrained = true;
    }
    let summary = RoundSummary {
        round: state.round,
        queued: queue.len(),
        reviewed,
        resolved_before,
        resolved_after: store.resolved().len(),
        retrained,
        model_version: state.model_version.clone(),
    };
    state.round += 1;
    Ok(summary)
}
