//! Run the model-assisted annotation loop with two scripted annotators,
//! measure their agreement and export the gold set.
//!
//! ```text
//! cargo run --example annotation_loop
//! ```

use std::collections::HashMap;

use anyhow::Result;
use esg_clarity::annotation::{
    compute_agreement, export_gold, make_splits, run_annotation_round, AnnotationStore, LoopState, ReviewItem,
    Reviewer, SplitFractions,
};
use esg_clarity::clarity::{train_head, Encoder, EncoderConfig};
use esg_clarity::ingest::SentenceRecord;
use esg_clarity::synth::synthetic_clarity_corpus;
use esg_clarity::{AnnotationLabel, ClarityLabel};

/// Labels from a truth table, flipping every `noise`-th item to Generic.
struct Scripted {
    id: String,
    truth: HashMap<String, ClarityLabel>,
    noise: usize,
    seen: usize,
    accepted_proposals: usize,
}

impl Reviewer for Scripted {
    fn id(&self) -> &str {
        &self.id
    }

    fn review(&mut self, item: &ReviewItem) -> Option<AnnotationLabel> {
        self.seen += 1;
        let truth = *self.truth.get(&item.sentence_id)?;
        let label = if self.seen.is_multiple_of(self.noise) {
            ClarityLabel::Generic
        } else {
            truth
        };
        if item.proposal.as_ref().is_some_and(|p| p.proposed == label) {
            self.accepted_proposals += 1;
        }
        Some(label.into())
    }
}

fn main() -> Result<()> {
    let labeled = synthetic_clarity_corpus(30, 3);
    let corpus: Vec<SentenceRecord> = labeled
        .iter()
        .enumerate()
        .map(|(i, (t, _))| SentenceRecord::new("pool", i, t.clone()))
        .collect();
    let truth: HashMap<String, ClarityLabel> = corpus
        .iter()
        .zip(&labeled)
        .map(|(s, (_, l))| (s.sentence_id.clone(), *l))
        .collect();
    let mut store = AnnotationStore::in_memory(corpus);

    let encoder = Encoder::new(EncoderConfig::small(), 5)?;
    let mut train = |set: &[(String, ClarityLabel)]| train_head(&encoder, set, 0);
    let mut state = LoopState {
        seed: 9,
        ..Default::default()
    };
    let mut first = Scripted {
        id: "ann1".into(),
        truth: truth.clone(),
        noise: 9,
        seen: 0,
        accepted_proposals: 0,
    };
    while !store.unresolved().is_empty() {
        let s = run_annotation_round(&mut state, &mut store, &mut first, 20, &mut train)?;
        println!(
            "round {}: reviewed {}, resolved {} -> {}, model {:?}",
            s.round, s.reviewed, s.resolved_before, s.resolved_after, s.model_version
        );
    }
    println!("ann1 accepted {} model proposals", first.accepted_proposals);

    // a second pass by another annotator for agreement
    let mut second = Scripted {
        id: "ann2".into(),
        truth,
        noise: 7,
        seen: 0,
        accepted_proposals: 0,
    };
    let ids: Vec<String> = store.corpus().iter().map(|s| s.sentence_id.clone()).collect();
    for sid in ids {
        let item = ReviewItem {
            text: String::new(),
            sentence_id: sid.clone(),
            proposal: None,
        };
        if let Some(label) = second.review(&item) {
            store.record(esg_clarity::annotation::AnnotationRecord::new(
                &sid,
                "ann2",
                label,
                state.round,
            ))?;
        }
    }

    let agreement = compute_agreement(store.records())?;
    for p in &agreement.pairs {
        println!(
            "{} vs {}: {} shared, observed {:.3}, kappa {:.3}",
            p.annotator_a, p.annotator_b, p.shared, p.observed, p.kappa
        );
    }

    let export = export_gold(store.records(), store.corpus());
    println!("gold: {:?}", export.report);
    let splits = make_splits(&export.dataset, SplitFractions::default(), 42)?;
    println!(
        "splits: {} train, {} validation, {} test",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len()
    );
    Ok(())
}
