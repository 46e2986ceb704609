//! Weak-label sentences with the ESG lexicon, fit the TF-IDF logistic
//! filter and check it on held-out sentences.
//!
//! ```text
//! cargo run --example relevance_filter
//! ```

use anyhow::Result;
use esg_clarity::relevance::{
    evaluate_relevance, predict_relevance, train_relevance, weak_label_lexicon, Lexicon, RelevanceHyper,
};
use esg_clarity::synth::synthetic_relevance_corpus;
use esg_clarity::RelevanceLabel;

fn main() -> Result<()> {
    let corpus = synthetic_relevance_corpus(2000, 0.4, 11);
    let (train, test) = corpus.split_at(1600);

    // labels come from the lexicon, not the generator
    let lexicon = Lexicon::default();
    let weak: Vec<(String, RelevanceLabel)> = train
        .iter()
        .map(|(t, _)| (t.clone(), weak_label_lexicon(t, &lexicon)))
        .collect();
    let agree = weak.iter().zip(train).filter(|(w, g)| w.1 == g.1).count();
    println!(
        "lexicon agrees with truth on {agree}/{} training sentences",
        train.len()
    );

    let model = train_relevance(&weak, &RelevanceHyper::default(), 7)?;
    println!(
        "C = {} chosen from {:?}, {} terms",
        model.training_meta.c,
        model.training_meta.cv_f1,
        model.featurizer.vocabulary_size()
    );

    let report = evaluate_relevance(&model, test)?;
    let esg = report.class("ESG").map(|c| c.f1).unwrap_or_default();
    println!("held-out ESG F1 {esg:.3}, accuracy {:.3}", report.accuracy);

    for s in [
        "The Fund excludes companies that derive revenue from thermal coal.",
        "The Fund may invest in derivatives for hedging purposes.",
    ] {
        let (label, p) = predict_relevance(&model, s);
        println!("{label:>6} {p:.3}  {s}");
    }
    Ok(())
}
