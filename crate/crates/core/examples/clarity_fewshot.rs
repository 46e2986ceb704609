//! Train both few-shot clarity classifiers on a synthetic corpus and compare
//! them on held-out sentences.
//!
//! ```text
//! cargo run --example clarity_fewshot
//! ```

use std::time::Instant;

use anyhow::Result;
use esg_clarity::clarity::{
    evaluate_clarity, predict_clarity, train_contrastive_classifier, train_prompt_tuned, ContrastiveOptions, Encoder,
    EncoderConfig, PromptOptions,
};
use esg_clarity::synth::synthetic_clarity_corpus;

fn main() -> Result<()> {
    let corpus = synthetic_clarity_corpus(40, 7);
    let (train, test) = corpus.split_at(60);
    println!("{} training sentences, {} held out", train.len(), test.len());

    let started = Instant::now();
    let encoder = Encoder::new(EncoderConfig::small(), 1)?;
    let opts = ContrastiveOptions {
        seed: 1,
        ..Default::default()
    };
    let (model, trace) = train_contrastive_classifier(&encoder, train, 8, &opts)?;
    let report = evaluate_clarity(&model, test)?;
    println!(
        "contrastive: pair loss {:.4} -> {:.4}, macro F1 {:.3}, {:.1}s",
        trace.initial,
        trace.final_loss,
        report.macro_f1,
        started.elapsed().as_secs_f64()
    );

    let started = Instant::now();
    let frozen = Encoder::new(EncoderConfig::small(), 2)?.frozen();
    let digest = frozen.parameter_digest();
    let opts = PromptOptions {
        num_virtual_tokens: 8,
        epochs: 10,
        seed: 1,
        ..Default::default()
    };
    let prompted = train_prompt_tuned(&frozen, train, &opts)?;
    let report = evaluate_clarity(&prompted, test)?;
    println!(
        "prompt-tuned: macro F1 {:.3}, backbone unchanged: {}, {:.1}s",
        report.macro_f1,
        prompted.encoder.parameter_digest() == digest,
        started.elapsed().as_secs_f64()
    );

    let s = "Companies engaged in the business of controversial weapons or that own 25% or more of a company engaged in this activity.";
    let p = predict_clarity(&model, s);
    println!("{s}\n  -> {} {:?}", p.label, p.probs);
    Ok(())
}
