//! Every stage in one run: ingest a small prospectus universe, filter ESG
//! sentences, classify clarity, then score, rate and report each fund.
//!
//! ```text
//! cargo run --example end_to_end
//! ```

use anyhow::Result;
use esg_clarity::clarity::{train_contrastive_classifier, ContrastiveOptions, Encoder, EncoderConfig};
use esg_clarity::eval::{render_document_report, ReportFormat};
use esg_clarity::ingest::{ingest_directory, HeadingPatterns, Segmenter};
use esg_clarity::pipeline::{classify_clarity, classify_relevance, score_and_report};
use esg_clarity::relevance::{train_relevance, weak_label_lexicon, Lexicon, RelevanceHyper};
use esg_clarity::scoring::ScoreConfig;
use esg_clarity::synth::{synthetic_clarity_corpus, synthetic_relevance_corpus};

const FUNDS: &[(&str, &[&str])] = &[
    (
        "clear-water",
        &[
            "The Fund excludes issuers that derive more than 5% of revenue from thermal coal.",
            "The Fund excludes companies involved in controversial weapons.",
            "The Adviser favors issuers with strong environmental practices.",
        ],
    ),
    (
        "broad-green",
        &[
            "The Adviser may consider ESG factors.",
            "The Adviser favors issuers with strong governance practices.",
            "The Fund may invest in foreign securities.",
        ],
    ),
    (
        "plain-index",
        &[
            "The Fund seeks to track its index.",
            "The Adviser may consider ESG factors.",
        ],
    ),
];

fn main() -> Result<()> {
    let dir = tempfile::tempdir()?;
    for (name, sentences) in FUNDS {
        let text = format!(
            "Investment Objective\nThe Fund seeks growth.\n\nPrincipal Investment Strategies\n{}\n\nPrincipal Risks\nYou may lose money.\n",
            sentences.join(" ")
        );
        std::fs::write(dir.path().join(format!("{name}.txt")), text)?;
    }
    let ingested = ingest_directory(dir.path(), &HeadingPatterns::default(), &Segmenter::default())?;
    println!(
        "{} sentences from {} funds",
        ingested.sentences.len(),
        ingested.documents.len()
    );

    // lexicon weak labels on the funds' own sentences, topped up with synthetic text
    let lexicon = Lexicon::default();
    let mut weak = synthetic_relevance_corpus(1000, 0.5, 1);
    weak.extend(
        ingested
            .sentences
            .iter()
            .map(|s| (s.text.clone(), weak_label_lexicon(&s.text, &lexicon))),
    );
    let relevance = train_relevance(&weak, &RelevanceHyper::default(), 7)?;
    let encoder = Encoder::new(EncoderConfig::small(), 1)?;
    let (clarity, _) = train_contrastive_classifier(
        &encoder,
        &synthetic_clarity_corpus(30, 2),
        8,
        &ContrastiveOptions::default(),
    )?;

    let rows = classify_relevance(&relevance, &ingested.sentences);
    let rows = classify_clarity(&clarity, rows);
    let (scoring, reports) = score_and_report(&rows, &ScoreConfig::default());
    print!("{}", scoring.to_csv());
    for r in &reports {
        println!("\n{}", render_document_report(r, ReportFormat::Markdown));
    }
    Ok(())
}
