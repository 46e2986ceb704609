//! Render a color-coded document report and a method comparison table.
//!
//! ```text
//! cargo run --example report
//! ```

use anyhow::Result;
use esg_clarity::eval::{
    comparison_report, compute_metrics, render_document_report, strip_markup, MethodKind, NamedReport, ReportFormat,
};
use esg_clarity::ingest::SentenceRecord;
use esg_clarity::pipeline::{score_and_report, SentencePrediction};
use esg_clarity::scoring::ScoreConfig;
use esg_clarity::{ClarityLabel, RelevanceLabel};

fn main() -> Result<()> {
    use ClarityLabel::*;
    let sentences = [
        (
            "The Fund invests at least 80% of its assets in equity securities.",
            None,
        ),
        (
            "The Fund excludes issuers with more than 5% of revenue from thermal coal.",
            Some(Specific),
        ),
        (
            "The Adviser favors companies with strong sustainability practices.",
            Some(Ambiguous),
        ),
        ("The Adviser may consider ESG factors.", Some(Generic)),
    ];
    let rows: Vec<SentencePrediction> = sentences
        .iter()
        .enumerate()
        .map(|(i, (text, label))| SentencePrediction {
            relevance: Some(if label.is_some() {
                RelevanceLabel::Esg
            } else {
                RelevanceLabel::NonEsg
            }),
            clarity: *label,
            ..SentencePrediction::unclassified(&SentenceRecord::new("green-fund", i, *text))
        })
        .collect();

    let (_, reports) = score_and_report(&rows, &ScoreConfig::default());
    let html = render_document_report(&reports[0], ReportFormat::Html);
    println!("{html}");
    println!("{}", render_document_report(&reports[0], ReportFormat::Markdown));
    assert_eq!(
        strip_markup(&html).as_deref(),
        Some(sentences.map(|s| s.0).join(" ").as_str())
    );

    let ours = compute_metrics(&[
        (Specific, Specific),
        (Ambiguous, Ambiguous),
        (Generic, Generic),
        (Generic, Ambiguous),
    ])?;
    let llm = compute_metrics(&[
        (Specific, Generic),
        (Ambiguous, Ambiguous),
        (Generic, Generic),
        (Generic, Specific),
    ])?;
    let table = comparison_report(&[
        NamedReport::new("fine-tuned", MethodKind::FineTuned, ours),
        NamedReport::new("zero-shot", MethodKind::ZeroShot, llm),
    ]);
    print!("{}", table.to_markdown());
    Ok(())
}
