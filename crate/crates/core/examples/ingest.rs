//! Pull the strategy section out of a prospectus and split it into sentences.
//!
//! ```text
//! cargo run --example ingest [-- path/to/prospectus.txt|.pdf]
//! ```

use anyhow::Result;
use esg_clarity::ingest::{extract_strategy_section, load_document, segment_sentences, HeadingPatterns, Segmenter};
use esg_clarity::synth::fixture_prospectus;

fn main() -> Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let p = std::env::temp_dir().join("esg-clarity-fixture.txt");
            std::fs::write(&p, fixture_prospectus())?;
            p
        }
    };
    let doc = load_document(&path)?;
    println!(
        "{}: {} pages via {}",
        doc.doc_id,
        doc.pages.len(),
        doc.extraction_meta.extractor
    );

    let section = extract_strategy_section(&doc, &HeadingPatterns::default())?;
    println!("section {:?} at bytes {:?}", section.name, section.char_span);

    for s in segment_sentences(&section, &Segmenter::default()) {
        println!("{:>3}  {}", s.index, s.text);
    }
    Ok(())
}
