//! The prompted-LLM baseline, replayed from the bundled transcript so it
//! runs offline. Set `ESG_LLM_API_KEY` and pass `remote` to query a live
//! OpenAI-compatible endpoint instead.
//!
//! ```text
//! cargo run --example zeroshot_baseline [-- remote]
//! ```

use anyhow::Result;
use esg_clarity::zeroshot::{
    build_prompt, bundled_fixture, bundled_replay_client, classify_zero_shot, evaluate_zero_shot, GenerativeClient,
    PromptTemplate,
};

fn main() -> Result<()> {
    let template = PromptTemplate::default();
    let items = bundled_fixture();
    let client = match std::env::args().nth(1).as_deref() {
        Some("remote") => GenerativeClient::remote_from_env()?,
        _ => bundled_replay_client(),
    };
    println!("template {} via {}\n", template.version, client.kind());
    println!("{}\n", build_prompt(&items[0].text, &template));

    let pairs: Vec<(&str, &str)> = items.iter().map(|g| (g.id.as_str(), g.text.as_str())).collect();
    let verdicts = classify_zero_shot(&client, &template, &pairs)?;
    for (item, v) in items.iter().zip(&verdicts) {
        let got = v.label.map_or("abstain".to_string(), |l| l.to_string());
        println!(
            "{} gold {:<9} got {:<9} {:?}",
            item.id,
            item.label.to_string(),
            got,
            v.raw_response
        );
    }

    let gold: Vec<_> = items.iter().map(|g| g.label).collect();
    let report = evaluate_zero_shot(&verdicts, &gold)?;
    println!(
        "\naccuracy {:.3}, macro F1 {:.4}, abstained {:?}",
        report.accuracy, report.macro_f1, report.abstained
    );
    Ok(())
}
