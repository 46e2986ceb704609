//! Zero-shot baseline: prompt a generative model for the clarity label and
//! score its answers with the same metrics as the trained classifiers.
//!
//! Answers come from a [`GenerativeClient`]. The remote client speaks the
//! OpenAI-compatible chat API and journals every exchange; the replay client
//! answers from such a journal, so any live run can be re-scored offline.

mod client;
mod template;
mod verdict;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;
use tracing::warn;

use crate::annotation::GoldItem;
use crate::eval::{compute_metrics_with_abstain, MetricsError, MetricsReport};
use crate::io::IoError;
use crate::label::ClarityLabel;

pub use client::{
    prompt_digest, GenerativeClient, RemoteClient, RemoteConfig, ReplayClient, TranscriptEntry, ENV_API_KEY,
    ENV_ENDPOINT, ENV_MODEL,
};
pub use template::{build_prompt, PromptTemplate, SENTENCE_SLOT};
pub use verdict::{parse_verdict, ParsedVerdict};

const FIXTURE: &str = include_str!("../../data/zeroshot_fixture.jsonl");
const TRANSCRIPT: &str = include_str!("../../data/zeroshot_transcript.jsonl");

#[derive(Debug, Error)]
pub enum ZeroShotError {
    #[error("zero-shot client misconfigured: {0}")]
    ClientMisconfigured(String),
    #[error("replay transcript has no entry for sentence {0}")]
    TranscriptMissingEntry(String),
    #[error("invalid prompt template: {0}")]
    Template(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("{verdicts} verdicts for {gold} gold labels")]
    LengthMismatch { verdicts: usize, gold: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Ask the client about every sentence, in order. Each item is
/// `(sentence_id, text)`.
///
/// Transport failures that survive the retry policy become abstentions with
/// `transport_error` set. A missing replay entry aborts the run. Remote
/// requests run on up to `max_in_flight` threads.
pub fn classify_zero_shot<I: AsRef<str> + Sync, T: AsRef<str> + Sync>(
    client: &GenerativeClient,
    template: &PromptTemplate,
    sentences: &[(I, T)],
) -> Result<Vec<ParsedVerdict>, ZeroShotError> {
    template.validate()?;
    let one = |(id, text): &(I, T)| -> Result<ParsedVerdict, ZeroShotError> {
        let prompt = build_prompt(text.as_ref(), template);
        match client.complete(id.as_ref(), &prompt) {
            Ok(response) => Ok(parse_verdict(&response)),
            Err(ZeroShotError::Transport(msg)) => {
                warn!(sentence_id = id.as_ref(), "zero-shot request failed: {msg}");
                Ok(ParsedVerdict::transport_failure(msg))
            }
            Err(e) => Err(e),
        }
    };

    let workers = client.max_in_flight().min(sentences.len()).max(1);
    if workers == 1 {
        return sentences.iter().map(one).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<ParsedVerdict, ZeroShotError>>>> =
        Mutex::new((0..sentences.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = sentences.get(i) else { break };
                let r = one(item);
                slots.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every index is visited"))
        .collect()
}

/// Metrics with abstentions counted as errors: they lower the gold class's
/// recall and give no class a true positive.
pub fn evaluate_zero_shot(verdicts: &[ParsedVerdict], gold: &[ClarityLabel]) -> Result<MetricsReport, ZeroShotError> {
    if verdicts.len() != gold.len() {
        return Err(ZeroShotError::LengthMismatch {
            verdicts: verdicts.len(),
            gold: gold.len(),
        });
    }
    let pairs: Vec<(ClarityLabel, Option<ClarityLabel>)> =
        gold.iter().zip(verdicts).map(|(&g, v)| (g, v.label)).collect();
    Ok(compute_metrics_with_abstain(&pairs)?)
}

/// The ten-sentence gold set shipped with the crate.
pub fn bundled_fixture() -> Vec<GoldItem> {
    FIXTURE
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled fixture parses"))
        .collect()
}

/// Recorded answers for [`bundled_fixture`] under the default template.
pub fn bundled_transcript() -> Vec<TranscriptEntry> {
    TRANSCRIPT
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("bundled transcript parses"))
        .collect()
}

pub fn bundled_replay_client() -> GenerativeClient {
    GenerativeClient::Replay(ReplayClient::from_entries(bundled_transcript()))
}
