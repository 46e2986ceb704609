//! # esg-clarity
//!
//! Measure how specifically a sustainable fund describes its ESG investment
//! strategy.
//!
//! The pipeline has five stages, each a module of this crate:
//!
//! 1. [`ingest`]: read a prospectus, locate the *Principal Investment Strategy*
//!    section and split it into [`ingest::SentenceRecord`]s.
//! 2. [`relevance`]: separate ESG from non-ESG sentences. A keyword lexicon
//!    weak-labels training data, a TF-IDF logistic regression does the filtering.
//! 3. [`annotation`]: the model-assisted annotation loop, inter-annotator
//!    agreement, gold-set export and stratified splitting.
//! 4. [`clarity`]: few-shot classifiers for the three clarity classes
//!    (Specific, Ambiguous, Generic). Two training strategies are available:
//!    contrastive pair fine-tuning of a sentence encoder followed by a linear
//!    head, and soft-prompt tuning on a frozen encoder.
//! 5. [`scoring`]: the per-document language score `(X_S / X_A) * X_SF`,
//!    universe ranking and quintile ratings.
//!
//! [`eval`] holds the metrics shared by every classifier, [`zeroshot`] the
//! prompted-LLM baseline, and [`service`] the local HTTP API that drives the
//! annotation workbench.
//!
//! ```no_run
//! use esg_clarity::ingest::{extract_strategy_section, load_document, segment_sentences, HeadingPatterns};
//! use esg_clarity::ingest::Segmenter;
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let doc = load_document("prospectus.txt")?;
//! let section = extract_strategy_section(&doc, &HeadingPatterns::default())?;
//! let sentences = segment_sentences(&section, &Segmenter::default());
//! println!("{} strategy sentences", sentences.len());
//! # Ok(())
//! # }
//! ```

pub mod annotation;
pub mod clarity;
pub mod config;
pub mod eval;
pub mod ingest;
pub mod io;
pub mod label;
pub mod optim;
pub mod pipeline;
pub mod relevance;
pub mod scoring;
pub mod service;
pub mod synth;
pub mod text;
pub mod zeroshot;

pub use label::{AnnotationLabel, ClarityLabel, ClassLabel, RelevanceLabel};
