//! Glue between the stages: the per-sentence prediction artifact and the
//! assembly of document reports from predictions and scores.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{make_splits, AnnotationError, GoldDataset, SplitSet};
use crate::clarity::{
    evaluate_clarity, predict_batch, train_contrastive_classifier, train_prompt_tuned, ClarityError, ClarityModel,
    Encoder,
};
use crate::config::{ConfigError, PipelineConfig};
use crate::eval::{DocumentReport, MetricsError, MetricsReport, ReportSpan, SpanLabel};
use crate::ingest::SentenceRecord;
use crate::label::{ClarityLabel, ClassLabel, RelevanceLabel};
use crate::relevance::{predict_relevance, LinearRelevanceModel};
use crate::scoring::{count_labels, group_by_document, language_score, ClarityCounts, ScoreConfig, ScoringReport};

/// One sentence as it moves through relevance filtering and clarity
/// classification. Also the JSON Lines format read by `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePrediction {
    pub sentence_id: String,
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    /// `None` when no relevance filter ran; the sentence counts as ESG.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<RelevanceLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clarity: Option<ClarityLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<[f64; 3]>,
}

impl SentencePrediction {
    pub fn unclassified(s: &SentenceRecord) -> Self {
        Self {
            sentence_id: s.sentence_id.clone(),
            doc_id: s.doc_id.clone(),
            index: s.index,
            text: s.text.clone(),
            relevance: None,
            relevance_score: None,
            clarity: None,
            probs: None,
        }
    }

    pub fn is_esg(&self) -> bool {
        self.relevance != Some(RelevanceLabel::NonEsg)
    }
}

pub fn classify_relevance(model: &LinearRelevanceModel, sentences: &[SentenceRecord]) -> Vec<SentencePrediction> {
    sentences
        .iter()
        .map(|s| {
            let (label, score) = predict_relevance(model, &s.text);
            SentencePrediction {
                relevance: Some(label),
                relevance_score: Some(score),
                ..SentencePrediction::unclassified(s)
            }
        })
        .collect()
}

/// Clarity labels for every ESG sentence; non-ESG sentences pass through
/// untouched.
pub fn classify_clarity(model: &ClarityModel, mut rows: Vec<SentencePrediction>) -> Vec<SentencePrediction> {
    let esg: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].is_esg()).collect();
    let texts: Vec<&str> = esg.iter().map(|&i| rows[i].text.as_str()).collect();
    let preds = predict_batch(model, &texts);
    for (i, p) in esg.into_iter().zip(preds) {
        rows[i].clarity = Some(p.label);
        rows[i].probs = Some(p.probs);
    }
    rows
}

/// Documents in first-seen order.
fn documents(rows: &[SentencePrediction]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if out.last() != Some(&r.doc_id) && !out.contains(&r.doc_id) {
            out.push(r.doc_id.clone());
        }
    }
    out
}

/// Per-document clarity counts. Every document present in `rows` gets an
/// entry, even with no classified ESG sentence.
pub fn clarity_counts(rows: &[SentencePrediction]) -> Vec<ClarityCounts> {
    let labeled = rows
        .iter()
        .filter(|r| r.is_esg())
        .filter_map(|r| Some((r.sentence_id.as_str(), r.clarity?)));
    count_labels(&group_by_document(labeled, &documents(rows)))
}

/// One report per document, spans in sentence order, with rank and rating
/// taken from `scoring` when the document is in it.
pub fn document_reports(rows: &[SentencePrediction], scoring: &ScoringReport) -> Vec<DocumentReport> {
    let mut by_doc: BTreeMap<&str, Vec<&SentencePrediction>> = BTreeMap::new();
    for r in rows {
        by_doc.entry(r.doc_id.as_str()).or_default().push(r);
    }
    by_doc
        .into_iter()
        .map(|(doc_id, mut sentences)| {
            sentences.sort_by_key(|s| s.index);
            let spans = sentences
                .iter()
                .map(|s| ReportSpan {
                    text: s.text.clone(),
                    label: match (s.is_esg(), s.clarity) {
                        (true, Some(l)) => SpanLabel::from(l),
                        _ => SpanLabel::NonEsg,
                    },
                })
                .collect();
            let mut tally = [0usize; 3];
            for l in sentences.iter().filter(|s| s.is_esg()).filter_map(|s| s.clarity) {
                tally[l.index()] += 1;
            }
            let c = ClarityCounts::new(doc_id, tally[0], tally[1], tally[2]);
            let row = scoring.rows.iter().find(|r| r.doc_id == doc_id);
            DocumentReport {
                doc_id: doc_id.to_string(),
                spans,
                score: language_score(&c, &scoring.config),
                rank: row.map(|r| r.rank),
                rating: row.map(|r| r.rating),
            }
        })
        .collect()
}

/// Score a prediction set and build every report in one go.
pub fn score_and_report(rows: &[SentencePrediction], config: &ScoreConfig) -> (ScoringReport, Vec<DocumentReport>) {
    let scoring = crate::scoring::score_universe(&clarity_counts(rows), config);
    let reports = document_reports(rows, &scoring);
    (scoring, reports)
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Clarity(#[from] ClarityError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClarityMethod {
    Contrastive,
    Prompt,
}

/// A trained clarity model with the split it was trained on and its
/// held-out test metrics.
#[derive(Debug, Clone)]
pub struct ClarityRun {
    pub model: ClarityModel,
    pub splits: SplitSet,
    pub test: MetricsReport,
    pub seconds: f64,
}

/// Split `gold` per the config, train on the train part and evaluate on the
/// test part. `encoder` overrides the configured preset, e.g. a checkpoint.
pub fn train_clarity_on_gold(
    gold: &GoldDataset,
    method: ClarityMethod,
    config: &PipelineConfig,
    encoder: Option<Encoder>,
) -> Result<ClarityRun, PipelineError> {
    let started = Instant::now();
    let splits = make_splits(gold, config.annotation.splits, config.annotation.split_seed)?;
    let train = gold.select(&splits.train);
    let test = gold.select(&splits.test);
    let c = &config.clarity;
    let model = match method {
        ClarityMethod::Contrastive => {
            let encoder = match encoder {
                Some(e) => e,
                None => Encoder::new(c.encoder_config()?, c.encoder_seed)?,
            };
            train_contrastive_classifier(&encoder, &train, c.r_per_item, &c.contrastive)?.0
        }
        ClarityMethod::Prompt => {
            let encoder = match encoder {
                Some(e) => e,
                None => Encoder::new(c.prompt_encoder_config()?, c.encoder_seed)?,
            };
            train_prompt_tuned(&encoder, &train, &c.prompt)?
        }
    };
    let test = evaluate_clarity(&model, &test)?;
    Ok(ClarityRun {
        model,
        splits,
        test,
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(doc: &str, i: usize, rel: Option<RelevanceLabel>, cl: Option<ClarityLabel>) -> SentencePrediction {
        SentencePrediction {
            relevance: rel,
            clarity: cl,
            ..SentencePrediction::unclassified(&SentenceRecord::new(doc, i, format!("{doc} sentence {i}.")))
        }
    }

    #[test]
    fn counts_skip_non_esg_and_keep_empty_documents() {
        use ClarityLabel::*;
        let rows = vec![
            row("a", 0, Some(RelevanceLabel::Esg), Some(Specific)),
            row("a", 1, Some(RelevanceLabel::NonEsg), Some(Specific)),
            row("a", 2, None, Some(Ambiguous)),
            row("b", 0, Some(RelevanceLabel::NonEsg), None),
        ];
        let counts = clarity_counts(&rows);
        assert_eq!(counts.len(), 2);
        assert_eq!((counts[0].specific, counts[0].ambiguous, counts[0].generic), (1, 1, 0));
        assert!(counts[1].empty);
    }

    #[test]
    fn reports_follow_sentence_order() {
        use ClarityLabel::*;
        let rows = vec![
            row("a", 2, None, Some(Generic)),
            row("a", 0, None, Some(Specific)),
            row("a", 1, Some(RelevanceLabel::NonEsg), None),
        ];
        let (scoring, reports) = score_and_report(&rows, &ScoreConfig::default());
        assert_eq!(scoring.rows.len(), 1);
        let labels: Vec<SpanLabel> = reports[0].spans.iter().map(|s| s.label).collect();
        assert_eq!(labels, [SpanLabel::Specific, SpanLabel::NonEsg, SpanLabel::Generic]);
        assert_eq!(reports[0].score.score, 1.0);
        assert_eq!(reports[0].rating, Some(3));
    }

    #[test]
    fn gold_training_uses_disjoint_splits() {
        use crate::annotation::GoldItem;
        let items = crate::synth::synthetic_clarity_corpus(20, 4)
            .into_iter()
            .enumerate()
            .map(|(i, (text, label))| GoldItem {
                id: format!("g{i}"),
                text,
                label,
                provenance: Vec::new(),
            })
            .collect();
        let gold = GoldDataset::new(items);
        let config = PipelineConfig::default();
        let run = train_clarity_on_gold(&gold, ClarityMethod::Contrastive, &config, None).unwrap();
        assert_eq!(run.splits.test.len(), 6);
        assert_eq!(run.test.n, 6);
        assert!(run.splits.train.iter().all(|id| !run.splits.test.contains(id)));
        assert!(run.test.macro_f1 >= 0.8, "{}", run.test.macro_f1);
    }

    #[test]
    fn sentence_record_lines_parse_as_predictions() {
        let s = SentenceRecord::new("d", 0, "Text.");
        let json = serde_json::to_string(&s).unwrap();
        let p: SentencePrediction = serde_json::from_str(&json).unwrap();
        assert!(p.is_esg());
        assert_eq!(p.clarity, None);
    }
}
