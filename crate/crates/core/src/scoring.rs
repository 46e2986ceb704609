//! Language score, universe ranking and quintile ratings.
//!
//! A document's language score is the ratio of Specific to Ambiguous ESG
//! sentences, scaled by a factor `X_SF`:
//!
//! ```text
//! score = 0                      if X_S = 0
//!       = X_S * X_SF(X_S)        if X_S > 0 and X_A = 0   (denominator-one)
//!       = X_S / X_A * X_SF(X_S)  otherwise
//! ```
//!
//! Generic sentences are counted for reporting but never enter the score.
//! Ratings bucket the universe into quintiles by nearest rank, 5 being the
//! most specific language.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::label::ClarityLabel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreConfigError {
    #[error("scaling factor must be finite and > 0, got {0}")]
    NonPositiveFactor(f64),
    #[error("step scaling needs at least one bucket")]
    NoBuckets,
    #[error("step buckets must start at 0 and strictly increase")]
    BucketOrder,
    #[error("unsupported zero-ambiguous convention {0:?}")]
    Convention(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBucket {
    /// Lowest `X_S` this factor applies to.
    pub min_specific: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scaling {
    Constant {
        factor: f64,
    },
    /// Piecewise constant in `X_S`: the last bucket whose `min_specific <= X_S` wins.
    Step {
        buckets: Vec<StepBucket>,
    },
}

impl Default for Scaling {
    fn default() -> Self {
        Self::Constant { factor: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreConfig {
    #[serde(default)]
    pub scaling: Scaling,
    #[serde(default = "default_convention")]
    pub zero_ambiguous_convention: String,
}

fn default_convention() -> String {
    DENOMINATOR_ONE.to_string()
}

pub const DENOMINATOR_ONE: &str = "denominator-one";

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            scaling: Scaling::default(),
            zero_ambiguous_convention: default_convention(),
        }
    }
}

impl ScoreConfig {
    pub fn constant(factor: f64) -> Self {
        Self {
            scaling: Scaling::Constant { factor },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScoreConfigError> {
        if self.zero_ambiguous_convention != DENOMINATOR_ONE {
            return Err(ScoreConfigError::Convention(self.zero_ambiguous_convention.clone()));
        }
        let check = |f: f64| {
            if f.is_finite() && f > 0.0 {
                Ok(())
            } else {
                Err(ScoreConfigError::NonPositiveFactor(f))
            }
        };
        match &self.scaling {
            Scaling::Constant { factor } => check(*factor),
            Scaling::Step { buckets } => {
                let first = buckets.first().ok_or(ScoreConfigError::NoBuckets)?;
                if first.min_specific != 0 || buckets.windows(2).any(|w| w[1].min_specific <= w[0].min_specific) {
                    return Err(ScoreConfigError::BucketOrder);
                }
                buckets.iter().try_for_each(|b| check(b.factor))
            }
        }
    }

    /// `X_SF` for a document with `specific` Specific sentences.
    pub fn factor(&self, specific: usize) -> f64 {
        match &self.scaling {
            Scaling::Constant { factor } => *factor,
            Scaling::Step { buckets } => buckets
                .iter()
                .rev()
                .find(|b| b.min_specific <= specific)
                .map_or(1.0, |b| b.factor),
        }
    }

    /// Short content digest, stamped into every score.
    pub fn version(&self) -> String {
        let json = serde_json::to_vec(self).expect("score config serializes");
        crate::io::sha256_hex(&json)[..12].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarityCounts {
    pub doc_id: String,
    #[serde(rename = "X_S")]
    pub specific: usize,
    #[serde(rename = "X_A")]
    pub ambiguous: usize,
    #[serde(rename = "X_G")]
    pub generic: usize,
    /// Set when the document had no classified ESG sentences.
    #[serde(default)]
    pub empty: bool,
}

impl ClarityCounts {
    pub fn new(doc_id: impl Into<String>, specific: usize, ambiguous: usize, generic: usize) -> Self {
        Self {
            doc_id: doc_id.into(),
            specific,
            ambiguous,
            generic,
            empty: specific + ambiguous + generic == 0,
        }
    }

    pub fn total(&self) -> usize {
        self.specific + self.ambiguous + self.generic
    }
}

/// Clarity predictions for one document, in sentence order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentPredictions {
    pub doc_id: String,
    pub labels: Vec<(String, ClarityLabel)>,
}

/// Group `(sentence_id, label)` pairs by the document prefix of the sentence
/// id (`doc_id:index`). Every id in `documents` appears in the output even if
/// it has no predictions.
pub fn group_by_document<'a, I>(predictions: I, documents: &[String]) -> Vec<DocumentPredictions>
where
    I: IntoIterator<Item = (&'a str, ClarityLabel)>,
{
    let mut by_doc: BTreeMap<String, Vec<(String, ClarityLabel)>> =
        documents.iter().map(|d| (d.clone(), Vec::new())).collect();
    for (sid, label) in predictions {
        let doc = crate::ingest::doc_id_of(sid).to_string();
        by_doc.entry(doc).or_default().push((sid.to_string(), label));
    }
    by_doc
        .into_iter()
        .map(|(doc_id, labels)| DocumentPredictions { doc_id, labels })
        .collect()
}

pub fn count_labels(predictions: &[DocumentPredictions]) -> Vec<ClarityCounts> {
    predictions
        .iter()
        .map(|doc| {
            let mut n = [0usize; 3];
            for (_, l) in &doc.labels {
                n[*l as usize] += 1;
            }
            let counts = ClarityCounts::new(doc.doc_id.clone(), n[0], n[1], n[2]);
            if counts.empty {
                warn!(doc_id = %doc.doc_id, "document has no classified ESG sentences");
            }
            counts
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundScore {
    pub doc_id: String,
    pub ratio: f64,
    pub scaling_factor: f64,
    pub score: f64,
    pub config_version: String,
}

pub fn language_score(counts: &ClarityCounts, config: &ScoreConfig) -> FundScore {
    let (ratio, factor) = if counts.specific == 0 {
        (0.0, config.factor(0))
    } else {
        let denominator = counts.ambiguous.max(1);
        (
            counts.specific as f64 / denominator as f64,
            config.factor(counts.specific),
        )
    };
    FundScore {
        doc_id: counts.doc_id.clone(),
        ratio,
        scaling_factor: factor,
        score: ratio * factor,
        config_version: config.version(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedScore {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Descending by score; ties broken ascending by `doc_id`. Rank 1 is the
/// most specific language.
pub fn rank_universe(scores: &[FundScore]) -> Vec<RankedScore> {
    let mut order: Vec<&FundScore> = scores.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
    order
        .into_iter()
        .enumerate()
        .map(|(i, s)| RankedScore {
            doc_id: s.doc_id.clone(),
            score: s.score,
            rank: i + 1,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingEntry {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
    pub rating: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTable {
    /// Ordered by rank.
    pub entries: Vec<RatingEntry>,
    pub quantile_method: String,
    /// Set when the universe has fewer than five documents; every rating is 3.
    pub degenerate: bool,
}

impl RatingTable {
    pub fn get(&self, doc_id: &str) -> Option<&RatingEntry> {
        self.entries.iter().find(|e| e.doc_id == doc_id)
    }
}

pub const MIN_RATED_UNIVERSE: usize = 5;

/// Nearest-rank quintile ratings.
///
/// With documents sorted ascending by score, the document at 1-based
/// position `k` gets `1 + floor(5 (k - 1) / N)`. Every member of a tie group
/// takes the lowest rating in its group.
pub fn assign_ratings(scores: &[FundScore]) -> RatingTable {
    let ranked = rank_universe(scores);
    let n = ranked.len();
    let degenerate = n < MIN_RATED_UNIVERSE;
    let mut ratings = vec![3u8; n];
    if degenerate {
        if n > 0 {
            warn!(universe = n, "universe too small for quintiles; every rating set to 3");
        }
    } else {
        // `ranked` is descending, so ascending position k maps to index n - k.
        let mut k = 1;
        while k <= n {
            let score = ranked[n - k].score;
            let rating = (1 + 5 * (k - 1) / n) as u8;
            while k <= n && ranked[n - k].score == score {
                ratings[n - k] = rating;
                k += 1;
            }
        }
    }
    RatingTable {
        entries: ranked
            .into_iter()
            .zip(ratings)
            .map(|(r, rating)| RatingEntry {
                doc_id: r.doc_id,
                score: r.score,
                rank: r.rank,
                rating,
            })
            .collect(),
        quantile_method: "nearest-rank".to_string(),
        degenerate,
    }
}

/// One line of the ratings CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRow {
    pub doc_id: String,
    #[serde(rename = "X_S")]
    pub specific: usize,
    #[serde(rename = "X_A")]
    pub ambiguous: usize,
    #[serde(rename = "X_G")]
    pub generic: usize,
    pub ratio: f64,
    pub score: f64,
    pub rank: usize,
    pub rating: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringReport {
    pub config: ScoreConfig,
    pub config_version: String,
    pub degenerate: bool,
    pub rows: Vec<RatingRow>,
}

/// Score, rank and rate a universe in one pass.
pub fn score_universe(counts: &[ClarityCounts], config: &ScoreConfig) -> ScoringReport {
    let scores: Vec<FundScore> = counts.iter().map(|c| language_score(c, config)).collect();
    let table = assign_ratings(&scores);
    let by_doc: BTreeMap<&str, (&ClarityCounts, &FundScore)> = counts
        .iter()
        .zip(&scores)
        .map(|(c, s)| (c.doc_id.as_str(), (c, s)))
        .collect();
    let rows = table
        .entries
        .iter()
        .map(|e| {
            let (c, s) = by_doc[e.doc_id.as_str()];
            RatingRow {
                doc_id: e.doc_id.clone(),
                specific: c.specific,
                ambiguous: c.ambiguous,
                generic: c.generic,
                ratio: s.ratio,
                score: s.score,
                rank: e.rank,
                rating: e.rating,
            }
        })
        .collect();
    ScoringReport {
        config: config.clone(),
        config_version: config.version(),
        degenerate: table.degenerate,
        rows,
    }
}

impl ScoringReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("doc_id,X_S,X_A,X_G,ratio,score,rank,rating\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                csv_field(&r.doc_id),
                r.specific,
                r.ambiguous,
                r.generic,
                r.ratio,
                r.score,
                r.rank,
                r.rating
            );
        }
        out
    }

    pub fn rating_table(&self) -> RatingTable {
        RatingTable {
            entries: self
                .rows
                .iter()
                .map(|r| RatingEntry {
                    doc_id: r.doc_id.clone(),
                    score: r.score,
                    rank: r.rank,
                    rating: r.rating,
                })
                .collect(),
            quantile_method: "nearest-rank".to_string(),
            degenerate: self.degenerate,
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
