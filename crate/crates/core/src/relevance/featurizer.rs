use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::RelevanceError;
use crate::text::word_tokens;

/// Sparse feature vector: `(column, value)` sorted by column.
pub type SparseVec = Vec<(usize, f64)>;

/// TF-IDF featurizer with smoothed idf and unit-length output.
///
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`; a sentence's vector is its term
/// counts times idf, scaled to Euclidean norm 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "FeaturizerRepr", into = "FeaturizerRepr")]
pub struct TermFeaturizer {
    terms: Vec<String>,
    idf: Vec<f64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct FeaturizerRepr {
    terms: Vec<String>,
    idf: Vec<f64>,
    norm: String,
}

impl From<FeaturizerRepr> for TermFeaturizer {
    fn from(r: FeaturizerRepr) -> Self {
        let index = r.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            terms: r.terms,
            idf: r.idf,
            index,
        }
    }
}

impl From<TermFeaturizer> for FeaturizerRepr {
    fn from(f: TermFeaturizer) -> Self {
        Self {
            terms: f.terms,
            idf: f.idf,
            norm: "l2".to_string(),
        }
    }
}

impl TermFeaturizer {
    pub fn fit<S: AsRef<str>>(corpus: &[S]) -> Result<Self, RelevanceError> {
        if corpus.is_empty() {
            return Err(RelevanceError::EmptyCorpus);
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let unique: BTreeSet<String> = word_tokens(doc.as_ref()).into_iter().collect();
            for t in unique {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = corpus.len() as f64;
        let (terms, idf): (Vec<String>, Vec<f64>) = df
            .into_iter()
            .map(|(t, d)| {
                let idf = ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0;
                (t, idf)
            })
            .unzip();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { terms, idf, index })
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.column(term).map(|c| self.idf[c])
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Unknown tokens are dropped; a sentence with none known maps to the
    /// empty vector.
    pub fn transform(&self, text: &str) -> SparseVec {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in word_tokens(text) {
            if let Some(&c) = self.index.get(&t) {
                *counts.entry(c).or_default() += 1.0;
            }
        }
        let mut v: SparseVec = counts.into_iter().map(|(c, n)| (c, n * self.idf[c])).collect();
        let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, x) in &mut v {
                *x /= norm;
            }
        }
        v
    }
}
