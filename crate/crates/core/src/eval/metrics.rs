use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::ClassLabel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cannot compute metrics over an empty evaluation set")]
    EmptyEvaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold items of this class.
    pub support: usize,
}

/// Accuracy, macro precision/recall/F1 and the confusion matrix.
///
/// `confusion[g][p]` counts items with gold class `g` predicted as `p`.
/// Abstentions are kept out of the matrix and tallied per gold class in
/// `abstained`, so `sum(confusion) + sum(abstained) == n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub labels: Vec<String>,
    pub n: usize,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<usize>>,
    pub abstained: Vec<usize>,
}

impl MetricsReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }

    /// Build a report from a gold-by-predicted confusion matrix plus
    /// per-gold-class abstention counts.
    pub fn from_confusion(
        labels: Vec<String>,
        confusion: Vec<Vec<usize>>,
        abstained: Vec<usize>,
    ) -> Result<Self, MetricsError> {
        let k = labels.len();
        assert_eq!(confusion.len(), k, "confusion rows must match label count");
        assert_eq!(abstained.len(), k, "abstention counts must match label count");
        let n: usize = confusion.iter().flatten().sum::<usize>() + abstained.iter().sum::<usize>();
        if n == 0 {
            return Err(MetricsError::EmptyEvaluation);
        }
        let correct: usize = (0..k).map(|i| confusion[i][i]).sum();

        let mut per_class = Vec::with_capacity(k);
        for (c, label) in labels.iter().enumerate() {
            let tp = confusion[c][c];
            let predicted: usize = (0..k).map(|g| confusion[g][c]).sum();
            let support: usize = confusion[c].iter().sum::<usize>() + abstained[c];
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            per_class.push(ClassMetrics {
                label: label.clone(),
                precision,
                recall,
                f1,
                support,
            });
        }
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
        Ok(Self {
            accuracy: correct as f64 / n as f64,
            macro_precision: mean(|c| c.precision),
            macro_recall: mean(|c| c.recall),
            macro_f1: mean(|c| c.f1),
            labels,
            n,
            per_class,
            confusion,
            abstained,
        })
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics over `(gold, predicted)` pairs for the full class set of `L`.
pub fn compute_metrics<L: ClassLabel>(pairs: &[(L, L)]) -> Result<MetricsReport, MetricsError> {
    let lifted: Vec<(L, Option<L>)> = pairs.iter().map(|&(g, p)| (g, Some(p))).collect();
    compute_metrics_with_abstain(&lifted)
}

/// Like [`compute_metrics`], where `None` is an abstention: it counts against
/// the gold class's recall and contributes no true or false positives.
pub fn compute_metrics_with_abstain<L: ClassLabel>(pairs: &[(L, Option<L>)]) -> Result<MetricsReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyEvaluation);
    }
    let k = L::ALL.len();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut abstained = vec![0usize; k];
    for &(gold, pred) in pairs {
        match pred {
            Some(p) => confusion[gold.index()][p.index()] += 1,
            None => abstained[gold.index()] += 1,
        }
    }
    let labels = L::ALL.iter().map(|l| l.name().to_string()).collect();
    MetricsReport::from_confusion(labels, confusion, abstained)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::ClarityLabel::{self, *};
    use crate::label::RelevanceLabel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_predictions() {
        let pairs = [(Specific, Specific), (Ambiguous, Ambiguous), (Generic, Generic)];
        let r = compute_metrics(&pairs).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn six_pair_worked_fixture() {
        let gold = [Specific, Specific, Ambiguous, Ambiguous, Generic, Generic];
        let pred = [Specific, Ambiguous, Ambiguous, Ambiguous, Generic, Specific];
        let pairs: Vec<_> = gold.into_iter().zip(pred).collect();
        let r = compute_metrics(&pairs).unwrap();
        assert_abs_diff_eq!(r.accuracy, 4.0 / 6.0, epsilon = 1e-12);
        let p: Vec<_> = r.per_class.iter().map(|c| c.precision).collect();
        let rc: Vec<_> = r.per_class.iter().map(|c| c.recall).collect();
        let f: Vec<_> = r.per_class.iter().map(|c| c.f1).collect();
        for (a, b) in p.iter().zip([0.5, 2.0 / 3.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        for (a, b) in rc.iter().zip([0.5, 1.0, 0.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        for (a, b) in f.iter().zip([0.5, 0.8, 2.0 / 3.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(r.macro_f1, 0.6556, epsilon = 1e-4);
        assert_eq!(r.confusion, vec![vec![1, 1, 0], vec![0, 2, 0], vec![1, 0, 1]]);
    }

    #[test]
    fn never_predicted_class_has_zero_precision() {
        let pairs = [(Generic, Specific), (Specific, Specific), (Ambiguous, Ambiguous)];
        let r = compute_metrics(&pairs).unwrap();
        let g = r.class("Generic").unwrap();
        assert_eq!(g.precision, 0.0);
        assert_eq!(g.recall, 0.0);
        assert_eq!(g.f1, 0.0);
    }

    #[test]
    fn class_absent_from_gold_contributes_zero() {
        let pairs = [(Specific, Specific), (Specific, Specific)];
        let r = compute_metrics(&pairs).unwrap();
        assert_abs_diff_eq!(r.macro_f1, 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(r.class("Generic").unwrap().support, 0);
    }

    #[test]
    fn empty_is_an_error() {
        let pairs: [(ClarityLabel, ClarityLabel); 0] = [];
        assert_eq!(compute_metrics(&pairs), Err(MetricsError::EmptyEvaluation));
    }

    #[test]
    fn abstentions_hurt_recall_only() {
        let pairs = [
            (Specific, Some(Specific)),
            (Specific, None),
            (Generic, Some(Generic)),
            (Ambiguous, Some(Ambiguous)),
        ];
        let r = compute_metrics_with_abstain(&pairs).unwrap();
        let s = r.class("Specific").unwrap();
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 0.5);
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.abstained, vec![1, 0, 0]);
        let total: usize = r.confusion.iter().flatten().sum::<usize>() + r.abstained.iter().sum::<usize>();
        assert_eq!(total, r.n);
    }

    #[test]
    fn binary_labels() {
        use RelevanceLabel::*;
        let pairs = [(Esg, Esg), (Esg, NonEsg), (NonEsg, NonEsg), (NonEsg, NonEsg)];
        let r = compute_metrics(&pairs).unwrap();
        let esg = r.class("ESG").unwrap();
        assert_eq!(esg.precision, 1.0);
        assert_eq!(esg.recall, 0.5);
    }
}
