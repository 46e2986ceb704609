//! Evaluation: metrics shared by every classifier, error listings, method
//! comparison tables and the color-coded document report.

mod comparison;
mod metrics;
mod report;

pub use comparison::{comparison_report, ComparisonRow, ComparisonTable, DeltaRow, MethodKind, NamedReport};
pub use metrics::{compute_metrics, compute_metrics_with_abstain, ClassMetrics, MetricsError, MetricsReport};
pub use report::{render_document_report, strip_markup, DocumentReport, ReportFormat, ReportSpan, SpanLabel};

use serde::{Deserialize, Serialize};

use crate::label::ClarityLabel;

/// A misclassified sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCase {
    pub sentence: String,
    pub gold: ClarityLabel,
    pub predicted: ClarityLabel,
}

/// All and only the misclassified items, in gold-set order.
pub fn error_table<S: AsRef<str>>(items: &[(S, ClarityLabel)], predicted: &[ClarityLabel]) -> Vec<ErrorCase> {
    assert_eq!(items.len(), predicted.len(), "one prediction per gold item");
    items
        .iter()
        .zip(predicted)
        .filter(|((_, gold), pred)| gold != *pred)
        .map(|((text, gold), pred)| ErrorCase {
            sentence: text.as_ref().to_string(),
            gold: *gold,
            predicted: *pred,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClarityLabel::*;

    #[test]
    fn error_table_lists_only_mismatches_in_order() {
        let gold = [
            ("s0", Specific),
            ("s1", Specific),
            ("s2", Ambiguous),
            ("s3", Ambiguous),
            ("s4", Generic),
            ("s5", Generic),
        ];
        let pred = [Specific, Ambiguous, Ambiguous, Ambiguous, Generic, Specific];
        let errors = error_table(&gold, &pred);
        let expected: Vec<usize> = (0..6).filter(|&i| gold[i].1 != pred[i]).collect();
        assert_eq!(errors.len(), expected.len());
        assert_eq!(errors.len(), 2);
        for (e, i) in errors.iter().zip(expected) {
            assert_eq!(e.sentence, gold[i].0);
            assert_ne!(e.gold, e.predicted);
        }
        assert!(error_table(&gold, &gold.map(|g| g.1)).is_empty());
    }
}
