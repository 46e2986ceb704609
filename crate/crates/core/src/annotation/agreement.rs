use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnnotationError, AnnotationRecord, ADJUDICATOR};
use crate::label::{AnnotationLabel, ClassLabel};

/// Cohen's kappa over paired labels; `None` for no pairs.
///
/// `p_e` uses each rater's own marginal distribution. When `p_e = 1` both
/// raters used one identical label throughout and kappa is defined as 1.
pub fn cohen_kappa<L: ClassLabel>(pairs: &[(L, L)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let k = L::ALL.len();
    let n = pairs.len() as f64;
    let mut ma = vec![0.0; k];
    let mut mb = vec![0.0; k];
    let mut agree = 0.0;
    for (a, b) in pairs {
        ma[a.index()] += 1.0;
        mb[b.index()] += 1.0;
        if a == b {
            agree += 1.0;
        }
    }
    let po = agree / n;
    let pe: f64 = ma.iter().zip(&mb).map(|(x, y)| (x / n) * (y / n)).sum();
    if pe >= 1.0 {
        return Some(1.0);
    }
    Some((po - pe) / (1.0 - pe))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub annotator_a: String,
    pub annotator_b: String,
    pub shared: usize,
    pub observed: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Fraction of multiply-annotated sentences on which every annotator agrees.
    pub raw_agreement: f64,
    pub multiply_annotated: usize,
    pub pairs: Vec<PairAgreement>,
}

/// Each annotator's latest label per sentence (adjudicator excluded).
pub(crate) fn latest_by_annotator(records: &[AnnotationRecord]) -> BTreeMap<String, BTreeMap<String, AnnotationLabel>> {
    let mut best: BTreeMap<(String, String), (u32, AnnotationLabel)> = BTreeMap::new();
    for r in records {
        let key = (r.sentence_id.clone(), r.annotator_id.clone());
        match best.get(&key) {
            Some((round, _)) if *round > r.round => {}
            _ => {
                best.insert(key, (r.round, r.label));
            }
        }
    }
    let mut out: BTreeMap<String, BTreeMap<String, AnnotationLabel>> = BTreeMap::new();
    for ((sid, ann), (_, label)) in best {
        out.entry(sid).or_default().insert(ann, label);
    }
    out
}

/// Pairwise Cohen's kappa for every annotator pair with shared sentences,
/// plus raw all-agree agreement. Uses each annotator's latest label.
pub fn compute_agreement(records: &[AnnotationRecord]) -> Result<AgreementReport, AnnotationError> {
    let human: Vec<AnnotationRecord> = records
        .iter()
        .filter(|r| r.annotator_id != ADJUDICATOR)
        .cloned()
        .collect();
    let by_sentence = latest_by_annotator(&human);
    let annotators: BTreeSet<&String> = by_sentence.values().flat_map(|m| m.keys()).collect();
    let annotators: Vec<&String> = annotators.into_iter().collect();

    let mut pairs = Vec::new();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            let shared: Vec<(AnnotationLabel, AnnotationLabel)> = by_sentence
                .values()
                .filter_map(|m| Some((*m.get(*a)?, *m.get(*b)?)))
                .collect();
            if let Some(kappa) = cohen_kappa(&shared) {
                let observed = shared.iter().filter(|(x, y)| x == y).count() as f64 / shared.len() as f64;
                pairs.push(PairAgreement {
                    annotator_a: a.to_string(),
                    annotator_b: b.to_string(),
                    shared: shared.len(),
                    observed,
                    kappa,
                });
            }
        }
    }
    if pairs.is_empty() {
        return Err(AnnotationError::InsufficientOverlap);
    }
    let multi: Vec<&BTreeMap<String, AnnotationLabel>> = by_sentence.values().filter(|m| m.len() >= 2).collect();
    let all_agree = multi
        .iter()
        .filter(|m| {
            let first = m.values().next().expect("non-empty");
            m.values().all(|l| l == first)
        })
        .count();
    Ok(AgreementReport {
        raw_agreement: all_agree as f64 / multi.len() as f64,
        multiply_annotated: multi.len(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::ClarityLabel::{self, *};
    use proptest::prelude::*;

    fn rec(s: &str, a: &str, l: AnnotationLabel) -> AnnotationRecord {
        AnnotationRecord::new(s, a, l, 0)
    }

    #[test]
    fn worked_fixture() {
        let a = [Specific, Specific, Ambiguous, Generic];
        let b = [Specific, Ambiguous, Ambiguous, Generic];
        let pairs: Vec<(ClarityLabel, ClarityLabel)> = a.into_iter().zip(b).collect();
        // p_o = 0.75, p_e = 0.3125
        let k = cohen_kappa(&pairs).unwrap();
        assert!((k - (0.75 - 0.3125) / (1.0 - 0.3125)).abs() < 1e-12);
        assert!((k - 0.6364).abs() < 1e-4);
    }

    #[test]
    fn perfect_agreement_is_one() {
        let labels = [
            Specific, Ambiguous, Generic, Specific, Generic, Generic, Ambiguous, Specific, Specific, Generic,
        ];
        let pairs: Vec<_> = labels.iter().map(|l| (*l, *l)).collect();
        assert_eq!(cohen_kappa(&pairs), Some(1.0));
        // a single shared label: p_e = 1
        assert_eq!(cohen_kappa(&[(Generic, Generic), (Generic, Generic)]), Some(1.0));
    }

    #[test]
    fn store_level_report() {
        use AnnotationLabel as L;
        let records = vec![
            rec("d:0", "ann1", L::Specific),
            rec("d:0", "ann2", L::Specific),
            rec("d:1", "ann1", L::Specific),
            rec("d:1", "ann2", L::Ambiguous),
            rec("d:2", "ann1", L::Ambiguous),
            rec("d:2", "ann2", L::Ambiguous),
            rec("d:3", "ann1", L::Generic),
            rec("d:3", "ann2", L::Generic),
            rec("d:4", "ann1", L::Risk),
        ];
        let report = compute_agreement(&records).unwrap();
        assert_eq!(report.multiply_annotated, 4);
        assert_eq!(report.raw_agreement, 0.75);
        assert_eq!(report.pairs.len(), 1);
        assert!((report.pairs[0].kappa - 0.6364).abs() < 1e-4);
    }

    #[test]
    fn one_annotator_is_insufficient() {
        let records = vec![rec("d:0", "solo", AnnotationLabel::Specific)];
        assert!(matches!(
            compute_agreement(&records),
            Err(AnnotationError::InsufficientOverlap)
        ));
    }

    fn label() -> impl Strategy<Value = ClarityLabel> {
        prop::sample::select(vec![Specific, Ambiguous, Generic])
    }

    proptest! {
        #[test]
        fn symmetric_and_relabel_invariant(pairs in prop::collection::vec((label(), label()), 1..40), perm in Just([2usize, 0, 1])) {
            let k = cohen_kappa(&pairs).unwrap();
            let swapped: Vec<_> = pairs.iter().map(|(a, b)| (*b, *a)).collect();
            prop_assert!((k - cohen_kappa(&swapped).unwrap()).abs() < 1e-12);
            let relabel = |l: ClarityLabel| <ClarityLabel as ClassLabel>::ALL[perm[l.index()]];
            let renamed: Vec<_> = pairs.iter().map(|(a, b)| (relabel(*a), relabel(*b))).collect();
            prop_assert!((k - cohen_kappa(&renamed).unwrap()).abs() < 1e-12);
            prop_assert!(k <= 1.0 + 1e-12);
        }
    }
}
