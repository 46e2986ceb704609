use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agreement::latest_by_annotator;
use super::{AnnotationError, AnnotationRecord, ADJUDICATOR};
use crate::ingest::SentenceRecord;
use crate::io::{self, sha256_hex, IoError};
use crate::label::{AnnotationLabel, ClarityLabel, ClassLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub id: String,
    pub text: String,
    pub label: ClarityLabel,
    /// Ids of the records (or import rows) backing the label.
    #[serde(default)]
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldDataset {
    /// Content hash prefix of the items.
    pub version: String,
    pub items: Vec<GoldItem>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    text: String,
    label: ClarityLabel,
}

impl GoldDataset {
    pub fn new(items: Vec<GoldItem>) -> Self {
        let bytes = serde_json::to_vec(&items).expect("gold items serialize");
        Self {
            version: sha256_hex(&bytes)[..12].to_string(),
            items,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn label_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for it in &self.items {
            c[it.label.index()] += 1;
        }
        c
    }

    /// `(text, label)` pairs for the given ids, in the order given.
    pub fn select(&self, ids: &[String]) -> Vec<(String, ClarityLabel)> {
        let by_id: BTreeMap<&str, &GoldItem> = self.items.iter().map(|i| (i.id.as_str(), i)).collect();
        ids.iter()
            .filter_map(|id| by_id.get(id.as_str()))
            .map(|i| (i.text.clone(), i.label))
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), AnnotationError> {
        Ok(io::write_jsonl(path, &self.items)?)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, AnnotationError> {
        Ok(Self::new(io::read_jsonl(path)?))
    }

    /// `text,label` CSV.
    pub fn write_csv(&self, path: &Path) -> Result<(), AnnotationError> {
        let mut w = csv::Writer::from_path(path)?;
        for it in &self.items {
            w.serialize(CsvRow {
                text: it.text.clone(),
                label: it.label,
            })?;
        }
        w.flush().map_err(|source| IoError::Write {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportReport {
    pub candidates: usize,
    pub included: usize,
    pub excluded_single_annotator: usize,
    pub excluded_disagreement: usize,
    pub excluded_risk: usize,
    pub excluded_na: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldExport {
    pub dataset: GoldDataset,
    pub report: ExportReport,
}

/// Keep sentences where at least two annotators agree on a clarity class.
///
/// Each annotator's latest round counts. A disagreement is settled when an
/// [`ADJUDICATOR`] record matches one of the annotators; otherwise the
/// sentence is excluded. Agreed Risk and NA labels are excluded and counted.
pub fn export_gold(records: &[AnnotationRecord], corpus: &[SentenceRecord]) -> GoldExport {
    let text: BTreeMap<&str, &str> = corpus
        .iter()
        .map(|s| (s.sentence_id.as_str(), s.text.as_str()))
        .collect();
    let latest = latest_by_annotator(records);
    let mut report = ExportReport::default();
    let mut items = Vec::new();
    for (sid, by_ann) in &latest {
        let Some(sentence) = text.get(sid.as_str()) else {
            continue;
        };
        report.candidates += 1;
        let adjudicated = by_ann.get(ADJUDICATOR).copied();
        let humans: Vec<(&String, AnnotationLabel)> = by_ann
            .iter()
            .filter(|(a, _)| a.as_str() != ADJUDICATOR)
            .map(|(a, l)| (a, *l))
            .collect();
        if humans.len() < 2 {
            report.excluded_single_annotator += 1;
            continue;
        }
        let distinct: BTreeSet<AnnotationLabel> = humans.iter().map(|(_, l)| *l).collect();
        let agreed = if distinct.len() == 1 {
            Some(humans[0].1)
        } else {
            adjudicated.filter(|l| distinct.contains(l))
        };
        let Some(label) = agreed else {
            report.excluded_disagreement += 1;
            continue;
        };
        match label.clarity() {
            Some(c) => {
                let provenance = records
                    .iter()
                    .filter(|r| &r.sentence_id == sid && r.label == label)
                    .filter(|r| by_ann.get(&r.annotator_id) == Some(&r.label))
                    .map(AnnotationRecord::record_id)
                    .collect();
                items.push(GoldItem {
                    id: sid.clone(),
                    text: sentence.to_string(),
                    label: c,
                    provenance,
                });
                report.included += 1;
            }
            None if label == AnnotationLabel::Risk => report.excluded_risk += 1,
            None => report.excluded_na += 1,
        }
    }
    GoldExport {
        dataset: GoldDataset::new(items),
        report,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    fn validate(&self) -> Result<(), AnnotationError> {
        let f = [self.train, self.validation, self.test];
        if f.iter().any(|x| x.is_nan() || *x <= 0.0) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(AnnotationError::InvalidFractions(f));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSet {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
    pub fractions: SplitFractions,
}

/// `floor(f * n)` guarded against representation error, so 0.1 * 110 is 11.
fn floor_count(f: f64, n: usize) -> usize {
    (f * n as f64 + 1e-9).floor() as usize
}

/// Per-label stratified split: within each label, `floor(f * n_label)`
/// items go to validation and to test, the rest to train.
pub fn make_splits(gold: &GoldDataset, fractions: SplitFractions, seed: u64) -> Result<SplitSet, AnnotationError> {
    fractions.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SplitSet {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        fractions,
    };
    for label in ClarityLabel::ALL {
        let mut ids: Vec<String> = gold
            .items
            .iter()
            .filter(|i| i.label == *label)
            .map(|i| i.id.clone())
            .collect();
        if ids.is_empty() {
            continue;
        }
        if ids.len() < 3 {
            return Err(AnnotationError::LabelTooSmall {
                label: *label,
                n: ids.len(),
            });
        }
        ids.shuffle(&mut rng);
        let n_val = floor_count(fractions.validation, ids.len());
        let n_test = floor_count(fractions.test, ids.len());
        out.validation.extend(ids.drain(..n_val));
        out.test.extend(ids.drain(..n_test));
        out.train.extend(ids);
    }
    Ok(out)
}

/// Column mapping for external gold datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportMapping {
    pub text_column: String,
    pub label_column: String,
    /// Optional id column; rows are numbered otherwise.
    pub id_column: Option<String>,
    /// Raw label value to annotation label, checked before name matching
    /// (for datasets that store class indices).
    pub label_values: BTreeMap<String, AnnotationLabel>,
}

impl Default for ImportMapping {
    fn default() -> Self {
        Self {
            text_column: "Text".into(),
            label_column: "Label".into(),
            id_column: None,
            label_values: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub dataset: GoldDataset,
    pub rows: usize,
    pub skipped_risk: usize,
    pub skipped_na: usize,
    /// `(row number, reason)` for rows that could not be read.
    pub invalid: Vec<(usize, String)>,
}

fn json_scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Load a labeled CSV or JSON Lines file (chosen by extension) through
/// `mapping`. Risk and NA rows are dropped and counted.
pub fn import_dataset(path: &Path, mapping: &ImportMapping) -> Result<ImportReport, AnnotationError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let mut rows: Vec<BTreeMap<String, String>> = Vec::new();
    match ext.as_str() {
        "csv" | "tsv" => {
            let mut r = csv::ReaderBuilder::new()
                .delimiter(if ext == "tsv" { b'\t' } else { b',' })
                .from_path(path)?;
            let headers = r.headers()?.clone();
            for rec in r.records() {
                let rec = rec?;
                rows.push(
                    headers
                        .iter()
                        .zip(rec.iter())
                        .map(|(h, v)| (h.to_string(), v.to_string()))
                        .collect(),
                );
            }
        }
        "jsonl" | "json" => {
            let file = File::open(path).map_err(|source| IoError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|source| IoError::Read {
                    path: path.to_path_buf(),
                    source,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let obj: serde_json::Map<String, serde_json::Value> =
                    serde_json::from_str(&line).map_err(|source| IoError::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        source,
                    })?;
                rows.push(
                    obj.iter()
                        .filter_map(|(k, v)| Some((k.clone(), json_scalar(v)?)))
                        .collect(),
                );
            }
        }
        other => return Err(AnnotationError::Import(format!("unsupported file type {other:?}"))),
    }
    if let Some(first) = rows.first() {
        for col in [&mapping.text_column, &mapping.label_column] {
            if !first.contains_key(col) {
                return Err(AnnotationError::Import(format!(
                    "column {col:?} not found; available: {:?}",
                    first.keys().collect::<Vec<_>>()
                )));
            }
        }
    }

    let source = path
        .file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let mut report = ImportReport {
        dataset: GoldDataset::new(Vec::new()),
        rows: rows.len(),
        skipped_risk: 0,
        skipped_na: 0,
        invalid: Vec::new(),
    };
    let mut items = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (i, row) in rows.iter().enumerate() {
        let row_no = i + 1;
        let text = row.get(&mapping.text_column).map(|t| t.trim()).unwrap_or("");
        if text.is_empty() {
            report.invalid.push((row_no, "empty text".into()));
            continue;
        }
        let raw = row.get(&mapping.label_column).map(|s| s.trim()).unwrap_or("");
        let label = match mapping.label_values.get(raw) {
            Some(l) => *l,
            None => match raw.parse::<AnnotationLabel>() {
                Ok(l) => l,
                Err(e) => {
                    report.invalid.push((row_no, e.to_string()));
                    continue;
                }
            },
        };
        let id = match &mapping.id_column {
            Some(col) => row.get(col).cloned().unwrap_or_else(|| format!("row-{row_no}")),
            None => format!("row-{row_no}"),
        };
        if !seen_ids.insert(id.clone()) {
            report.invalid.push((row_no, format!("duplicate id {id}")));
            continue;
        }
        match label.clarity() {
            Some(c) => items.push(GoldItem {
                id,
                text: text.to_string(),
                label: c,
                provenance: vec![format!("import:{source}:{row_no}")],
            }),
            None if label == AnnotationLabel::Risk => report.skipped_risk += 1,
            None => report.skipped_na += 1,
        }
    }
    report.dataset = GoldDataset::new(items);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;
    use AnnotationLabel as L;

    fn corpus(n: usize) -> Vec<SentenceRecord> {
        (0..n)
            .map(|i| SentenceRecord::new("d", i, format!("sentence {i}")))
            .collect()
    }

    fn rec(s: usize, a: &str, l: L, round: u32) -> AnnotationRecord {
        AnnotationRecord::new(&format!("d:{s}"), a, l, round)
    }

    #[test]
    fn export_rules() {
        let records = vec![
            rec(0, "a", L::Specific, 0),
            rec(0, "b", L::Specific, 0),
            rec(1, "a", L::Specific, 0),
            rec(1, "b", L::Ambiguous, 0),
            rec(2, "a", L::Risk, 0),
            rec(2, "b", L::Risk, 0),
            rec(3, "a", L::Na, 0),
            rec(3, "b", L::Na, 0),
            rec(4, "a", L::Generic, 0),
            // correction in a later round wins
            rec(5, "a", L::Generic, 0),
            rec(5, "b", L::Ambiguous, 0),
            rec(5, "b", L::Generic, 1),
            // adjudicated disagreement
            rec(6, "a", L::Ambiguous, 0),
            rec(6, "b", L::Generic, 0),
            rec(6, ADJUDICATOR, L::Ambiguous, 0),
        ];
        let out = export_gold(&records, &corpus(8));
        let got: Vec<(&str, ClarityLabel)> = out.dataset.items.iter().map(|i| (i.id.as_str(), i.label)).collect();
        assert_eq!(
            got,
            [
                ("d:0", ClarityLabel::Specific),
                ("d:5", ClarityLabel::Generic),
                ("d:6", ClarityLabel::Ambiguous)
            ]
        );
        let r = out.report;
        assert_eq!(r.candidates, 7);
        assert_eq!(r.excluded_disagreement, 1);
        assert_eq!(r.excluded_risk, 1);
        assert_eq!(r.excluded_na, 1);
        assert_eq!(r.excluded_single_annotator, 1);
        assert_eq!(out.dataset.items[0].provenance, ["d:0#a#0", "d:0#b#0"]);
    }

    fn gold(counts: [usize; 3]) -> GoldDataset {
        let mut items = Vec::new();
        for (li, &n) in counts.iter().enumerate() {
            for j in 0..n {
                items.push(GoldItem {
                    id: format!("{li}-{j}"),
                    text: format!("text {li} {j}"),
                    label: ClarityLabel::ALL[li],
                    provenance: vec![],
                });
            }
        }
        GoldDataset::new(items)
    }

    #[test]
    fn split_floor_arithmetic() {
        let g = gold([452, 411, 292]);
        let s = make_splits(&g, SplitFractions::default(), 7).unwrap();
        let expect_val: usize = [452usize, 411, 292].iter().map(|n| n / 10).sum();
        assert_eq!(s.validation.len(), expect_val);
        assert_eq!(s.test.len(), expect_val);
        assert_eq!(s.train.len(), 1155 - 2 * expect_val);
        assert_eq!(s, make_splits(&g, SplitFractions::default(), 7).unwrap());
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            make_splits(&gold([10, 2, 10]), SplitFractions::default(), 0),
            Err(AnnotationError::LabelTooSmall {
                label: ClarityLabel::Ambiguous,
                n: 2
            })
        ));
        let bad = SplitFractions {
            train: 0.5,
            validation: 0.1,
            test: 0.1,
        };
        assert!(matches!(
            make_splits(&gold([5, 5, 5]), bad, 0),
            Err(AnnotationError::InvalidFractions(_))
        ));
    }

    proptest! {
        #[test]
        fn splits_partition_the_gold_set(a in 3usize..60, b in 3usize..60, c in 3usize..60, seed in any::<u64>()) {
            let g = gold([a, b, c]);
            let s = make_splits(&g, SplitFractions::default(), seed).unwrap();
            let mut all: Vec<&String> = s.train.iter().chain(&s.validation).chain(&s.test).collect();
            prop_assert_eq!(all.len(), g.len());
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), g.len());
            for (li, n) in [a, b, c].into_iter().enumerate() {
                let prefix = format!("{li}-");
                let count = |v: &Vec<String>| v.iter().filter(|id| id.starts_with(&prefix)).count();
                prop_assert!((count(&s.validation) as f64 - 0.1 * n as f64).abs() <= 1.0);
                prop_assert!((count(&s.test) as f64 - 0.1 * n as f64).abs() <= 1.0);
                prop_assert!((count(&s.train) as f64 - 0.8 * n as f64).abs() <= 2.0);
            }
        }
    }

    #[test]
    fn import_csv_and_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("data.csv");
        fs::write(
            &csv_path,
            "Text,Label\n\"The Fund excludes coal, always.\",Specific\nMay consider ESG.,ambiguous\nESG means things.,Generic\nRisky.,Risk\n,Generic\nOdd.,Unknown\n",
        )
        .unwrap();
        let r = import_dataset(&csv_path, &ImportMapping::default()).unwrap();
        assert_eq!(r.rows, 6);
        assert_eq!(r.dataset.len(), 3);
        assert_eq!(r.skipped_risk, 1);
        assert_eq!(r.invalid.len(), 2);
        assert_eq!(r.dataset.items[0].text, "The Fund excludes coal, always.");

        let jl = dir.path().join("data.jsonl");
        fs::write(
            &jl,
            "{\"sentence\":\"a\",\"class\":0}\n{\"sentence\":\"b\",\"class\":2}\n",
        )
        .unwrap();
        let mapping = ImportMapping {
            text_column: "sentence".into(),
            label_column: "class".into(),
            id_column: None,
            label_values: BTreeMap::from([("0".to_string(), L::Specific), ("2".to_string(), L::Generic)]),
        };
        let r = import_dataset(&jl, &mapping).unwrap();
        assert_eq!(r.dataset.label_counts(), [1, 0, 1]);

        let missing = ImportMapping {
            text_column: "nope".into(),
            ..Default::default()
        };
        assert!(matches!(
            import_dataset(&csv_path, &missing),
            Err(AnnotationError::Import(_))
        ));
    }

    #[test]
    fn gold_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let g = gold([3, 3, 3]);
        g.write_jsonl(&dir.path().join("gold.jsonl")).unwrap();
        assert_eq!(GoldDataset::read_jsonl(&dir.path().join("gold.jsonl")).unwrap(), g);
        g.write_csv(&dir.path().join("gold.csv")).unwrap();
        let back = import_dataset(
            &dir.path().join("gold.csv"),
            &ImportMapping {
                text_column: "text".into(),
                label_column: "label".into(),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(back.dataset.label_counts(), [3, 3, 3]);
    }
}
