use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AnnotationError, AnnotationRecord};
use crate::ingest::SentenceRecord;
use crate::io::{self, IoError};
use crate::label::AnnotationLabel;

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

/// Derived view of the journal, rewritten on [`AnnotationStore::snapshot`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreSnapshot {
    pub record_count: usize,
    pub annotators: Vec<String>,
    /// Latest label per sentence.
    pub resolved: BTreeMap<String, AnnotationLabel>,
}

/// Append-only store of annotation records over a fixed sentence corpus.
///
/// Records are never edited or removed; a correction is a new record in a
/// later round. When backed by a directory every accepted record is
/// appended to `journal.jsonl` before `record` returns.
#[derive(Debug)]
pub struct AnnotationStore {
    dir: Option<PathBuf>,
    corpus: Vec<SentenceRecord>,
    index: HashMap<String, usize>,
    records: Vec<AnnotationRecord>,
    keys: HashSet<(String, String, u32)>,
}

impl AnnotationStore {
    pub fn in_memory(corpus: Vec<SentenceRecord>) -> Self {
        let index = corpus
            .iter()
            .enumerate()
            .map(|(i, s)| (s.sentence_id.clone(), i))
            .collect();
        Self {
            dir: None,
            corpus,
            index,
            records: Vec::new(),
            keys: HashSet::new(),
        }
    }

    /// Open (or create) a store in `dir`, replaying its journal.
    pub fn open(dir: &Path, corpus: Vec<SentenceRecord>) -> Result<Self, AnnotationError> {
        fs::create_dir_all(dir).map_err(|source| IoError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut store = Self::in_memory(corpus);
        let journal = dir.join(JOURNAL_FILE);
        if journal.exists() {
            for rec in io::read_jsonl::<AnnotationRecord>(&journal)? {
                store.insert(rec)?;
            }
        }
        store.dir = Some(dir.to_path_buf());
        Ok(store)
    }

    fn check(&self, rec: &AnnotationRecord) -> Result<(String, String, u32), AnnotationError> {
        if !self.index.contains_key(&rec.sentence_id) {
            return Err(AnnotationError::UnknownSentence(rec.sentence_id.clone()));
        }
        let key = (rec.sentence_id.clone(), rec.annotator_id.clone(), rec.round);
        if self.keys.contains(&key) {
            return Err(AnnotationError::DuplicateAnnotation {
                sentence_id: key.0,
                annotator_id: key.1,
                round: key.2,
            });
        }
        Ok(key)
    }

    fn insert(&mut self, rec: AnnotationRecord) -> Result<(), AnnotationError> {
        let key = self.check(&rec)?;
        self.keys.insert(key);
        self.records.push(rec);
        Ok(())
    }

    /// Validate, journal and keep `rec`. Returns the new record count.
    pub fn record(&mut self, rec: AnnotationRecord) -> Result<usize, AnnotationError> {
        self.check(&rec)?;
        if let Some(dir) = &self.dir {
            let path = dir.join(JOURNAL_FILE);
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|source| IoError::Write {
                    path: path.clone(),
                    source,
                })?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer(&mut w, &rec).map_err(IoError::from)?;
            w.write_all(b"\n")
                .and_then(|_| w.flush())
                .map_err(|source| IoError::Write { path, source })?;
        }
        self.insert(rec)?;
        Ok(self.records.len())
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn corpus(&self) -> &[SentenceRecord] {
        &self.corpus
    }

    pub fn sentence(&self, sentence_id: &str) -> Option<&SentenceRecord> {
        self.index.get(sentence_id).map(|&i| &self.corpus[i])
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Latest label per sentence: highest round, then latest insertion.
    pub fn resolved(&self) -> BTreeMap<String, AnnotationLabel> {
        let mut best: BTreeMap<String, (u32, AnnotationLabel)> = BTreeMap::new();
        for r in &self.records {
            match best.get(&r.sentence_id) {
                Some((round, _)) if *round > r.round => {}
                _ => {
                    best.insert(r.sentence_id.clone(), (r.round, r.label));
                }
            }
        }
        best.into_iter().map(|(k, (_, l))| (k, l)).collect()
    }

    /// Corpus sentences without any record, in corpus order.
    pub fn unresolved(&self) -> Vec<SentenceRecord> {
        let done: HashSet<&str> = self.records.iter().map(|r| r.sentence_id.as_str()).collect();
        self.corpus
            .iter()
            .filter(|s| !done.contains(s.sentence_id.as_str()))
            .cloned()
            .collect()
    }

    pub fn to_snapshot(&self) -> StoreSnapshot {
        let annotators: BTreeSet<String> = self.records.iter().map(|r| r.annotator_id.clone()).collect();
        StoreSnapshot {
            record_count: self.records.len(),
            annotators: annotators.into_iter().collect(),
            resolved: self.resolved(),
        }
    }

    /// Rewrite `snapshot.json` atomically (write then rename).
    pub fn snapshot(&self) -> Result<(), AnnotationError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        io::write_json(&tmp, &self.to_snapshot())?;
        let target = dir.join(SNAPSHOT_FILE);
        fs::rename(&tmp, &target).map_err(|source| IoError::Write { path: target, source })?;
        Ok(())
    }
}
