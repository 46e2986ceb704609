//! Prospectus ingestion: text extraction, strategy-section location and
//! sentence segmentation.

mod extract;
mod section;
mod segment;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

pub use extract::{extractor_for, PdfExtractor, PlainTextExtractor, TextExtractor};
pub use section::{
    extract_strategy_section, is_heading_line, HeadingPatterns, Section, DEFAULT_HEADINGS, STRATEGY_SECTION,
};
pub use segment::{segment_sentences, Segmenter};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("no text could be extracted from {0} (scanned or image-only input is not supported)")]
    EmptyExtraction(PathBuf),
    #[error("document {0} has no investment strategy section")]
    NoSectionFound(String),
    #[error("invalid heading pattern {pattern:?}: {source}")]
    BadPattern { pattern: String, source: regex::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionMeta {
    pub page_count: usize,
    pub extractor: String,
}

/// A document as a list of page texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    pub source_path: PathBuf,
    pub pages: Vec<String>,
    pub extraction_meta: ExtractionMeta,
}

impl RawDocument {
    pub fn from_pages(doc_id: impl Into<String>, pages: Vec<String>, extractor: &str) -> Self {
        Self {
            doc_id: doc_id.into(),
            source_path: PathBuf::new(),
            extraction_meta: ExtractionMeta {
                page_count: pages.len(),
                extractor: extractor.to_string(),
            },
            pages,
        }
    }

    /// Full text: pages joined with a newline. Section spans index into this.
    pub fn text(&self) -> String {
        self.pages.join("\n")
    }
}

/// One strategy sentence with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub sentence_id: String,
    pub doc_id: String,
    pub section_name: String,
    pub index: usize,
    pub text: String,
}

impl SentenceRecord {
    pub fn new(doc_id: &str, index: usize, text: impl Into<String>) -> Self {
        Self {
            sentence_id: sentence_id(doc_id, index),
            doc_id: doc_id.to_string(),
            section_name: STRATEGY_SECTION.to_string(),
            index,
            text: text.into(),
        }
    }
}

impl AsRef<str> for SentenceRecord {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

pub fn sentence_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}:{index}")
}

/// The document part of a `doc_id:index` sentence id.
pub fn doc_id_of(sentence_id: &str) -> &str {
    sentence_id.rsplit_once(':').map_or(sentence_id, |(doc, _)| doc)
}

/// Load a document, choosing the extractor from the file extension.
pub fn load_document(path: impl AsRef<Path>) -> Result<RawDocument, IngestError> {
    let path = path.as_ref();
    load_document_with(path, extractor_for(path).as_ref())
}

pub fn load_document_with(path: &Path, extractor: &dyn TextExtractor) -> Result<RawDocument, IngestError> {
    let bytes = fs::read(path).map_err(|e| IngestError::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let pages = extractor
        .extract_pages(&bytes)
        .map_err(|reason| IngestError::UnreadableFile {
            path: path.to_path_buf(),
            reason,
        })?;
    if pages.iter().all(|p| p.trim().is_empty()) {
        return Err(IngestError::EmptyExtraction(path.to_path_buf()));
    }
    let doc_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| path.display().to_string());
    let mut doc = RawDocument::from_pages(doc_id, pages, extractor.name());
    doc.source_path = path.to_path_buf();
    Ok(doc)
}

/// Load, section and segment one file.
pub fn ingest_document(
    path: &Path,
    patterns: &HeadingPatterns,
    segmenter: &Segmenter,
) -> Result<Vec<SentenceRecord>, IngestError> {
    let doc = load_document(path)?;
    let section = extract_strategy_section(&doc, patterns)?;
    Ok(segment_sentences(&section, segmenter))
}

#[derive(Debug, Default)]
pub struct CorpusIngest {
    pub sentences: Vec<SentenceRecord>,
    pub documents: Vec<String>,
    /// Files skipped, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Ingest every `.txt`, `.md` and `.pdf` file in `dir`, in file-name order.
/// Documents without a strategy section are skipped and logged.
pub fn ingest_directory(
    dir: &Path,
    patterns: &HeadingPatterns,
    segmenter: &Segmenter,
) -> Result<CorpusIngest, IngestError> {
    let unreadable = |e: std::io::Error| IngestError::UnreadableFile {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(unreadable)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension()
                        .and_then(|e| e.to_str())
                        .map(str::to_ascii_lowercase)
                        .as_deref(),
                    Some("txt" | "md" | "pdf")
                )
        })
        .collect();
    paths.sort();

    let mut out = CorpusIngest::default();
    for path in paths {
        match ingest_document(&path, patterns, segmenter) {
            Ok(sentences) => {
                if let Some(first) = sentences.first() {
                    if out.documents.contains(&first.doc_id) {
                        warn!(doc_id = %first.doc_id, "duplicate doc_id; skipping {}", path.display());
                        out.skipped.push((path, format!("duplicate doc_id {}", first.doc_id)));
                        continue;
                    }
                    out.documents.push(first.doc_id.clone());
                }
                out.sentences.extend(sentences);
            }
            Err(e @ (IngestError::NoSectionFound(_) | IngestError::EmptyExtraction(_))) => {
                warn!("skipping {}: {e}", path.display());
                out.skipped.push((path, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
