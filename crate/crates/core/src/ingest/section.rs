use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{IngestError, RawDocument};

pub const STRATEGY_SECTION: &str = "Principal Investment Strategy";

pub const DEFAULT_HEADINGS: &str = include_str!("../../data/headings.txt");

/// Ordered, line-anchored, case-insensitive heading matchers.
#[derive(Debug, Clone)]
pub struct HeadingPatterns {
    patterns: Vec<Regex>,
}

impl Default for HeadingPatterns {
    fn default() -> Self {
        Self::parse(DEFAULT_HEADINGS).expect("bundled heading patterns compile")
    }
}

impl HeadingPatterns {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<Self, IngestError> {
        let patterns = patterns
            .iter()
            .map(|p| {
                RegexBuilder::new(&format!("^(?:{})", p.as_ref()))
                    .case_insensitive(true)
                    .build()
                    .map_err(|source| IngestError::BadPattern {
                        pattern: p.as_ref().to_string(),
                        source,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        assert!(!patterns.is_empty(), "at least one heading pattern is required");
        Ok(Self { patterns })
    }

    /// One pattern per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self::new(&lines)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub doc_id: String,
    pub name: String,
    pub text: String,
    /// Byte offsets `[start, end)` into [`RawDocument::text`].
    pub char_span: (usize, usize),
}

const MINOR_WORDS: &[&str] = &[
    "a", "an", "and", "as", "at", "by", "for", "from", "in", "of", "on", "or", "the", "to", "with", "&",
];

/// A short, title-cased or all-caps line without sentence punctuation.
pub fn is_heading_line(line: &str) -> bool {
    let line = line.trim();
    if line.is_empty() || line.ends_with(['.', ';', ',', '!', '?']) {
        return false;
    }
    let words: Vec<&str> = line.split_whitespace().collect();
    if words.len() > 10 || !line.chars().any(char::is_alphabetic) {
        return false;
    }
    let all_caps = line.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase);
    let title_case = words.iter().enumerate().all(|(i, w)| {
        let first = w.chars().find(|c| c.is_alphanumeric());
        match first {
            None => true,
            Some(c) if !c.is_alphabetic() => true,
            Some(c) => c.is_uppercase() || (i > 0 && MINOR_WORDS.contains(&w.to_lowercase().as_str())),
        }
    });
    all_caps || title_case
}

struct Line {
    start: usize,
    end: usize,
}

fn lines(text: &str) -> Vec<Line> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if c == '\n' {
            out.push(Line { start, end: i });
            start = i + 1;
        }
    }
    out.push(Line { start, end: text.len() });
    out
}

/// Locate the investment strategy section.
///
/// Patterns are tried in order; for each, heading-styled lines are scanned
/// from the top and the first one with a non-empty body wins. The body runs
/// from the line after the heading to the next heading-styled line (or end of
/// document), trimmed of surrounding whitespace.
pub fn extract_strategy_section(doc: &RawDocument, patterns: &HeadingPatterns) -> Result<Section, IngestError> {
    let text = doc.text();
    let lines = lines(&text);
    let is_match = |re: &Regex, l: &Line| {
        let s = text[l.start..l.end].trim();
        match re.find(s) {
            // a line that is nothing but the heading counts whatever its case
            Some(m) => is_heading_line(s) || s[m.end()..].trim_start_matches(':').trim().is_empty(),
            None => false,
        }
    };

    let heading_count = lines
        .iter()
        .filter(|l| patterns.patterns.iter().any(|re| is_match(re, l)))
        .count();
    if heading_count > 1 {
        warn!(doc_id = %doc.doc_id, headings = heading_count, "multiple strategy headings; using the first");
    }

    for re in &patterns.patterns {
        for (i, heading) in lines.iter().enumerate() {
            if !is_match(re, heading) {
                continue;
            }
            let body_start = lines.get(i + 1).map_or(text.len(), |l| l.start);
            let body_end = lines[i + 1..]
                .iter()
                .find(|l| is_heading_line(&text[l.start..l.end]))
                .map_or(text.len(), |l| l.start);
            let raw = &text[body_start..body_end];
            let lead = raw.len() - raw.trim_start().len();
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            let start = body_start + lead;
            return Ok(Section {
                doc_id: doc.doc_id.clone(),
                name: STRATEGY_SECTION.to_string(),
                text: trimmed.to_string(),
                char_span: (start, start + trimmed.len()),
            });
        }
    }
    Err(IngestError::NoSectionFound(doc.doc_id.clone()))
}
