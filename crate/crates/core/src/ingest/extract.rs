use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Turns raw file bytes into page texts.
pub trait TextExtractor: Send + Sync {
    fn name(&self) -> &'static str;

    fn extract_pages(&self, bytes: &[u8]) -> Result<Vec<String>, String>;
}

/// UTF-8 text or markdown. Form feeds separate pages.
#[derive(Debug, Default, Clone, Copy)]
pub struct PlainTextExtractor;

impl TextExtractor for PlainTextExtractor {
    fn name(&self) -> &'static str {
        "plain-text"
    }

    fn extract_pages(&self, bytes: &[u8]) -> Result<Vec<String>, String> {
        let text = std::str::from_utf8(bytes).map_err(|e| format!("not UTF-8: {e}"))?;
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        Ok(text.split('\x0c').map(str::to_string).collect())
    }
}

/// PDF text layer via `pdf-extract`.
#[derive(Debug, Default, Clone, Copy)]
pub struct PdfExtractor;

impl TextExtractor for PdfExtractor {
    fn name(&self) -> &'static str {
        "pdf-extract"
    }

    fn extract_pages(&self, bytes: &[u8]) -> Result<Vec<String>, String> {
        // pdf-extract panics on some malformed inputs
        match catch_unwind(AssertUnwindSafe(|| pdf_extract::extract_text_from_mem_by_pages(bytes))) {
            Ok(Ok(pages)) => Ok(pages),
            Ok(Err(e)) => Err(format!("corrupt PDF: {e}")),
            Err(_) => Err("corrupt PDF: extractor panicked".to_string()),
        }
    }
}

pub fn extractor_for(path: &Path) -> Box<dyn TextExtractor> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pdf") => Box::new(PdfExtractor),
        _ => Box::new(PlainTextExtractor),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_feed_splits_pages() {
        let pages = PlainTextExtractor.extract_pages(b"one\x0ctwo").unwrap();
        assert_eq!(pages, ["one", "two"]);
    }

    #[test]
    fn invalid_utf8_is_rejected() {
        assert!(PlainTextExtractor.extract_pages(&[0xff, 0xfe, 0x00]).is_err());
    }

    #[test]
    fn garbage_pdf_is_an_error_not_a_panic() {
        assert!(PdfExtractor.extract_pages(b"%PDF-1.4 nonsense").is_err());
    }
}
