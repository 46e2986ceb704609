use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::label::ClarityLabel;
use crate::scoring::FundScore;

/// A sentence's role in the rendered report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpanLabel {
    Specific,
    Ambiguous,
    Generic,
    #[serde(rename = "NonESG")]
    NonEsg,
}

impl From<ClarityLabel> for SpanLabel {
    fn from(l: ClarityLabel) -> Self {
        match l {
            ClarityLabel::Specific => Self::Specific,
            ClarityLabel::Ambiguous => Self::Ambiguous,
            ClarityLabel::Generic => Self::Generic,
        }
    }
}

impl SpanLabel {
    fn clarity(self) -> Option<ClarityLabel> {
        match self {
            Self::Specific => Some(ClarityLabel::Specific),
            Self::Ambiguous => Some(ClarityLabel::Ambiguous),
            Self::Generic => Some(ClarityLabel::Generic),
            Self::NonEsg => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSpan {
    pub text: String,
    pub label: SpanLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentReport {
    pub doc_id: String,
    /// Document order.
    pub spans: Vec<ReportSpan>,
    pub score: FundScore,
    pub rank: Option<usize>,
    pub rating: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Html,
    Markdown,
}

const STYLE: &str = ".specific{color:green}.ambiguous{color:red}.generic{color:black}";

fn color(label: ClarityLabel) -> &'static str {
    match label {
        ClarityLabel::Specific => "green",
        ClarityLabel::Ambiguous => "red",
        ClarityLabel::Generic => "black",
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn body(report: &DocumentReport, with_inline_color: bool) -> String {
    report
        .spans
        .iter()
        .map(|s| match s.label.clarity() {
            Some(l) if with_inline_color => format!(
                "<span class=\"{}\" style=\"color:{}\">{}</span>",
                l.css_class(),
                color(l),
                escape(&s.text)
            ),
            Some(l) => format!("<span class=\"{}\">{}</span>", l.css_class(), escape(&s.text)),
            None => escape(&s.text),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

/// Render a document with ESG sentences wrapped by clarity class.
///
/// Non-ESG sentences stay unwrapped. Sentences are joined with single spaces
/// inside the `document` element, so stripping the markup from that element
/// gives back the concatenated sentence text.
pub fn render_document_report(report: &DocumentReport, format: ReportFormat) -> String {
    let s = &report.score;
    match format {
        ReportFormat::Html => {
            let mut out = String::new();
            let _ = writeln!(out, "<!DOCTYPE html>");
            let _ = writeln!(out, "<html>");
            let _ = writeln!(
                out,
                "<head><meta charset=\"utf-8\"><title>{}</title><style>{STYLE}</style></head>",
                escape(&report.doc_id)
            );
            let _ = writeln!(out, "<body>");
            let _ = writeln!(out, "<header class=\"score\">");
            let _ = writeln!(out, "<h1>{}</h1>", escape(&report.doc_id));
            let _ = writeln!(
                out,
                "<dl><dt>Score</dt><dd>{:.4}</dd><dt>Ratio</dt><dd>{:.4}</dd><dt>Scaling factor</dt><dd>{}</dd><dt>Rank</dt><dd>{}</dd><dt>Rating</dt><dd>{}</dd></dl>",
                s.score,
                s.ratio,
                s.scaling_factor,
                opt(report.rank),
                opt(report.rating)
            );
            let _ = writeln!(out, "</header>");
            let _ = writeln!(out, "<p class=\"document\">{}</p>", body(report, false));
            let _ = writeln!(out, "</body>");
            let _ = writeln!(out, "</html>");
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "# {}\n", report.doc_id);
            let _ = writeln!(out, "| Score | Ratio | Scaling factor | Rank | Rating |");
            let _ = writeln!(out, "|---|---|---|---|---|");
            let _ = writeln!(
                out,
                "| {:.4} | {:.4} | {} | {} | {} |\n",
                s.score,
                s.ratio,
                s.scaling_factor,
                opt(report.rank),
                opt(report.rating)
            );
            let _ = writeln!(out, "<p class=\"document\">{}</p>", body(report, true));
            out
        }
    }
}

/// Text content of the `document` element with tags removed and entities
/// decoded.
pub fn strip_markup(rendered: &str) -> Option<String> {
    let start = rendered.find("<p class=\"document\">")? + "<p class=\"document\">".len();
    let end = start + rendered[start..].find("</p>")?;
    let mut text = String::new();
    let mut in_tag = false;
    for c in rendered[start..end].chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => text.push(c),
            _ => {}
        }
    }
    Some(
        text.replace("&lt;", "<")
            .replace("&gt;", ">")
            .replace("&quot;", "\"")
            .replace("&#39;", "'")
            .replace("&amp;", "&"),
    )
}
