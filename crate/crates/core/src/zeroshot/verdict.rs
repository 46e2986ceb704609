use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::label::ClarityLabel;

/// A parsed model answer. `label` is `None` for an abstention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedVerdict {
    pub label: Option<ClarityLabel>,
    pub raw_response: String,
    /// Set when the request never produced a response.
    #[serde(default)]
    pub transport_error: bool,
}

impl ParsedVerdict {
    pub fn transport_failure(message: impl Into<String>) -> Self {
        Self {
            label: None,
            raw_response: message.into(),
            transport_error: true,
        }
    }

    pub fn is_abstain(&self) -> bool {
        self.label.is_none()
    }
}

fn label_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(specific|ambiguous|generic)\b").expect("static regex"))
}

/// Whole-word, case-insensitive search for the label names. Exactly one
/// distinct label gives that label; none or several give an abstention.
pub fn parse_verdict(response: &str) -> ParsedVerdict {
    let mut found: Option<ClarityLabel> = None;
    let mut conflict = false;
    for m in label_regex().find_iter(response) {
        let l: ClarityLabel = m.as_str().parse().expect("regex only matches label names");
        match found {
            None => found = Some(l),
            Some(f) if f != l => {
                conflict = true;
                break;
            }
            Some(_) => {}
        }
    }
    ParsedVerdict {
        label: if conflict { None } else { found },
        raw_response: response.to_string(),
        transport_error: false,
    }
}
