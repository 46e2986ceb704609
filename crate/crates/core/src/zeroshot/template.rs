use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::ZeroShotError;
use crate::label::{ClarityLabel, ClassLabel};

const DEFAULT_TEMPLATE: &str = include_str!("../../data/zeroshot_template.toml");

/// The placeholder that receives the sentence.
pub const SENTENCE_SLOT: &str = "{S}";

/// A versioned prompt: class definitions, a per-sentence line with one
/// [`SENTENCE_SLOT`], and the answer instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub version: String,
    pub system_preamble: String,
    pub per_example_format: String,
    pub answer_instruction: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATE).expect("bundled template is valid")
    }
}

impl PromptTemplate {
    pub fn parse(toml_text: &str) -> Result<Self, ZeroShotError> {
        let t: Self = toml::from_str(toml_text).map_err(|e| ZeroShotError::Template(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, ZeroShotError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ZeroShotError::Template(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ZeroShotError> {
        let slots = self.per_example_format.matches(SENTENCE_SLOT).count()
            + self.system_preamble.matches(SENTENCE_SLOT).count()
            + self.answer_instruction.matches(SENTENCE_SLOT).count();
        if slots != 1 || !self.per_example_format.contains(SENTENCE_SLOT) {
            return Err(ZeroShotError::Template(format!(
                "template must contain exactly one {SENTENCE_SLOT} slot, in per_example_format (found {slots})"
            )));
        }
        for l in ClarityLabel::ALL {
            if !self.system_preamble.contains(l.name()) {
                return Err(ZeroShotError::Template(format!("preamble does not define {l}")));
            }
        }
        if self.answer_instruction.trim().is_empty() {
            return Err(ZeroShotError::Template("answer_instruction is empty".into()));
        }
        Ok(())
    }

    fn parts(&self) -> (&str, &str) {
        self.per_example_format
            .split_once(SENTENCE_SLOT)
            .expect("validated template has a slot")
    }
}

/// Fill the template with one sentence. Pure: two sentences yield prompts
/// that differ only inside the slot.
pub fn build_prompt(sentence: &str, template: &PromptTemplate) -> String {
    if sentence.trim().is_empty() {
        warn!(version = %template.version, "building a zero-shot prompt for an empty sentence");
    }
    let (before, after) = template.parts();
    let mut out = String::with_capacity(
        template.system_preamble.len()
            + template.per_example_format.len()
            + template.answer_instruction.len()
            + sentence.len()
            + 4,
    );
    out.push_str(template.system_preamble.trim_end());
    out.push_str("\n\n");
    out.push_str(before);
    out.push_str(sentence);
    out.push_str(after);
    out.push_str("\n\n");
    out.push_str(template.answer_instruction.trim());
    out
}
