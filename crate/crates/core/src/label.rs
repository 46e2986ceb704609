//! Label vocabularies shared across the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A closed label set with a fixed canonical order.
///
/// The canonical order drives confusion-matrix layout, report column order
/// and argmax tie-breaking.
pub trait ClassLabel: Copy + Eq + Ord + std::hash::Hash + fmt::Debug + 'static {
    const ALL: &'static [Self];

    fn index(self) -> usize;

    fn name(self) -> &'static str;

    fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label {0:?}")]
pub struct UnknownLabel(pub String);

/// The three trainable clarity classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClarityLabel {
    Specific,
    Ambiguous,
    Generic,
}

impl ClassLabel for ClarityLabel {
    const ALL: &'static [Self] = &[Self::Specific, Self::Ambiguous, Self::Generic];

    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Self::Specific => "Specific",
            Self::Ambiguous => "Ambiguous",
            Self::Generic => "Generic",
        }
    }
}

impl ClarityLabel {
    /// CSS class used by the HTML document report.
    pub fn css_class(self) -> &'static str {
        match self {
            Self::Specific => "specific",
            Self::Ambiguous => "ambiguous",
            Self::Generic => "generic",
        }
    }
}

/// The annotation vocabulary. Only the first three are trainable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnnotationLabel {
    Specific,
    Ambiguous,
    Generic,
    Risk,
    #[serde(rename = "NA")]
    Na,
}

impl ClassLabel for AnnotationLabel {
    const ALL: &'static [Self] = &[Self::Specific, Self::Ambiguous, Self::Generic, Self::Risk, Self::Na];

    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Self::Specific => "Specific",
            Self::Ambiguous => "Ambiguous",
            Self::Generic => "Generic",
            Self::Risk => "Risk",
            Self::Na => "NA",
        }
    }
}

impl AnnotationLabel {
    /// The clarity class this annotation trains, if any.
    pub fn clarity(self) -> Option<ClarityLabel> {
        match self {
            Self::Specific => Some(ClarityLabel::Specific),
            Self::Ambiguous => Some(ClarityLabel::Ambiguous),
            Self::Generic => Some(ClarityLabel::Generic),
            Self::Risk | Self::Na => None,
        }
    }
}

impl From<ClarityLabel> for AnnotationLabel {
    fn from(l: ClarityLabel) -> Self {
        match l {
            ClarityLabel::Specific => Self::Specific,
            ClarityLabel::Ambiguous => Self::Ambiguous,
            ClarityLabel::Generic => Self::Generic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelevanceLabel {
    #[serde(rename = "ESG")]
    Esg,
    #[serde(rename = "NonESG")]
    NonEsg,
}

impl ClassLabel for RelevanceLabel {
    const ALL: &'static [Self] = &[Self::Esg, Self::NonEsg];

    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Self::Esg => "ESG",
            Self::NonEsg => "NonESG",
        }
    }
}

macro_rules! label_text_impls {
    ($ty:ty) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = UnknownLabel;

            /// Case-insensitive match on the canonical name.
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let t = s.trim();
                <$ty as ClassLabel>::ALL
                    .iter()
                    .copied()
                    .find(|l| l.name().eq_ignore_ascii_case(t))
                    .ok_or_else(|| UnknownLabel(s.to_string()))
            }
        }
    };
}

label_text_impls!(ClarityLabel);
label_text_impls!(AnnotationLabel);
label_text_impls!(RelevanceLabel);
