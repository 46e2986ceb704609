use std::collections::HashSet;

use regex::Regex;
use thiserror::Error;

use crate::label::RelevanceLabel;
use crate::text::normalize_whitespace;

const DEFAULT_LEXICON: &str = include_str!("../../data/esg_lexicon.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexiconError {
    #[error("lexicon is empty")]
    Empty,
    #[error("lexicon pattern {0:?} is not lowercase")]
    NotLowercase(String),
    #[error("duplicate lexicon pattern {0:?}")]
    Duplicate(String),
}

#[derive(Debug, Clone)]
enum Matcher {
    Stem(String),
    Word(Regex),
}

/// ESG keyword lexicon used for weak labeling.
///
/// Entries ending in `*` are stems and match as substrings; all others match
/// on word boundaries.
#[derive(Debug, Clone)]
pub struct Lexicon {
    terms: Vec<String>,
    matchers: Vec<Matcher>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }
}

impl Lexicon {
    pub fn new<S: AsRef<str>>(terms: &[S]) -> Result<Self, LexiconError> {
        if terms.is_empty() {
            return Err(LexiconError::Empty);
        }
        let mut seen = HashSet::new();
        let mut matchers = Vec::with_capacity(terms.len());
        let mut owned = Vec::with_capacity(terms.len());
        for t in terms {
            let t = normalize_whitespace(t.as_ref());
            if t.is_empty() {
                continue;
            }
            if t != t.to_lowercase() {
                return Err(LexiconError::NotLowercase(t));
            }
            if !seen.insert(t.clone()) {
                return Err(LexiconError::Duplicate(t));
            }
            let matcher = match t.strip_suffix('*') {
                Some(stem) => Matcher::Stem(stem.to_string()),
                None => {
                    let re =
                        Regex::new(&format!(r"\b{}\b", regex::escape(&t))).expect("escaped literal is a valid regex");
                    Matcher::Word(re)
                }
            };
            matchers.push(matcher);
            owned.push(t);
        }
        if owned.is_empty() {
            return Err(LexiconError::Empty);
        }
        Ok(Self { terms: owned, matchers })
    }

    /// One pattern per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self::new(&lines)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Terms matching `text`, in lexicon order.
    pub fn matches<'a>(&'a self, text: &str) -> Vec<&'a str> {
        let lowered = normalize_whitespace(&text.to_lowercase());
        self.terms
            .iter()
            .zip(&self.matchers)
            .filter(|(_, m)| match m {
                Matcher::Stem(s) => lowered.contains(s.as_str()),
                Matcher::Word(re) => re.is_match(&lowered),
            })
            .map(|(t, _)| t.as_str())
            .collect()
    }

    pub fn is_match(&self, text: &str) -> bool {
        let lowered = normalize_whitespace(&text.to_lowercase());
        self.matchers.iter().any(|m| match m {
            Matcher::Stem(s) => lowered.contains(s.as_str()),
            Matcher::Word(re) => re.is_match(&lowered),
        })
    }
}

/// ESG iff any lexicon entry matches.
pub fn weak_label_lexicon(text: &str, lexicon: &Lexicon) -> RelevanceLabel {
    if lexicon.is_match(text) {
        RelevanceLabel::Esg
    } else {
        RelevanceLabel::NonEsg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        let lex = Lexicon::default();
        assert_eq!(
            weak_label_lexicon("The Fund considers ESG criteria.", &lex),
            RelevanceLabel::Esg
        );
        assert_eq!(
            weak_label_lexicon("The Fund's fiscal year ends October 31.", &lex),
            RelevanceLabel::NonEsg
        );
        let s =
            "The Sub-fund invests a minimum of 5% in green, social, sustainable, and/or sustainability-linked bonds.";
        assert_eq!(weak_label_lexicon(s, &lex), RelevanceLabel::Esg);
        assert!(lex.matches(s).contains(&"sustainab*"));
    }

    #[test]
    fn words_need_boundaries_stems_do_not() {
        let lex = Lexicon::new(&["esg", "screen*"]).unwrap();
        assert!(!lex.is_match("The desgin is odd."));
        assert!(lex.is_match("Negative screening applies."));
        assert!(lex.is_match("ESG-focused."));
    }

    #[test]
    fn phrases_tolerate_whitespace_runs() {
        let lex = Lexicon::new(&["human rights"]).unwrap();
        assert!(lex.is_match("Violations of Human\n  Rights."));
    }

    #[test]
    fn invalid_lexicons() {
        assert_eq!(Lexicon::new::<&str>(&[]).unwrap_err(), LexiconError::Empty);
        assert!(matches!(Lexicon::new(&["ESG"]), Err(LexiconError::NotLowercase(_))));
        assert!(matches!(Lexicon::new(&["esg", "esg"]), Err(LexiconError::Duplicate(_))));
    }

    #[test]
    fn bundled_lexicon_size() {
        let n = Lexicon::default().terms().len();
        assert!((55..=70).contains(&n), "{n} terms");
    }

    proptest! {
        #[test]
        fn adding_a_term_never_removes_esg(
            base in prop::sample::subsequence(vec!["esg", "carbon", "coal", "tobacco", "screen*"], 1..5),
            extra in "[a-z]{2,8}",
            text in "[A-Za-z ,.]{0,60}",
        ) {
            let small = Lexicon::new(&base).unwrap();
            let mut bigger: Vec<String> = base.iter().map(|s| s.to_string()).collect();
            if !bigger.contains(&extra) {
                bigger.push(extra);
            }
            let big = Lexicon::new(&bigger).unwrap();
            if weak_label_lexicon(&text, &small) == RelevanceLabel::Esg {
                prop_assert_eq!(weak_label_lexicon(&text, &big), RelevanceLabel::Esg);
            }
        }
    }
}
