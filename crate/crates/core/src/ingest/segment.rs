use std::collections::HashSet;

use super::{Section, SentenceRecord};
use crate::text::normalize_whitespace;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

/// Rule-based sentence splitter tuned for prospectus text.
///
/// A sentence ends at `.`, `!` or `?` (plus any closing quotes) followed by
/// whitespace and a token that does not start with a lowercase letter, or at
/// a blank line. No split happens inside a balanced parenthesis pair, after a
/// protected abbreviation (`U.S.`, `e.g.`, `No.`), after dotted initialisms
/// or single-letter initials, or inside numbers such as `3.5`.
#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: HashSet<String>,
}

impl Default for Segmenter {
    fn default() -> Self {
        Self::parse(DEFAULT_ABBREVIATIONS)
    }
}

impl Segmenter {
    /// One abbreviation per line (lowercase, trailing period), `#` comments.
    pub fn parse(text: &str) -> Self {
        let abbreviations = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { abbreviations }
    }

    pub fn with_abbreviations<I, S>(mut self, extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.abbreviations
            .extend(extra.into_iter().map(|s| s.as_ref().trim().to_lowercase()));
        self
    }

    pub fn is_protected(&self, token: &str) -> bool {
        let token = token.trim_start_matches(['(', '[', '"', '\'', '“', '‘']).to_lowercase();
        if self.abbreviations.contains(&token) {
            return true;
        }
        // non-U.S. and similar hyphenated prefixes
        if let Some((_, tail)) = token.rsplit_once('-') {
            if self.abbreviations.contains(tail) || is_initialism(tail) {
                return true;
            }
        }
        is_initialism(&token)
    }

    /// Split `text` into whitespace-normalized sentences.
    pub fn split(&self, text: &str) -> Vec<String> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let matched = matched_parens(&chars);
        let mut out = Vec::new();
        let mut start = 0usize;
        let mut depth = 0usize;
        let push = |from: usize, to: usize, out: &mut Vec<String>| {
            let s = normalize_whitespace(&text[from..to]);
            if !s.is_empty() {
                out.push(s);
            }
        };

        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            match c {
                '(' if matched[i] => depth += 1,
                ')' if matched[i] => {
                    depth = depth.saturating_sub(1);
                    let before = chars[..i].iter().rev().find(|(_, c)| !c.is_whitespace());
                    if depth == 0 && matches!(before, Some((_, '.' | '!' | '?'))) {
                        let end = i + 1;
                        if self.boundary_after(text, &chars, end) {
                            let to = chars.get(end).map_or(text.len(), |(p, _)| *p);
                            push(start, to, &mut out);
                            start = to;
                        }
                    }
                }
                '\n' if depth == 0 => {
                    let mut j = i + 1;
                    while j < chars.len() && chars[j].1 != '\n' && chars[j].1.is_whitespace() {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].1 == '\n' {
                        push(start, pos, &mut out);
                        start = pos;
                    }
                }
                '.' | '!' | '?' if depth == 0 => {
                    let mut run_end = i + 1;
                    while run_end < chars.len() && matches!(chars[run_end].1, '.' | '!' | '?') {
                        run_end += 1;
                    }
                    let mut end = run_end;
                    while end < chars.len() && matches!(chars[end].1, '"' | '\'' | '”' | '’' | ']') {
                        end += 1;
                    }
                    let protected =
                        c == '.' && run_end == i + 1 && self.is_protected(token_before(text, &chars, i + 1));
                    if !protected && self.boundary_after(text, &chars, end) {
                        let to = chars.get(end).map_or(text.len(), |(p, _)| *p);
                        push(start, to, &mut out);
                        start = to;
                    }
                    i = end;
                    continue;
                }
                _ => {}
            }
            i += 1;
        }
        push(start, text.len(), &mut out);
        out
    }

    /// True when position `end` (a char index) is end of text, or whitespace
    /// followed by something other than a lowercase letter.
    fn boundary_after(&self, _text: &str, chars: &[(usize, char)], end: usize) -> bool {
        if end >= chars.len() {
            return true;
        }
        if !chars[end].1.is_whitespace() {
            return false;
        }
        match chars[end..].iter().find(|(_, c)| !c.is_whitespace()) {
            None => true,
            Some((_, c)) => !c.is_lowercase(),
        }
    }
}

/// `U.S.`, `e.g.`, `J.`: letters separated by periods, or a lone initial.
fn is_initialism(token: &str) -> bool {
    let Some(body) = token.strip_suffix('.') else {
        return false;
    };
    !body.is_empty()
        && body
            .split('.')
            .all(|part| part.chars().count() == 1 && part.chars().all(char::is_alphabetic))
}

/// The whitespace-delimited token ending just before char index `end`.
fn token_before<'a>(text: &'a str, chars: &[(usize, char)], end: usize) -> &'a str {
    let mut begin = end;
    while begin > 0 && !chars[begin - 1].1.is_whitespace() {
        begin -= 1;
    }
    let from = chars[begin].0;
    let to = chars.get(end).map_or(text.len(), |(p, _)| *p);
    &text[from..to]
}

/// Marks every parenthesis that belongs to a balanced pair.
fn matched_parens(chars: &[(usize, char)]) -> Vec<bool> {
    let mut matched = vec![false; chars.len()];
    let mut stack = Vec::new();
    for (i, (_, c)) in chars.iter().enumerate() {
        match c {
            '(' => stack.push(i),
            ')' => {
                if let Some(open) = stack.pop() {
                    matched[open] = true;
                    matched[i] = true;
                }
            }
            _ => {}
        }
    }
    matched
}

/// Segment a section into dense, zero-based sentence records.
pub fn segment_sentences(section: &Section, segmenter: &Segmenter) -> Vec<SentenceRecord> {
    segmenter
        .split(&section.text)
        .into_iter()
        .enumerate()
        .map(|(i, text)| {
            let mut r = SentenceRecord::new(&section.doc_id, i, text);
            r.section_name = section.name.clone();
            r
        })
        .collect()
}
