//! Extracts the trailing `1) A 2) B ...` answer key from free-form text.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::scene::{AnnotationSchema, AnswerKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Parsed,
    Refusal,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub status: ParseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<AnswerKey>,
    pub raw_text: String,
}

impl ParsedResponse {
    pub fn parsed(key: AnswerKey, raw_text: impl Into<String>) -> Self {
        Self {
            status: ParseStatus::Parsed,
            key: Some(key),
            raw_text: raw_text.into(),
        }
    }

    pub fn is_parsed(&self) -> bool {
        self.status == ParseStatus::Parsed
    }
}

/// Largest amount of text allowed between two consecutive key items.
const MAX_ITEM_GAP: usize = 120;

static REFUSAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?ix)
        \b(?:
            i(?:'m|\s+am)\s+(?:sorry|unable|not\s+able)
          | i\s+(?:cannot|can't|can\s+not|won't|will\s+not)\s+(?:help|assist|comply|analy[sz]e|provide|classify|determine|answer|identify|do\s+that)
          | (?:unable|not\s+able)\s+to\s+(?:help|assist|comply|analy[sz]e|provide|classify|determine|answer|identify)
          | as\s+an\s+ai\b
          | i\s+must\s+decline
        )",
    )
    .expect("refusal pattern compiles")
});

#[derive(Debug, Clone, Copy)]
struct Item {
    number: u32,
    letter: char,
    start: usize,
    end: usize,
}

fn skip_spaces(chars: &[(usize, char)], mut i: usize) -> usize {
    while i < chars.len() && matches!(chars[i].1, ' ' | '\t') {
        i += 1;
    }
    i
}

fn skip_emphasis(chars: &[(usize, char)], mut i: usize) -> usize {
    let mut n = 0;
    while i < chars.len() && matches!(chars[i].1, '*' | '_') && n < 2 {
        i += 1;
        n += 1;
    }
    i
}

/// Finds every `<number><sep> <letter>` item, where the separator is `)`,
/// `.` or `:` and the letter stands alone (optionally bracketed or bold).
fn scan_items(text: &str) -> Vec<Item> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |c| c.0);
    let mut items = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        let boundary = i == 0 || !chars[i - 1].1.is_alphanumeric();
        if !(c.is_ascii_digit() && boundary) {
            i += 1;
            continue;
        }
        let start = i;
        let mut j = i;
        let mut number: u32 = 0;
        while j < chars.len() && chars[j].1.is_ascii_digit() && j - start < 3 {
            number = number * 10 + chars[j].1.to_digit(10).unwrap();
            j += 1;
        }
        let parsed = (|| {
            if j - start > 2 || (j < chars.len() && chars[j].1.is_ascii_digit()) {
                return None;
            }
            let mut k = skip_spaces(&chars, j);
            if !matches!(chars.get(k).map(|c| c.1), Some(')' | '.' | ':')) {
                return None;
            }
            k = skip_spaces(&chars, k + 1);
            k = skip_emphasis(&chars, k);
            let bracketed = chars.get(k).map(|c| c.1) == Some('[');
            if bracketed {
                k += 1;
            }
            let letter = chars.get(k).map(|c| c.1).filter(char::is_ascii_alphabetic)?;
            k += 1;
            if bracketed {
                if chars.get(k).map(|c| c.1) != Some(']') {
                    return None;
                }
                k += 1;
            } else if chars.get(k).map(|c| c.1) == Some(')') && chars.get(k + 1).is_none_or(|c| !c.1.is_alphanumeric()) {
                // "1) A)" style
                k += 1;
            }
            k = skip_emphasis(&chars, k);
            if chars.get(k).is_some_and(|c| c.1.is_alphanumeric()) {
                return None;
            }
            let end = k;
            let next = skip_spaces(&chars, k);
            let ok = match chars.get(next).map(|c| c.1) {
                None => true,
                Some(n) => {
                    n.is_ascii_digit()
                        || matches!(n, '\n' | '\r' | '.' | ',' | ';' | ':' | ')' | '(' | '-' | '\u{2013}' | '\u{2014}' | '|' | '*' | '"' | '\'')
                }
            };
            ok.then_some((letter.to_ascii_uppercase(), end))
        })();
        match parsed {
            Some((letter, end)) => {
                items.push(Item {
                    number,
                    letter,
                    start: byte_at(start),
                    end: byte_at(end),
                });
                i = end;
            }
            None => i = j.max(i + 1),
        }
    }
    items
}

/// Complete keys (numbers 1..=n in order, close together, not continuing to
/// n+1), in text order.
fn complete_keys(text: &str, n: usize) -> Vec<Vec<char>> {
    let items = scan_items(text);
    let mut keys = Vec::new();
    let mut run: Vec<Item> = Vec::new();
    let flush = |run: &mut Vec<Item>, keys: &mut Vec<Vec<char>>| {
        if run.len() == n {
            keys.push(run.iter().map(|it| it.letter).collect());
        }
        run.clear();
    };
    for it in items {
        let continues = run.last().is_some_and(|prev| {
            it.number == prev.number + 1 && it.start.saturating_sub(prev.end) <= MAX_ITEM_GAP
        });
        if !continues {
            flush(&mut run, &mut keys);
            if it.number != 1 {
                continue;
            }
        }
        run.push(it);
        if run.len() > n {
            // an (n+1)-th item means this was not a key for this schema
            run.clear();
        }
    }
    flush(&mut run, &mut keys);
    keys
}

fn valid_for(letters: &[char], schema: &AnnotationSchema) -> bool {
    letters
        .iter()
        .zip(schema.categories())
        .all(|(l, c)| c.has_letter(*l))
}

pub fn is_refusal_text(text: &str) -> bool {
    REFUSAL.is_match(&text.replace('’', "'"))
}

/// Classifies a model response. The last complete, schema-valid key wins; a
/// key made only of "does not apply" letters, or no key plus an explicit
/// inability statement, is a refusal.
pub fn parse_response(text: &str, schema: &AnnotationSchema) -> ParsedResponse {
    let n = schema.len();
    let key = (n > 0)
        .then(|| complete_keys(text, n))
        .unwrap_or_default()
        .into_iter()
        .rev()
        .find(|k| valid_for(k, schema));
    let status = match &key {
        Some(k) if *k == schema.default_letters() => ParseStatus::Refusal,
        Some(_) => ParseStatus::Parsed,
        None if is_refusal_text(text) => ParseStatus::Refusal,
        None => ParseStatus::Unparseable,
    };
    ParsedResponse {
        status,
        key: key
            .filter(|_| status == ParseStatus::Parsed)
            .map(AnswerKey::new),
        raw_text: text.to_string(),
    }
}

/// Canonical `1) A 2) B ...` rendering of a key.
pub fn render_key(key: &AnswerKey) -> String {
    key.letters()
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{}) {l}", i + 1))
        .collect::<Vec<_>>()
        .join(" ")
}
