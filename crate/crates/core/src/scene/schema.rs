//! Annotation schemas: ordered categories, lettered options and the phrase
//! rules that map caption text to a letter.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed schema JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("category {index} ({name:?}): {problem}")]
    Category {
        index: usize,
        name: String,
        problem: String,
    },
    #[error("category {category} ({name:?}), rule {rule}: {problem}")]
    Rule {
        category: usize,
        name: String,
        rule: usize,
        problem: String,
    },
    #[error("schema has no categories")]
    Empty,
}

/// Maps a phrase pattern to an option letter.
#[derive(Clone)]
pub struct MappingRule {
    pattern: String,
    letter: char,
    regex: Regex,
}

impl MappingRule {
    /// `pattern` is a regular expression fragment matched case-insensitively
    /// on word boundaries.
    pub fn new(pattern: &str, letter: char) -> Result<Self, regex::Error> {
        let regex = RegexBuilder::new(&format!(r"\b(?:{pattern})\b"))
            .case_insensitive(true)
            .build()?;
        Ok(Self {
            pattern: pattern.to_string(),
            letter,
            regex,
        })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn letter(&self) -> char {
        self.letter
    }

    /// Byte range of the first match.
    pub fn find(&self, text: &str) -> Option<std::ops::Range<usize>> {
        self.regex.find(text).map(|m| m.range())
    }
}

impl fmt::Debug for MappingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MappingRule")
            .field("pattern", &self.pattern)
            .field("letter", &self.letter)
            .finish()
    }
}

impl PartialEq for MappingRule {
    fn eq(&self, other: &Self) -> bool {
        self.pattern == other.pattern && self.letter == other.letter
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub name: String,
    pub question: String,
    options: Vec<(char, String)>,
    rules: Vec<MappingRule>,
    default: char,
}

impl Category {
    pub fn options(&self) -> &[(char, String)] {
        &self.options
    }

    pub fn rules(&self) -> &[MappingRule] {
        &self.rules
    }

    /// The "does not apply / not mentioned" option.
    pub fn default_letter(&self) -> char {
        self.default
    }

    pub fn has_letter(&self, letter: char) -> bool {
        self.options.iter().any(|(l, _)| *l == letter)
    }

    pub fn label(&self, letter: char) -> Option<&str> {
        self.options
            .iter()
            .find(|(l, _)| *l == letter)
            .map(|(_, label)| label.as_str())
    }

    pub fn letters(&self) -> impl Iterator<Item = char> + '_ {
        self.options.iter().map(|(l, _)| *l)
    }

    pub fn option_count(&self) -> usize {
        self.options.len()
    }

    /// Position of `letter` among the options, if valid.
    pub fn index_of(&self, letter: char) -> Option<usize> {
        self.options.iter().position(|(l, _)| *l == letter)
    }
}

/// Ordered annotation categories.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSchema {
    pub schema_id: String,
    categories: Vec<Category>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRule {
    pattern: String,
    letter: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCategory {
    name: String,
    question: String,
    options: BTreeMap<String, String>,
    #[serde(default)]
    rules: Vec<RawRule>,
    default: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSchema {
    schema_id: String,
    categories: Vec<RawCategory>,
}

fn single_letter(s: &str) -> Option<char> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_uppercase() => Some(c),
        _ => None,
    }
}

impl AnnotationSchema {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let raw: RawSchema = serde_json::from_str(text).map_err(|e| SchemaError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn from_raw(raw: RawSchema) -> Result<Self, SchemaError> {
        if raw.categories.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut categories = Vec::with_capacity(raw.categories.len());
        for (i, rc) in raw.categories.into_iter().enumerate() {
            let index = i + 1;
            let cat_err = |problem: String| SchemaError::Category {
                index,
                name: rc.name.clone(),
                problem,
            };
            if rc.options.is_empty() {
                return Err(cat_err("no options".into()));
            }
            let mut options = Vec::with_capacity(rc.options.len());
            for (k, (letter, label)) in rc.options.iter().enumerate() {
                let expected = (b'A' + k as u8) as char;
                match single_letter(letter) {
                    Some(c) if c == expected => options.push((c, label.clone())),
                    _ => {
                        return Err(cat_err(format!(
                            "option letters must run consecutively from 'A'; expected {expected:?}, found {letter:?}"
                        )))
                    }
                }
            }
            let default = single_letter(&rc.default)
                .filter(|d| options.iter().any(|(l, _)| l == d))
                .ok_or_else(|| cat_err(format!("default {:?} is not an option", rc.default)))?;
            let mut rules = Vec::with_capacity(rc.rules.len());
            for (j, rr) in rc.rules.iter().enumerate() {
                let rule_err = |problem: String| SchemaError::Rule {
                    category: index,
                    name: rc.name.clone(),
                    rule: j + 1,
                    problem,
                };
                let letter = single_letter(&rr.letter)
                    .filter(|l| options.iter().any(|(o, _)| o == l))
                    .ok_or_else(|| rule_err(format!("letter {:?} is not an option", rr.letter)))?;
                let rule = MappingRule::new(&rr.pattern, letter)
                    .map_err(|e| rule_err(format!("bad pattern: {e}")))?;
                rules.push(rule);
            }
            categories.push(Category {
                name: rc.name,
                question: rc.question,
                options,
                rules,
                default,
            });
        }
        Ok(Self {
            schema_id: raw.schema_id,
            categories,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("schema serializes")
    }

    fn to_raw(&self) -> RawSchema {
        RawSchema {
            schema_id: self.schema_id.clone(),
            categories: self
                .categories
                .iter()
                .map(|c| RawCategory {
                    name: c.name.clone(),
                    question: c.question.clone(),
                    options: c
                        .options
                        .iter()
                        .map(|(l, label)| (l.to_string(), label.clone()))
                        .collect(),
                    rules: c
                        .rules
                        .iter()
                        .map(|r| RawRule {
                            pattern: r.pattern.clone(),
                            letter: r.letter.to_string(),
                        })
                        .collect(),
                    default: c.default.to_string(),
                })
                .collect(),
        }
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// The default letter of every category, in order.
    pub fn default_letters(&self) -> Vec<char> {
        self.categories.iter().map(|c| c.default).collect()
    }

    /// Returns a copy whose `category` uses `rules` in place of its own.
    pub fn with_rules(&self, category: usize, rules: Vec<MappingRule>) -> Self {
        let mut out = self.clone();
        out.categories[category].rules = rules;
        out
    }
}

impl Serialize for AnnotationSchema {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_raw().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AnnotationSchema {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawSchema::deserialize(deserializer)?;
        Self::from_raw(raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = r#"{
        "schema_id": "mini",
        "categories": [
            {"name": "motion", "question": "Is it moving?",
             "options": {"A": "moving", "B": "stopped", "C": "does not apply"},
             "rules": [{"pattern": "stopped", "letter": "B"}, {"pattern": "moving", "letter": "A"}],
             "default": "C"}
        ]
    }"#;

    #[test]
    fn loads_and_round_trips() {
        let s = AnnotationSchema::from_json(MINI).unwrap();
        assert_eq!(s.len(), 1);
        let c = &s.categories()[0];
        assert_eq!(c.default_letter(), 'C');
        assert_eq!(c.label('B'), Some("stopped"));
        let again = AnnotationSchema::from_json(&s.to_json()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn json_errors_carry_position() {
        let err = AnnotationSchema::from_json("{\n  \"schema_id\": 3\n}").unwrap_err();
        match err {
            SchemaError::Json { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_consecutive_letters_rejected() {
        let bad = MINI.replace(r#""C": "does not apply""#, r#""D": "does not apply""#);
        let err = AnnotationSchema::from_json(&bad).unwrap_err();
        assert!(matches!(err, SchemaError::Category { index: 1, .. }), "{err}");
    }

    #[test]
    fn default_must_exist() {
        let bad = MINI.replace(r#""default": "C""#, r#""default": "Q""#);
        assert!(matches!(
            AnnotationSchema::from_json(&bad).unwrap_err(),
            SchemaError::Category { index: 1, .. }
        ));
    }

    #[test]
    fn rule_letter_must_exist() {
        let bad = MINI.replace(r#""letter": "B""#, r#""letter": "F""#);
        assert!(matches!(
            AnnotationSchema::from_json(&bad).unwrap_err(),
            SchemaError::Rule { category: 1, rule: 1, .. }
        ));
    }

    #[test]
    fn bad_regex_rejected() {
        let bad = MINI.replace(r#""pattern": "moving""#, r#""pattern": "mov(ing""#);
        assert!(matches!(
            AnnotationSchema::from_json(&bad).unwrap_err(),
            SchemaError::Rule { category: 1, rule: 2, .. }
        ));
    }

    #[test]
    fn rules_respect_word_boundaries() {
        let r = MappingRule::new("accelerat\\w*", 'A').unwrap();
        assert!(r.find("The car is Accelerating").is_some());
        assert!(r.find("the car is decelerating").is_none());
    }
}

