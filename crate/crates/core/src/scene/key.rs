use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::schema::AnnotationSchema;

/// Concatenated option letters, one per schema category (e.g. `AABACBB`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AnswerKey(Vec<char>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("key has {found} letters but the schema has {expected} categories")]
    Length { expected: usize, found: usize },
    #[error("position {position}: {letter:?} is not an option of category {category:?}")]
    Letter {
        /// 1-based category position.
        position: usize,
        letter: char,
        category: String,
    },
    #[error("position {position}: {found:?} is not a letter")]
    NotALetter { position: usize, found: char },
}

impl KeyError {
    /// 1-based offending position; `None` for length mismatches.
    pub fn position(&self) -> Option<usize> {
        match self {
            KeyError::Length { .. } => None,
            KeyError::Letter { position, .. } | KeyError::NotALetter { position, .. } => {
                Some(*position)
            }
        }
    }
}

impl AnswerKey {
    pub fn new(letters: Vec<char>) -> Self {
        Self(letters)
    }

    pub fn letters(&self) -> &[char] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, category: usize) -> Option<char> {
        self.0.get(category).copied()
    }
}

impl FromStr for AnswerKey {
    type Err = KeyError;

    /// Letters are normalized to upper case; whitespace is not allowed.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(i, c)| {
                if c.is_ascii_alphabetic() {
                    Ok(c.to_ascii_uppercase())
                } else {
                    Err(KeyError::NotALetter {
                        position: i + 1,
                        found: c,
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(AnswerKey)
    }
}

impl fmt::Display for AnswerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.0 {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl Serialize for AnswerKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AnswerKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Checks length first, then each letter against its category.
pub fn validate_key(key: &AnswerKey, schema: &AnnotationSchema) -> Result<(), KeyError> {
    if key.len() != schema.len() {
        return Err(KeyError::Length {
            expected: schema.len(),
            found: key.len(),
        });
    }
    for (i, (letter, category)) in key.letters().iter().zip(schema.categories()).enumerate() {
        if !category.has_letter(*letter) {
            return Err(KeyError::Letter {
                position: i + 1,
                letter: *letter,
                category: category.name.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeightsError {
    #[error("weights must be finite and non-negative")]
    Negative,
    #[error("weights must not all be zero")]
    AllZero,
    #[error("expected {expected} weights, found {found}")]
    Length { expected: usize, found: usize },
}

/// Category weights for the composite score, normalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights(Vec<f64>);

impl ScoreWeights {
    pub fn new(raw: Vec<f64>) -> Result<Self, WeightsError> {
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(WeightsError::Negative);
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(WeightsError::AllZero);
        }
        Ok(Self(raw.into_iter().map(|w| w / total).collect()))
    }

    pub fn equal(categories: usize) -> Self {
        Self(vec![1.0 / categories as f64; categories])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_len(&self, categories: usize) -> Result<(), WeightsError> {
        if self.0.len() == categories {
            Ok(())
        } else {
            Err(WeightsError::Length {
                expected: categories,
                found: self.0.len(),
            })
        }
    }

    pub fn is_equal(&self) -> bool {
        let n = self.0.len() as f64;
        self.0.iter().all(|w| (w - 1.0 / n).abs() < 1e-15)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::default_covla_schema;
    use proptest::prelude::*;

    #[test]
    fn worked_key_is_valid() {
        let schema = default_covla_schema();
        let key: AnswerKey = "AABACBB".parse().unwrap();
        assert_eq!(validate_key(&key, &schema), Ok(()));
    }

    #[test]
    fn short_key_fails_length_check() {
        let schema = default_covla_schema();
        let err = validate_key(&"AAB".parse().unwrap(), &schema).unwrap_err();
        assert_eq!(err, KeyError::Length { expected: 7, found: 3 });
        assert_eq!(err.position(), None);
    }

    #[test]
    fn out_of_range_letter_reports_position() {
        let schema = default_covla_schema();
        let err = validate_key(&"ZABACBB".parse().unwrap(), &schema).unwrap_err();
        assert_eq!(err.position(), Some(1));
        // velocity has five options, so 'F' fails at position 3
        let err = validate_key(&"AAFACBB".parse().unwrap(), &schema).unwrap_err();
        assert_eq!(err.position(), Some(3));
    }

    #[test]
    fn non_letters_rejected() {
        assert_eq!(
            "AA1".parse::<AnswerKey>(),
            Err(KeyError::NotALetter { position: 3, found: '1' })
        );
    }

    #[test]
    fn weights_reject_bad_input() {
        assert_eq!(ScoreWeights::new(vec![0.0, 0.0]), Err(WeightsError::AllZero));
        assert_eq!(ScoreWeights::new(vec![1.0, -1.0]), Err(WeightsError::Negative));
        assert_eq!(ScoreWeights::new(vec![f64::NAN]), Err(WeightsError::Negative));
        assert!(ScoreWeights::equal(7).is_equal());
    }

    proptest! {
        #[test]
        fn key_string_round_trip(s in "[A-Z]{0,12}") {
            let key: AnswerKey = s.parse().unwrap();
            prop_assert_eq!(key.to_string(), s);
        }

        #[test]
        fn weights_normalize_proportionally(raw in proptest::collection::vec(0.0f64..100.0, 1..10)) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-9);
            let w = ScoreWeights::new(raw.clone()).unwrap();
            let total: f64 = raw.iter().sum();
            prop_assert!((w.alpha().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, r) in w.alpha().iter().zip(&raw) {
                prop_assert!((a - r / total).abs() < 1e-12);
            }
        }
    }
}
