use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::ParseStatus;
use crate::protocol::EvaluationRecord;
use crate::scene::{AnnotationSchema, ScoreWeights, WeightsError};

/// How per-option precision, recall and F1 are averaged within a category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean over the options that occur in the ground truth.
    #[default]
    Macro,
    /// Mean over options weighted by their ground-truth support.
    Weighted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Category weights αᵢ; equal when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<ScoreWeights>,
    #[serde(default)]
    pub averaging: Averaging,
    /// Count refusals and unparseable answers as wrong in every category
    /// instead of leaving them out of the accuracy denominators.
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no records to score")]
    Empty,
    #[error("record {record_id} does not fit schema {schema_id}")]
    SchemaMismatch { record_id: String, schema_id: String },
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("need at least 2 groups with at least 2 records each, have {0}")]
    InsufficientGroups(String),
}

/// Rows are ground-truth options, columns predicted options, both in
/// schema letter order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub letters: Vec<char>,
    pub counts: Vec<Vec<u64>>,
}

/// Precision, recall and F1 of one option against the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionScores {
    pub letter: char,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn new(letters: Vec<char>) -> Self {
        let n = letters.len();
        Self {
            letters,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.letters.len()).map(|i| self.counts[i][i]).sum()
    }

    fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }

    /// One-vs-rest scores per option. An undefined ratio counts as 0.
    pub fn option_scores(&self) -> Vec<OptionScores> {
        let n = self.letters.len();
        (0..n)
            .map(|i| {
                let tp = self.counts[i][i];
                let support: u64 = self.counts[i].iter().sum();
                let predicted: u64 = (0..n).map(|r| self.counts[r][i]).sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                OptionScores {
                    letter: self.letters[i],
                    support,
                    precision,
                    recall,
                    f1,
                }
            })
            .collect()
    }

    /// Averaged (precision, recall, F1) over options present in the truth.
    pub fn averaged(&self, averaging: Averaging) -> (f64, f64, f64) {
        let scores: Vec<OptionScores> = self
            .option_scores()
            .into_iter()
            .filter(|s| s.support > 0)
            .collect();
        if scores.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let weight = |s: &OptionScores| match averaging {
            Averaging::Macro => 1.0,
            Averaging::Weighted => s.support as f64,
        };
        let total: f64 = scores.iter().map(weight).sum();
        let avg = |f: fn(&OptionScores) -> f64| scores.iter().map(|s| weight(s) * f(s)).sum::<f64>() / total;
        (avg(|s| s.precision), avg(|s| s.recall), avg(|s| s.f1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub name: String,
    pub confusion: ConfusionMatrix,
    /// Sᵢ.
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Records in the accuracy denominator.
    pub counted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Model id or evaluator id; `"*"` when records of several subjects were
    /// pooled.
    pub subject: String,
    pub human: bool,
    pub schema_id: String,
    pub averaging: Averaging,
    pub strict: bool,
    pub weights: Vec<f64>,
    pub categories: Vec<CategoryReport>,
    /// Σ αᵢ·Sᵢ.
    pub score: f64,
    /// Same as `score`; kept under the table's column name.
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Share of counted records whose whole key equals the truth.
    pub exact_match_rate: f64,
    pub refusal_rate: f64,
    pub unparseable_rate: f64,
    pub mean_latency_s: f64,
    /// Records that reached the subject (transport failures excluded).
    pub records: u64,
    pub parsed: u64,
    pub refusals: u64,
    pub unparseable: u64,
    pub transport_failures: u64,
}

/// Partial counts over a set of records. Tallies of disjoint subsets merge
/// into the tally of their union.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    matrices: Vec<ConfusionMatrix>,
    correct: Vec<u64>,
    exact: u64,
    records: u64,
    parsed: u64,
    refusals: u64,
    unparseable: u64,
    transport_failures: u64,
    latency_sum: f64,
    subjects: BTreeMap<String, bool>,
}

impl Tally {
    pub fn new(schema: &AnnotationSchema) -> Self {
        Self {
            matrices: schema
                .categories()
                .iter()
                .map(|c| ConfusionMatrix::new(c.letters().collect()))
                .collect(),
            correct: vec![0; schema.len()],
            exact: 0,
            records: 0,
            parsed: 0,
            refusals: 0,
            unparseable: 0,
            transport_failures: 0,
            latency_sum: 0.0,
            subjects: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, record: &EvaluationRecord, schema: &AnnotationSchema) -> Result<(), MetricsError> {
        let mismatch = || MetricsError::SchemaMismatch {
            record_id: record.record_id.clone(),
            schema_id: schema.schema_id.clone(),
        };
        if !record.completed() {
            self.transport_failures += 1;
            return Ok(());
        }
        if record.truth.key.len() != schema.len() {
            return Err(mismatch());
        }
        self.subjects
            .insert(record.subject().to_string(), record.is_human());
        self.records += 1;
        self.latency_sum += record.latency_s;
        match record.predicted.status {
            ParseStatus::Refusal => self.refusals += 1,
            ParseStatus::Unparseable => self.unparseable += 1,
            ParseStatus::Parsed => {
                let key = record.predicted.key.as_ref().ok_or_else(mismatch)?;
                if key.len() != schema.len() {
                    return Err(mismatch());
                }
                let mut all = true;
                for (i, c) in schema.categories().iter().enumerate() {
                    let t = c.index_of(record.truth.key.letters()[i]).ok_or_else(mismatch)?;
                    let p = c.index_of(key.letters()[i]).ok_or_else(mismatch)?;
                    self.matrices[i].add(t, p);
                    if t == p {
                        self.correct[i] += 1;
                    } else {
                        all = false;
                    }
                }
                self.parsed += 1;
                self.exact += all as u64;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Tally) {
        for (m, o) in self.matrices.iter_mut().zip(&other.matrices) {
            m.merge(o);
        }
        for (c, o) in self.correct.iter_mut().zip(&other.correct) {
            *c += o;
        }
        self.exact += other.exact;
        self.records += other.records;
        self.parsed += other.parsed;
        self.refusals += other.refusals;
        self.unparseable += other.unparseable;
        self.transport_failures += other.transport_failures;
        self.latency_sum += other.latency_sum;
        self.subjects.extend(other.subjects.clone());
    }

    pub fn report(&self, schema: &AnnotationSchema, options: &ScoreOptions) -> Result<MetricsReport, MetricsError> {
        if self.records == 0 {
            return Err(MetricsError::Empty);
        }
        let weights = match &options.weights {
            Some(w) => {
                w.check_len(schema.len())?;
                w.clone()
            }
            None => ScoreWeights::equal(schema.len()),
        };
        let alpha = weights.alpha();
        let denominator = if options.strict { self.records } else { self.parsed };
        let categories: Vec<CategoryReport> = schema
            .categories()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (precision, recall, f1) = self.matrices[i].averaged(options.averaging);
                CategoryReport {
                    name: c.name.clone(),
                    confusion: self.matrices[i].clone(),
                    accuracy: ratio(self.correct[i], denominator),
                    precision,
                    recall,
                    f1,
                    counted: denominator,
                }
            })
            .collect();
        // equal weights use the plain mean so the score is bit-identical to
        // the mean of category accuracies
        let equal = weights.is_equal();
        let weighted = |f: fn(&CategoryReport) -> f64| {
            if equal {
                categories.iter().map(f).sum::<f64>() / categories.len() as f64
            } else {
                categories
                    .iter()
                    .zip(alpha)
                    .map(|(c, a)| a * f(c))
                    .sum::<f64>()
            }
        };
        let score = weighted(|c| c.accuracy);
        let (subject, human) = match self.subjects.len() {
            1 => {
                let (s, h) = self.subjects.iter().next().unwrap();
                (s.clone(), *h)
            }
            _ => ("*".to_string(), self.subjects.values().all(|h| *h)),
        };
        Ok(MetricsReport {
            subject,
            human,
            schema_id: schema.schema_id.clone(),
            averaging: options.averaging,
            strict: options.strict,
            weights: alpha.to_vec(),
            score,
            accuracy: score,
            precision: weighted(|c| c.precision),
            recall: weighted(|c| c.recall),
            f1: weighted(|c| c.f1),
            exact_match_rate: ratio(self.exact, denominator),
            refusal_rate: ratio(self.refusals, self.records),
            unparseable_rate: ratio(self.unparseable, self.records),
            mean_latency_s: self.latency_sum / self.records as f64,
            categories,
            records: self.records,
            parsed: self.parsed,
            refusals: self.refusals,
            unparseable: self.unparseable,
            transport_failures: self.transport_failures,
        })
    }
}

/// Scores a record set. Records that failed in transport are counted but
/// otherwise ignored.
pub fn score<'a>(
    records: impl IntoIterator<Item = &'a EvaluationRecord>,
    schema: &AnnotationSchema,
    options: &ScoreOptions,
) -> Result<MetricsReport, MetricsError> {
    let mut tally = Tally::new(schema);
    for r in records {
        tally.add(r, schema)?;
    }
    tally.report(schema, options)
}

/// One report per model or evaluator, keyed by subject id.
pub fn score_by_subject(
    records: &[EvaluationRecord],
    schema: &AnnotationSchema,
    options: &ScoreOptions,
) -> Result<BTreeMap<String, MetricsReport>, MetricsError> {
    let mut tallies: BTreeMap<&str, Tally> = BTreeMap::new();
    for r in records {
        tallies
            .entry(r.subject())
            .or_insert_with(|| Tally::new(schema))
            .add(r, schema)?;
    }
    tallies
        .into_iter()
        .filter(|(_, t)| t.records > 0)
        .map(|(s, t)| Ok((s.to_string(), t.report(schema, options)?)))
        .collect()
}

/// The record's equal-weight category accuracy, or `None` when it does not
/// count (transport failure, or refusal/unparseable outside strict mode).
pub fn record_score(record: &EvaluationRecord, strict: bool) -> Option<f64> {
    if !record.completed() {
        return None;
    }
    match (&record.predicted.key, record.predicted.status) {
        (Some(key), ParseStatus::Parsed) => {
            let truth = record.truth.key.letters();
            let n = truth.len();
            if n == 0 || key.len() != n {
                return None;
            }
            let hits = key.letters().iter().zip(truth).filter(|(a, b)| a == b).count();
            Some(hits as f64 / n as f64)
        }
        _ if strict => Some(0.0),
        _ => None,
    }
}
