use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::protocol::{Dimension, EvaluationRecord};
use crate::scene::AnnotationSchema;

use super::score::{score_by_subject, MetricsError, MetricsReport, ScoreOptions};
use super::sensitivity::{box_summaries, family_stats, sensitivity, BoxSummary, FamilyStats, SensitivityReport};

/// One row of the model comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub subject: String,
    pub human: bool,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub category_f1: Vec<f64>,
    pub mean_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl Tables {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",");
        out.push('\n');
        for r in &self.rows {
            let mut fields = vec![
                csv_field(&r.subject),
                format!("{:.4}", r.accuracy),
                format!("{:.4}", r.precision),
                format!("{:.4}", r.recall),
                format!("{:.4}", r.f1),
            ];
            fields.extend(r.category_f1.iter().map(|f| format!("{f:.4}")));
            fields.push(format!("{:.3}", r.mean_latency_s));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Fixed-width text table with percentages.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut c = vec![
                    if r.human {
                        format!("{} (human)", r.subject)
                    } else {
                        r.subject.clone()
                    },
                    pct(r.accuracy),
                    pct(r.precision),
                    pct(r.recall),
                    pct(r.f1),
                ];
                c.extend(r.category_f1.iter().map(|f| pct(*f)));
                c.push(format!("{:.2}", r.mean_latency_s));
                c
            })
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, h)| {
                cells
                    .iter()
                    .map(|row| row[i].chars().count())
                    .chain([h.chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |row: &[String]| {
            row.iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(&self.columns);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1)));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Column names: subject, four overall metrics, one F1 per category, mean
/// query time.
pub fn table_columns(schema: &AnnotationSchema) -> Vec<String> {
    let mut cols: Vec<String> = ["Model", "Acc", "Prec", "Rec", "F1"].map(String::from).to_vec();
    cols.extend(schema.categories().iter().map(|c| format!("F1 {}", c.name)));
    cols.push("Avg Query Time (s)".into());
    cols
}

/// Comparison table, best accuracy first.
pub fn render_tables(reports: &[MetricsReport], schema: &AnnotationSchema) -> Tables {
    let mut rows: Vec<TableRow> = reports
        .iter()
        .map(|r| TableRow {
            subject: r.subject.clone(),
            human: r.human,
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            category_f1: r.categories.iter().map(|c| c.f1).collect(),
            mean_latency_s: r.mean_latency_s,
        })
        .collect();
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then_with(|| a.subject.cmp(&b.subject)));
    Tables {
        columns: table_columns(schema),
        rows,
    }
}

/// Sensitivity of one subject to one dimension, with its box plot data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub subject: String,
    pub dimension: Dimension,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
    pub boxes: Vec<BoxSummary>,
}

/// Everything the `report` command writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub schema_id: String,
    pub options: ScoreOptions,
    pub subjects: Vec<MetricsReport>,
    pub table: Tables,
    pub dimensions: Vec<DimensionReport>,
    pub families: Vec<FamilyStats>,
}

/// Per-subject metrics, the comparison table, per-dimension sensitivity for
/// every subject and family statistics. Sensitivity is computed per phase
/// where records carry a phase tag, so each dimension is tested on the
/// phase that varies it.
pub fn build_report(
    records: &[EvaluationRecord],
    schema: &AnnotationSchema,
    options: &ScoreOptions,
    families: &BTreeMap<String, String>,
    dimensions: &[Dimension],
) -> Result<FullReport, MetricsError> {
    let by_subject = score_by_subject(records, schema, options)?;
    let subjects: Vec<MetricsReport> = by_subject.values().cloned().collect();
    let table = render_tables(&subjects, schema);

    let mut dims = Vec::new();
    for subject in by_subject.keys() {
        let mine: Vec<EvaluationRecord> = records.iter().filter(|r| r.subject() == subject).cloned().collect();
        for &d in dimensions {
            let phase = phase_for(d);
            let tagged: Vec<EvaluationRecord> = mine.iter().filter(|r| r.phase == Some(phase)).cloned().collect();
            let pool = if tagged.is_empty() { &mine } else { &tagged };
            let (sensitivity, unavailable) = match sensitivity(pool, d, options.strict) {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            dims.push(DimensionReport {
                subject: subject.clone(),
                dimension: d,
                sensitivity,
                unavailable,
                boxes: box_summaries(pool, d, options.strict),
            });
        }
    }

    let accuracies: BTreeMap<String, f64> = subjects
        .iter()
        .filter(|r| !r.human)
        .map(|r| (r.subject.clone(), r.accuracy))
        .collect();
    Ok(FullReport {
        schema_id: schema.schema_id.clone(),
        options: options.clone(),
        subjects,
        table,
        dimensions: dims,
        families: family_stats(&accuracies, families),
    })
}

/// The standard phase that varies `d`.
pub fn phase_for(d: Dimension) -> u8 {
    match d {
        Dimension::Resolution => 1,
        Dimension::Frames => 2,
        Dimension::Interval => 3,
        Dimension::Grid => 4,
        Dimension::Mode => 5,
    }
}

/// Human-readable sensitivity summary.
pub fn render_sensitivity(report: &SensitivityReport) -> String {
    let mut out = String::new();
    let a = &report.anova;
    let _ = writeln!(
        out,
        "{}: F({}, {}) = {:.3}, p = {:.3e}, eta^2 = {:.3}",
        report.dimension, a.df_between, a.df_within, a.f, a.p, a.eta_squared
    );
    for g in &report.groups {
        let _ = writeln!(out, "  {:<10} n={:<4} mean={:.3} sigma={:.3}", g.value, g.n, g.mean, g.sigma);
    }
    out
}
