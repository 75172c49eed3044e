//! Scoring of evaluation records: per-category accuracy and F1, the
//! weighted composite score, refusal rates, one-way ANOVA sensitivity per
//! configuration dimension and comparison tables.
//!
//! Refusals and unparseable answers are reported as rates and left out of
//! the accuracy denominators unless [`ScoreOptions::strict`] is set.

mod score;
mod sensitivity;
pub mod stats;
mod tables;

pub use score::{
    record_score, score, score_by_subject, Averaging, CategoryReport, ConfusionMatrix,
    MetricsError, MetricsReport, OptionScores, ScoreOptions, Tally,
};
pub use sensitivity::{
    box_summaries, box_summary, family_stats, group_scores, sensitivity, BoxSummary, FamilyStats,
    GroupStats, SensitivityReport,
};
pub use stats::{one_way_anova, Anova};
pub use tables::{
    build_report, phase_for, render_sensitivity, render_tables, table_columns, DimensionReport,
    FullReport, TableRow, Tables,
};
