use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::protocol::{Dimension, EvaluationRecord};

use super::score::{record_score, MetricsError};
use super::stats::{mean_and_sigma, one_way_anova, quantile, Anova};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub value: String,
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub dimension: Dimension,
    pub groups: Vec<GroupStats>,
    pub anova: Anova,
}

/// Per-record scores grouped by the value `dimension` takes, in the
/// dimension's natural order.
pub fn group_scores(records: &[EvaluationRecord], dimension: Dimension, strict: bool) -> Vec<(String, Vec<f64>)> {
    let mut groups: BTreeMap<((u32, u32), String), Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(s) = record_score(r, strict) {
            groups
                .entry((dimension.order_key(&r.config), dimension.value_of(&r.config)))
                .or_default()
                .push(s);
        }
    }
    groups.into_iter().map(|((_, label), v)| (label, v)).collect()
}

/// One-way ANOVA of per-record scores across the values of `dimension`.
pub fn sensitivity(
    records: &[EvaluationRecord],
    dimension: Dimension,
    strict: bool,
) -> Result<SensitivityReport, MetricsError> {
    let grouped = group_scores(records, dimension, strict);
    let usable = grouped.iter().filter(|(_, v)| v.len() >= 2).count();
    if grouped.len() < 2 || usable < grouped.len() {
        let sizes: Vec<String> = grouped.iter().map(|(l, v)| format!("{l}: {}", v.len())).collect();
        return Err(MetricsError::InsufficientGroups(if sizes.is_empty() {
            "none".into()
        } else {
            sizes.join(", ")
        }));
    }
    let values: Vec<Vec<f64>> = grouped.iter().map(|(_, v)| v.clone()).collect();
    let anova = one_way_anova(&values).ok_or_else(|| MetricsError::InsufficientGroups(grouped.len().to_string()))?;
    let groups = grouped
        .into_iter()
        .map(|(value, v)| {
            let (mean, sigma) = mean_and_sigma(&v);
            GroupStats {
                value,
                n: v.len(),
                mean,
                sigma,
            }
        })
        .collect();
    Ok(SensitivityReport {
        dimension,
        groups,
        anova,
    })
}

/// Plot-ready box statistics for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub label: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Most extreme observations within 1.5·IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn box_summary(label: impl Into<String>, values: &[f64]) -> Option<BoxSummary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
    Some(BoxSummary {
        label: label.into(),
        n: v.len(),
        min: v[0],
        q1,
        median: quantile(&v, 0.5),
        q3,
        max: v[v.len() - 1],
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: v.iter().copied().filter(|x| !(lo..=hi).contains(x)).collect(),
    })
}

/// Box statistics of per-record scores for each value of `dimension`.
pub fn box_summaries(records: &[EvaluationRecord], dimension: Dimension, strict: bool) -> Vec<BoxSummary> {
    group_scores(records, dimension, strict)
        .into_iter()
        .filter_map(|(label, v)| box_summary(label, &v))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyStats {
    pub family: String,
    pub models: Vec<String>,
    pub mean: f64,
    /// Population standard deviation of the members' accuracies.
    pub sigma: f64,
}

/// Mean and σ of per-model accuracy within each family, best family first.
/// Models missing from `families` fall into `"other"`.
pub fn family_stats(
    accuracies: &BTreeMap<String, f64>,
    families: &BTreeMap<String, String>,
) -> Vec<FamilyStats> {
    let mut grouped: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for (model, acc) in accuracies {
        let family = families.get(model).cloned().unwrap_or_else(|| "other".into());
        grouped.entry(family).or_default().push((model.clone(), *acc));
    }
    let mut out: Vec<FamilyStats> = grouped
        .into_iter()
        .map(|(family, members)| {
            let values: Vec<f64> = members.iter().map(|(_, a)| *a).collect();
            let (mean, sigma) = mean_and_sigma(&values);
            FamilyStats {
                family,
                models: members.into_iter().map(|(m, _)| m).collect(),
                mean,
                sigma,
            }
        })
        .collect();
    out.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.family.cmp(&b.family)));
    out
}
