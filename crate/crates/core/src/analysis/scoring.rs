//! Likert scoring with exact integer arithmetic.
//!
//! Means are exact rationals rendered to four decimal places, rounding half
//! to even. Medians take the lower middle element for even counts.
//! Reverse-scored items fold as `min + max - v` for dimension and total
//! scores; per-item statistics describe the raw answers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::store::QueryStore;
use crate::contract::SurveyParameters;

/// Renders `num / den` with four decimals, ties to even. `den` must be > 0.
pub fn render_mean(num: i128, den: i128) -> String {
    assert!(den > 0, "mean of an empty set");
    let negative = num < 0;
    let scaled = num.unsigned_abs() * 10_000;
    let den = den as u128;
    let mut q = scaled / den;
    let r = scaled % den;
    if 2 * r > den || (2 * r == den && q % 2 == 1) {
        q += 1;
    }
    let sign = if negative && q != 0 { "-" } else { "" };
    format!("{sign}{}.{:04}", q / 10_000, q % 10_000)
}

fn lower_median(sorted: &[i64]) -> i64 {
    sorted[(sorted.len() - 1) / 2]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueCount {
    pub value: i64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemStats {
    pub item_id: String,
    pub dimension: String,
    pub reverse_scored: bool,
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub median: Option<i64>,
    /// One entry per scale point, ascending.
    pub distribution: Vec<ValueCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionStats {
    pub dimension: String,
    pub item_count: u64,
    /// Number of (response, item) values pooled.
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TotalStats {
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub median: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub responses: u64,
    pub items: Vec<ItemStats>,
    pub dimensions: Vec<DimensionStats>,
    pub total: TotalStats,
}

fn mean_of(values: &[i64]) -> Option<String> {
    if values.is_empty() {
        return None;
    }
    let sum: i128 = values.iter().map(|&v| v as i128).sum();
    Some(render_mean(sum, values.len() as i128))
}

fn median_of(values: &[i64]) -> Option<i64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    Some(lower_median(&sorted))
}

/// Scores every item, dimension and the per-response total. An empty store
/// still yields a summary with `n = 0` everywhere.
pub fn score(store: &QueryStore, params: &SurveyParameters) -> ScoreSummary {
    let mut items = Vec::with_capacity(params.items.len());
    let mut dims: BTreeMap<&str, (u64, Vec<i64>)> = BTreeMap::new();
    let mut totals: BTreeMap<usize, i64> = BTreeMap::new();

    for item in &params.items {
        let scale = params.scale_of(item);
        let raw = store.item_values(&item.item_id);
        let mut distribution: Vec<ValueCount> = (scale.min..=scale.max)
            .map(|value| ValueCount { value, count: 0 })
            .collect();
        for &(_, v) in &raw {
            distribution[(v - scale.min) as usize].count += 1;
        }
        let values: Vec<i64> = raw.iter().map(|&(_, v)| v).collect();
        items.push(ItemStats {
            item_id: item.item_id.clone(),
            dimension: item.dimension.clone(),
            reverse_scored: item.reverse_scored,
            n: values.len() as u64,
            mean: mean_of(&values),
            median: median_of(&values),
            distribution,
        });

        let dim = dims.entry(item.dimension.as_str()).or_default();
        dim.0 += 1;
        for &(resp, v) in &raw {
            let scored = if item.reverse_scored { scale.fold(v) } else { v };
            dim.1.push(scored);
            *totals.entry(resp).or_default() += scored;
        }
    }

    let dimensions = dims
        .into_iter()
        .map(|(name, (item_count, values))| DimensionStats {
            dimension: name.to_string(),
            item_count,
            n: values.len() as u64,
            mean: mean_of(&values),
        })
        .collect();

    let total_values: Vec<i64> = totals.into_values().collect();
    let total = TotalStats {
        n: total_values.len() as u64,
        mean: mean_of(&total_values),
        median: median_of(&total_values),
        min: total_values.iter().copied().min(),
        max: total_values.iter().copied().max(),
    };

    ScoreSummary {
        responses: store.response_count() as u64,
        items,
        dimensions,
        total,
    }
}
