//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use codewe_core::analysis::{DimensionStats, ItemStats, ScoreSummary, TotalStats, ValueCount};
use codewe_core::{Digest, ResponseSet, SurveyParameters};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Signed;
use sha2::{Digest as _, Sha256};

/// Four decimals, ties to even, computed over arbitrary-precision rationals.
pub fn render_half_even(x: &BigRational) -> String {
    let scaled = x * BigRational::from_integer(BigInt::from(10_000));
    let floor = scaled.floor();
    let frac = &scaled - &floor;
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let mut q = floor.to_integer();
    if frac > half || (frac == half && q.is_odd()) {
        q += 1;
    }
    let neg = q.is_negative();
    let abs = q.abs();
    let (int, dec) = abs.div_rem(&BigInt::from(10_000));
    let dec: u32 = dec.try_into().unwrap();
    let sign = if neg { "-" } else { "" };
    format!("{sign}{int}.{dec:04}")
}

fn mean(values: &[i64]) -> Option<String> {
    if values.is_empty() {
        return None;
    }
    let sum: BigInt = values.iter().map(|&v| BigInt::from(v)).sum();
    Some(render_half_even(&BigRational::new(sum, BigInt::from(values.len()))))
}

fn lower_median(values: &[i64]) -> Option<i64> {
    let mut v = values.to_vec();
    v.sort();
    if v.is_empty() {
        None
    } else {
        Some(v[(v.len() - 1) / 2])
    }
}

/// Naive recomputation straight from the response sets.
pub fn naive_score(params: &SurveyParameters, responses: &[ResponseSet]) -> ScoreSummary {
    let mut items = Vec::new();
    let mut dim_values: BTreeMap<String, Vec<i64>> = BTreeMap::new();
    let mut dim_items: BTreeMap<String, u64> = BTreeMap::new();
    for item in &params.items {
        let scale = &params.scales[&item.scale_ref];
        let raw: Vec<i64> = responses.iter().map(|r| r.answers[&item.item_id]).collect();
        let distribution = (scale.min..=scale.max)
            .map(|value| ValueCount {
                value,
                count: raw.iter().filter(|&&v| v == value).count() as u64,
            })
            .collect();
        items.push(ItemStats {
            item_id: item.item_id.clone(),
            dimension: item.dimension.clone(),
            reverse_scored: item.reverse_scored,
            n: raw.len() as u64,
            mean: mean(&raw),
            median: lower_median(&raw),
            distribution,
        });
        *dim_items.entry(item.dimension.clone()).or_default() += 1;
        let folded = raw
            .iter()
            .map(|&v| if item.reverse_scored { scale.min + scale.max - v } else { v });
        dim_values.entry(item.dimension.clone()).or_default().extend(folded);
    }
    let dimensions = dim_values
        .into_iter()
        .map(|(d, v)| DimensionStats {
            item_count: dim_items[&d],
            dimension: d,
            n: v.len() as u64,
            mean: mean(&v),
        })
        .collect();
    let totals: Vec<i64> = responses
        .iter()
        .map(|r| {
            params
                .items
                .iter()
                .map(|i| {
                    let s = &params.scales[&i.scale_ref];
                    let v = r.answers[&i.item_id];
                    if i.reverse_scored {
                        s.min + s.max - v
                    } else {
                        v
                    }
                })
                .sum()
        })
        .collect();
    ScoreSummary {
        responses: responses.len() as u64,
        items,
        dimensions,
        total: TotalStats {
            n: totals.len() as u64,
            mean: mean(&totals),
            median: lower_median(&totals),
            min: totals.iter().copied().min(),
            max: totals.iter().copied().max(),
        },
    }
}

fn sha(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Merkle root by the recursive definition, hashing with sha2 directly.
pub fn reference_root(leaves: &[Digest]) -> [u8; 32] {
    match leaves.len() {
        0 => sha(&[b""]),
        1 => sha(&[&[0u8], leaves[0].as_bytes()]),
        n => {
            let mut k = 1;
            while k * 2 < n {
                k *= 2;
            }
            sha(&[&[1u8], &reference_root(&leaves[..k]), &reference_root(&leaves[k..])])
        }
    }
}

#[test]
fn oracle_rendering_sanity() {
    let r = |n: i64, d: i64| render_half_even(&BigRational::new(n.into(), d.into()));
    assert_eq!(r(1, 3), "0.3333");
    assert_eq!(r(1, 20_000), "0.0000");
    assert_eq!(r(3, 20_000), "0.0002");
    assert_eq!(r(-3, 20_000), "-0.0002");
    assert_eq!(r(-1, 20_000), "0.0000");
    assert_eq!(r(5, 1), "5.0000");
}
