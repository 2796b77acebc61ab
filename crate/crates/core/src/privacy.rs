//! Record-level privacy proxies: exact overlap, nearest-neighbour Hamming
//! distances, near-match share and known-QI (k-map) linkage risk.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::fidelity::{check_same_schema, hamming};
use crate::table::{CategoricalTable, Code, AGE, SEX};

/// Nearest real neighbour of one synthetic row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearestNeighbor {
    /// `hamming / p`.
    pub normalized: f64,
    /// Number of differing columns.
    pub hamming: usize,
}

/// Fraction of synthetic rows identical to at least one real row.
pub fn exact_overlap(syn: &CategoricalTable, real: &CategoricalTable) -> Result<f64, MetricError> {
    check_same_schema(syn, real)?;
    if syn.is_empty() {
        return Err(MetricError::EmptySynthetic);
    }
    let real_rows: HashSet<&[Code]> = real.rows().collect();
    let hits = syn.rows().filter(|r| real_rows.contains(r)).count();
    Ok(hits as f64 / syn.n_rows() as f64)
}

/// Exact nearest-neighbour search, one entry per synthetic row in order.
pub fn nn_distances(syn: &CategoricalTable, real: &CategoricalTable) -> Result<Vec<NearestNeighbor>, MetricError> {
    check_same_schema(syn, real)?;
    if real.is_empty() {
        return Err(MetricError::EmptyReal);
    }
    let p = syn.n_columns();
    let real_rows: Vec<&[Code]> = real.rows().collect();
    let exact: HashSet<&[Code]> = real_rows.iter().copied().collect();
    Ok((0..syn.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = syn.row(i);
            let best = if exact.contains(x) {
                0
            } else {
                let mut best = p;
                for r in &real_rows {
                    best = best.min(hamming(x, r));
                    if best == 1 {
                        break;
                    }
                }
                best
            };
            NearestNeighbor {
                normalized: best as f64 / p as f64,
                hamming: best,
            }
        })
        .collect())
}

/// Linear-interpolation quantile of the sorted values at position
/// `q * (len - 1)`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(MetricError::InvalidQuantile(q));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Fraction of synthetic rows within `threshold` edits of some real row.
pub fn near_match_share(
    syn: &CategoricalTable,
    real: &CategoricalTable,
    threshold: usize,
) -> Result<f64, MetricError> {
    let nn = nn_distances(syn, real)?;
    if nn.is_empty() {
        return Err(MetricError::EmptySynthetic);
    }
    Ok(share_within(&nn, threshold))
}

pub(crate) fn share_within(nn: &[NearestNeighbor], threshold: usize) -> f64 {
    nn.iter().filter(|d| d.hamming <= threshold).count() as f64 / nn.len() as f64
}

/// Per-record and average known-QI linkage risk.
#[derive(Debug, Clone, PartialEq)]
pub struct KMapRisk {
    pub average: f64,
    pub per_record: Vec<f64>,
    /// Size of the real equivalence class of each synthetic record's QI pattern.
    pub class_sizes: Vec<usize>,
}

/// k-map risk: each synthetic record scores `1/k(q)` where `k(q)` counts real
/// rows sharing its QI pattern, or 0 when no real row does.
pub fn k_map_risk(
    syn: &CategoricalTable,
    real: &CategoricalTable,
    qi_columns: &[&str],
) -> Result<KMapRisk, MetricError> {
    check_same_schema(syn, real)?;
    let schema = syn.schema();
    let qi: Vec<usize> = qi_columns
        .iter()
        .map(|c| schema.column_index(c).map_err(|_| MetricError::UnknownColumn(c.to_string())))
        .collect::<Result<_, _>>()?;
    if syn.is_empty() {
        return Err(MetricError::EmptySynthetic);
    }
    let key = |row: &[Code]| -> Vec<Code> { qi.iter().map(|&j| row[j]).collect() };
    let mut classes: HashMap<Vec<Code>, usize> = HashMap::new();
    for row in real.rows() {
        *classes.entry(key(row)).or_default() += 1;
    }
    let class_sizes: Vec<usize> = syn
        .rows()
        .map(|row| classes.get(&key(row)).copied().unwrap_or(0))
        .collect();
    let per_record: Vec<f64> = class_sizes
        .iter()
        .map(|&k| if k > 0 { 1.0 / k as f64 } else { 0.0 })
        .collect();
    let average = per_record.iter().sum::<f64>() / per_record.len() as f64;
    Ok(KMapRisk {
        average,
        per_record,
        class_sizes,
    })
}

pub const DEFAULT_QI: [&str; 2] = [SEX, AGE];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub exact_overlap: f64,
    pub nn_q05_normalized: f64,
    pub nn_q05_hamming: f64,
    pub near_match_share_le1: f64,
    pub k_map_risk_avg: f64,
    #[serde(skip)]
    pub per_record_nn: Vec<NearestNeighbor>,
}

pub fn privacy_report(
    syn: &CategoricalTable,
    real: &CategoricalTable,
    qi_columns: &[&str],
) -> Result<PrivacyReport, MetricError> {
    let exact_overlap = exact_overlap(syn, real)?;
    let nn = nn_distances(syn, real)?;
    let raw: Vec<f64> = nn.iter().map(|d| d.hamming as f64).collect();
    let nn_q05_hamming = quantile(&raw, 0.05)?;
    let k_map = k_map_risk(syn, real, qi_columns)?;
    Ok(PrivacyReport {
        exact_overlap,
        nn_q05_normalized: nn_q05_hamming / syn.n_columns() as f64,
        nn_q05_hamming,
        near_match_share_le1: share_within(&nn, 1),
        k_map_risk_avg: k_map.average,
        per_record_nn: nn,
    })
}
