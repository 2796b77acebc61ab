//! Fidelity of a synthetic table to a real one at three levels: univariate
//! marginals (Jensen-Shannon divergence), pairwise association
//! (bias-corrected Cramér's V) and joint structure (energy distance under
//! Hamming distance).

use std::collections::HashMap;
use std::hash::Hash;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::table::{CategoricalTable, Code, EmpiricalPmf};

pub(crate) fn check_same_schema(a: &CategoricalTable, b: &CategoricalTable) -> Result<(), MetricError> {
    if a.schema() != b.schema() {
        return Err(MetricError::SchemaMismatch);
    }
    Ok(())
}

fn kl_to_mixture(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &mi)| pi * (pi / mi).log2())
        .sum()
}

/// Base-2 Jensen-Shannon divergence of two probability vectors over the
/// same categories.
pub fn jsd_probabilities(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let value = 0.5 * kl_to_mixture(p, &m) + 0.5 * kl_to_mixture(q, &m);
    value.clamp(0.0, 1.0)
}

/// Base-2 Jensen-Shannon divergence, in `[0, 1]`.
pub fn jsd(p: &EmpiricalPmf, q: &EmpiricalPmf) -> Result<f64, MetricError> {
    if p.categories != q.categories {
        return Err(MetricError::DomainMismatch);
    }
    Ok(jsd_probabilities(&p.probabilities, &q.probabilities))
}

fn column_probabilities(table: &CategoricalTable, j: usize) -> Vec<f64> {
    let n = table.n_rows() as f64;
    table.column_counts(j).into_iter().map(|c| c as f64 / n).collect()
}

/// JSD of every column, keyed by column name in schema order.
pub fn per_column_jsd(
    real: &CategoricalTable,
    syn: &CategoricalTable,
) -> Result<IndexMap<String, f64>, MetricError> {
    check_same_schema(real, syn)?;
    if real.is_empty() || syn.is_empty() {
        return Err(MetricError::EmptyTable);
    }
    Ok(real
        .schema()
        .columns()
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let value = jsd_probabilities(&column_probabilities(real, j), &column_probabilities(syn, j));
            (spec.name.clone(), value)
        })
        .collect())
}

/// Mean JSD over all columns, demographics included.
pub fn mean_jsd(real: &CategoricalTable, syn: &CategoricalTable) -> Result<f64, MetricError> {
    let per = per_column_jsd(real, syn)?;
    Ok(per.values().sum::<f64>() / per.len() as f64)
}

/// Bias-corrected Cramér's V from a dense contingency table.
fn cramers_v_from_counts(counts: &[usize], n_a: usize, n_b: usize, n: usize) -> f64 {
    let row_sums: Vec<usize> = (0..n_a).map(|i| counts[i * n_b..(i + 1) * n_b].iter().sum()).collect();
    let col_sums: Vec<usize> = (0..n_b).map(|j| (0..n_a).map(|i| counts[i * n_b + j]).sum()).collect();
    let r = row_sums.iter().filter(|&&s| s > 0).count();
    let c = col_sums.iter().filter(|&&s| s > 0).count();
    if r < 2 || c < 2 || n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mut chi2 = 0.0;
    for i in 0..n_a {
        if row_sums[i] == 0 {
            continue;
        }
        for j in 0..n_b {
            if col_sums[j] == 0 {
                continue;
            }
            let expected = row_sums[i] as f64 * col_sums[j] as f64 / nf;
            let diff = counts[i * n_b + j] as f64 - expected;
            chi2 += diff * diff / expected;
        }
    }
    let (rf, cf) = (r as f64, c as f64);
    let phi2 = chi2 / nf;
    let phi2_corr = (phi2 - (rf - 1.0) * (cf - 1.0) / (nf - 1.0)).max(0.0);
    let r_corr = rf - (rf - 1.0).powi(2) / (nf - 1.0);
    let c_corr = cf - (cf - 1.0).powi(2) / (nf - 1.0);
    let denom = (r_corr - 1.0).min(c_corr - 1.0);
    if denom <= 0.0 {
        return 0.0;
    }
    (phi2_corr / denom).sqrt().clamp(0.0, 1.0)
}

/// Bias-corrected Cramér's V between two aligned value lists.
///
/// Rows and columns of the contingency table are the observed distinct
/// values. Constant inputs give 0.
pub fn cramers_v_bias_corrected<A, B>(a: &[A], b: &[B]) -> Result<f64, MetricError>
where
    A: Eq + Hash,
    B: Eq + Hash,
{
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    fn encode<T: Eq + Hash>(values: &[T]) -> (Vec<usize>, usize) {
        let mut ids: HashMap<&T, usize> = HashMap::new();
        let codes = values
            .iter()
            .map(|v| {
                let next = ids.len();
                *ids.entry(v).or_insert(next)
            })
            .collect();
        (codes, ids.len())
    }
    let (ca, na) = encode(a);
    let (cb, nb) = encode(b);
    let mut counts = vec![0usize; na * nb];
    for (&x, &y) in ca.iter().zip(&cb) {
        counts[x * nb + y] += 1;
    }
    Ok(cramers_v_from_counts(&counts, na, nb, a.len()))
}

fn cramers_v_columns(table: &CategoricalTable, j: usize, k: usize) -> f64 {
    let specs = table.schema().columns();
    let (na, nb) = (specs[j].cardinality(), specs[k].cardinality());
    let mut counts = vec![0usize; na * nb];
    for row in table.rows() {
        counts[row[j] as usize * nb + row[k] as usize] += 1;
    }
    cramers_v_from_counts(&counts, na, nb, table.n_rows())
}

/// Association of one unordered column pair in both tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairAssociation {
    pub v_real: f64,
    pub v_syn: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaeV {
    /// Mean absolute difference of pairwise V; lower is better.
    pub error: f64,
    /// `1 - error`.
    pub complement: f64,
    pub per_pair: IndexMap<String, PairAssociation>,
}

fn column_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|j| (j + 1..p).map(move |k| (j, k))).collect()
}

pub fn pair_key(a: &str, b: &str) -> String {
    format!("{a},{b}")
}

/// Mean absolute error of bias-corrected Cramér's V over all column pairs.
pub fn mae_v(real: &CategoricalTable, syn: &CategoricalTable) -> Result<MaeV, MetricError> {
    check_same_schema(real, syn)?;
    let p = real.n_columns();
    if p < 2 {
        return Err(MetricError::TooFewColumns(p));
    }
    if real.is_empty() || syn.is_empty() {
        return Err(MetricError::EmptyTable);
    }
    let pairs = column_pairs(p);
    let values: Vec<PairAssociation> = pairs
        .par_iter()
        .map(|&(j, k)| PairAssociation {
            v_real: cramers_v_columns(real, j, k),
            v_syn: cramers_v_columns(syn, j, k),
        })
        .collect();
    // sequential sum keeps the floating-point result schedule independent
    let total: f64 = values.iter().map(|v| (v.v_real - v.v_syn).abs()).sum();
    let error = total / pairs.len() as f64;
    let names = real.schema().column_names();
    let per_pair = pairs
        .iter()
        .zip(values)
        .map(|(&(j, k), v)| (pair_key(names[j], names[k]), v))
        .collect();
    Ok(MaeV {
        error,
        complement: 1.0 - error,
        per_pair,
    })
}

/// Squared energy distance (V-statistic) under Hamming distance over all
/// columns.
///
/// Hamming distance is a sum of per-column mismatch indicators, so the three
/// double sums factor per column into category counts and the statistic
/// equals `sum_j ||pi_real_j - pi_syn_j||^2`.
pub fn energy_distance_sq(real: &CategoricalTable, syn: &CategoricalTable) -> Result<f64, MetricError> {
    check_same_schema(real, syn)?;
    if real.is_empty() || syn.is_empty() {
        return Err(MetricError::EmptyTable);
    }
    let value: f64 = (0..real.n_columns())
        .map(|j| {
            let p = column_probabilities(real, j);
            let q = column_probabilities(syn, j);
            p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum();
    Ok(value)
}

/// Hamming distance between two coded rows.
pub fn hamming(a: &[Code], b: &[Code]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub mean_jsd: f64,
    pub per_column_jsd: IndexMap<String, f64>,
    pub mae_v_error: f64,
    pub mae_v_complement: f64,
    pub energy_distance_sq: f64,
    pub per_pair_v: IndexMap<String, PairAssociation>,
}

pub fn fidelity_report(real: &CategoricalTable, syn: &CategoricalTable) -> Result<FidelityReport, MetricError> {
    let per_column_jsd = per_column_jsd(real, syn)?;
    let mean_jsd = per_column_jsd.values().sum::<f64>() / per_column_jsd.len() as f64;
    let mae = mae_v(real, syn)?;
    Ok(FidelityReport {
        mean_jsd,
        per_column_jsd,
        mae_v_error: mae.error,
        mae_v_complement: mae.complement,
        energy_distance_sq: energy_distance_sq(real, syn)?,
        per_pair_v: mae.per_pair,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::DisorderSchema;
    use std::sync::Arc;

    fn pmf(probs: &[f64]) -> EmpiricalPmf {
        EmpiricalPmf {
            column: "it1".into(),
            categories: (0..probs.len()).map(|i| i.to_string()).collect(),
            probabilities: probs.to_vec(),
        }
    }

    #[test]
    fn jsd_fixed_points() {
        let p = pmf(&[0.2, 0.3, 0.1, 0.4, 0.0]);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        let a = pmf(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        let b = pmf(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((jsd(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jsd_half_mass_against_point_mass() {
        // hand evaluation: 0.5 * (0.20751875 + 0.41503750)
        let p = pmf(&[0.5, 0.0, 0.0, 0.0, 0.5]);
        let q = pmf(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((jsd(&p, &q).unwrap() - 0.311278).abs() < 1e-6);
    }

    #[test]
    fn jsd_domain_mismatch() {
        assert_eq!(jsd(&pmf(&[1.0, 0.0]), &pmf(&[1.0, 0.0, 0.0])), Err(MetricError::DomainMismatch));
    }

    #[test]
    fn cramers_v_self_association_is_one() {
        let a: Vec<u8> = (0..1000).map(|i| (i % 3) as u8).collect();
        let v = cramers_v_bias_corrected(&a, &a).unwrap();
        assert!(v <= 1.0 && (1.0 - v) < 1e-9, "{v}");
    }

    #[test]
    fn cramers_v_constant_column_is_zero() {
        let a = vec![1; 50];
        let b: Vec<i32> = (0..50).map(|i| i % 4).collect();
        assert_eq!(cramers_v_bias_corrected(&a, &b).unwrap(), 0.0);
        assert_eq!(cramers_v_bias_corrected(&b, &a).unwrap(), 0.0);
    }

    #[test]
    fn cramers_v_errors() {
        assert_eq!(cramers_v_bias_corrected(&[1, 2], &[1]), Err(MetricError::LengthMismatch(2, 1)));
        assert_eq!(cramers_v_bias_corrected::<i32, i32>(&[], &[]), Err(MetricError::EmptyInput));
    }

    #[test]
    fn cramers_v_independent_uniform_columns_near_zero() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(2024, 0);
        let a: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..5)).collect();
        let b: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..5)).collect();
        assert!(cramers_v_bias_corrected(&a, &b).unwrap() < 0.05);
    }

    fn table(rows: &[[&str; 4]]) -> CategoricalTable {
        let schema = Arc::new(DisorderSchema::new("t", vec!["a".into(), "b".into()]).unwrap());
        let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
        CategoricalTable::from_tokens(schema, &rows).unwrap()
    }

    #[test]
    fn energy_distance_of_disjoint_singletons_is_two_p() {
        let x = table(&[["female", "20", "0", "0"]]);
        let y = table(&[["male", "21", "1", "1"]]);
        assert_eq!(energy_distance_sq(&x, &y).unwrap(), 8.0);
    }

    #[test]
    fn identical_tables_score_zero() {
        let x = table(&[["female", "20", "0", "1"], ["male", "30", "2", "2"], ["male", "30", "4", "0"]]);
        let y = x.select_rows(&[2, 0, 1]);
        let report = fidelity_report(&x, &y).unwrap();
        assert_eq!(report.mean_jsd, 0.0);
        assert_eq!(report.mae_v_error, 0.0);
        assert_eq!(report.mae_v_complement, 1.0);
        assert_eq!(report.energy_distance_sq, 0.0);
        assert_eq!(report.per_pair_v.len(), 6);
    }

    #[test]
    fn mae_v_needs_two_columns() {
        let schema = Arc::new(
            DisorderSchema::new("t", vec!["a".into()])
                .map(|s| {
                    let mut f: crate::table::SchemaFile = s.into();
                    f.demographic_columns.clear();
                    DisorderSchema::try_from(f).unwrap()
                })
                .unwrap(),
        );
        let t = CategoricalTable::from_tokens(schema, &[vec!["1"]]).unwrap();
        assert_eq!(mae_v(&t, &t).unwrap_err(), MetricError::TooFewColumns(1));
    }

    #[test]
    fn report_json_field_names() {
        let x = table(&[["female", "20", "0", "1"], ["male", "30", "2", "2"]]);
        let json = serde_json::to_value(fidelity_report(&x, &x).unwrap()).unwrap();
        let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        keys.sort();
        assert_eq!(
            keys,
            ["energy_distance_sq", "mae_v_complement", "mae_v_error", "mean_jsd", "per_column_jsd", "per_pair_v"]
        );
    }
}
