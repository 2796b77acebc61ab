//! Brute-force reference implementations on string tokens, kept independent
//! of the crate's coded tables, plus random table builders.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use kgsynth::{CategoricalTable, DisorderSchema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rows = Vec<Vec<String>>;

fn column(rows: &Rows, j: usize) -> Vec<&str> {
    rows.iter().map(|r| r[j].as_str()).collect()
}

fn distribution(values: &[&str]) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for v in values {
        *m.entry(v.to_string()).or_insert(0.0) += 1.0;
    }
    let n = values.len() as f64;
    m.values_mut().for_each(|c| *c /= n);
    m
}

fn entropy(probs: impl Iterator<Item = f64>) -> f64 {
    probs.filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
}

/// Jensen-Shannon divergence in bits via `H(M) - (H(P) + H(Q)) / 2`.
pub fn jsd(a: &[&str], b: &[&str]) -> f64 {
    let (p, q) = (distribution(a), distribution(b));
    let mut support: Vec<&String> = p.keys().chain(q.keys()).collect();
    support.sort();
    support.dedup();
    let pk = |m: &BTreeMap<String, f64>, k: &String| m.get(k).copied().unwrap_or(0.0);
    let h_m = entropy(support.iter().map(|k| (pk(&p, k) + pk(&q, k)) / 2.0));
    h_m - (entropy(p.values().copied()) + entropy(q.values().copied())) / 2.0
}

pub fn mean_jsd(real: &Rows, syn: &Rows) -> f64 {
    let p = real[0].len();
    (0..p).map(|j| jsd(&column(real, j), &column(syn, j))).sum::<f64>() / p as f64
}

/// Bias-corrected Cramér's V from an explicit contingency map.
pub fn cramers_v(a: &[&str], b: &[&str]) -> f64 {
    let n = a.len() as f64;
    let mut joint: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    let mut rows: BTreeMap<&str, f64> = BTreeMap::new();
    let mut cols: BTreeMap<&str, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0.0) += 1.0;
        *rows.entry(x).or_insert(0.0) += 1.0;
        *cols.entry(y).or_insert(0.0) += 1.0;
    }
    let (r, c) = (rows.len() as f64, cols.len() as f64);
    if r < 2.0 || c < 2.0 {
        return 0.0;
    }
    let mut chi2 = 0.0;
    for (x, nx) in &rows {
        for (y, ny) in &cols {
            let e = nx * ny / n;
            let o = joint.get(&(*x, *y)).copied().unwrap_or(0.0);
            chi2 += (o - e).powi(2) / e;
        }
    }
    let phi2 = (chi2 / n - (r - 1.0) * (c - 1.0) / (n - 1.0)).max(0.0);
    let rt = r - (r - 1.0).powi(2) / (n - 1.0);
    let ct = c - (c - 1.0).powi(2) / (n - 1.0);
    let d = (rt - 1.0).min(ct - 1.0);
    if d <= 0.0 {
        0.0
    } else {
        (phi2 / d).sqrt().min(1.0)
    }
}

pub fn mae_v(real: &Rows, syn: &Rows) -> f64 {
    let p = real[0].len();
    let mut total = 0.0;
    let mut pairs = 0;
    for j in 0..p {
        for k in j + 1..p {
            let vr = cramers_v(&column(real, j), &column(real, k));
            let vs = cramers_v(&column(syn, j), &column(syn, k));
            total += (vr - vs).abs();
            pairs += 1;
        }
    }
    total / pairs as f64
}

pub fn hamming(a: &[String], b: &[String]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Energy distance V-statistic with explicit double sums.
pub fn ed2(real: &Rows, syn: &Rows) -> f64 {
    let mean_dist = |xs: &Rows, ys: &Rows| {
        let mut s = 0.0;
        for x in xs {
            for y in ys {
                s += hamming(x, y) as f64;
            }
        }
        s / (xs.len() * ys.len()) as f64
    };
    2.0 * mean_dist(real, syn) - mean_dist(real, real) - mean_dist(syn, syn)
}

pub fn exact_overlap(syn: &Rows, real: &Rows) -> f64 {
    syn.iter().filter(|s| real.iter().any(|r| r == *s)).count() as f64 / syn.len() as f64
}

pub fn nn_hamming(syn: &Rows, real: &Rows) -> Vec<usize> {
    syn.iter()
        .map(|s| real.iter().map(|r| hamming(s, r)).min().unwrap())
        .collect()
}

/// Type-7 quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Per-record `1/k(q)` with `k(q)` the count of real rows sharing the QI.
pub fn k_map(syn: &Rows, real: &Rows, qi: &[usize]) -> Vec<f64> {
    syn.iter()
        .map(|s| {
            let k = real.iter().filter(|r| qi.iter().all(|&j| r[j] == s[j])).count();
            if k == 0 {
                0.0
            } else {
                1.0 / k as f64
            }
        })
        .collect()
}

/// A schema with small domains so random tables collide often.
pub fn small_schema(n_items: usize, likert_max: i64) -> Arc<DisorderSchema> {
    Arc::new(
        DisorderSchema::with_domains(
            "toy",
            (1..=n_items).map(|i| format!("it{i}")).collect(),
            (0..=likert_max).collect(),
            vec!["female".into(), "male".into()],
            (18..=21).collect(),
        )
        .unwrap(),
    )
}

pub fn random_rows(rng: &mut impl Rng, schema: &DisorderSchema, n: usize) -> Rows {
    (0..n)
        .map(|_| {
            schema
                .columns()
                .iter()
                .map(|c| c.categories[rng.random_range(0..c.categories.len())].clone())
                .collect()
        })
        .collect()
}

pub fn to_table(schema: &Arc<DisorderSchema>, rows: &Rows) -> CategoricalTable {
    CategoricalTable::from_tokens(Arc::clone(schema), rows).unwrap()
}

/// One random instance: p = 2 + items ≤ 6 columns, n, m ≤ 30 rows.
pub struct Instance {
    pub schema: Arc<DisorderSchema>,
    pub real_rows: Rows,
    pub syn_rows: Rows,
    pub real: CategoricalTable,
    pub syn: CategoricalTable,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = small_schema(rng.random_range(1..=4), rng.random_range(1..=4));
    let (n, m) = (rng.random_range(1..=30), rng.random_range(1..=30));
    let real_rows = random_rows(&mut rng, &schema, n);
    let mut syn_rows = random_rows(&mut rng, &schema, m);
    // plant some exact copies so overlap and k-map are exercised
    for s in syn_rows.iter_mut() {
        if rng.random_bool(0.2) {
            *s = real_rows[rng.random_range(0..n)].clone();
        }
    }
    Instance {
        real: to_table(&schema, &real_rows),
        syn: to_table(&schema, &syn_rows),
        schema,
        real_rows,
        syn_rows,
    }
}
