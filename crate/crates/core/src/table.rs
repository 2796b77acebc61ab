//! Schemas and tables for small-domain categorical questionnaire data.
//!
//! A [`DisorderSchema`] names one questionnaire: its Likert items, the
//! demographic columns that precede them, and the finite domain of every
//! column. A [`CategoricalTable`] stores rows as dense category codes into
//! those domains, so every metric downstream works on small integers rather
//! than strings.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

pub const SEX: &str = "sex";
pub const AGE: &str = "age";

/// Category code inside one column's domain.
pub type Code = u16;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("header does not match schema column order: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("data row {row}, column `{column}`: value `{value}` is not in the column domain")]
    OutOfDomainValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("data row {row}: missing value for column `{column}`")]
    MissingCell { row: usize, column: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("table is empty")]
    EmptyTable,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("row has {found} cells, schema has {expected} columns")]
    RowWidth { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("schema file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Sex,
    Age,
    Item,
}

/// One column of a schema with its ordered category tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub categories: Vec<String>,
}

impl ColumnSpec {
    pub fn code_of(&self, token: &str) -> Option<Code> {
        let token = token.trim();
        if let Some(i) = self.categories.iter().position(|c| c == token) {
            return Some(i as Code);
        }
        // numeric columns also accept float-formatted integers such as "3.0"
        if self.kind == ColumnKind::Sex {
            return None;
        }
        let value: f64 = token.parse().ok()?;
        if value.fract() != 0.0 || !value.is_finite() {
            return None;
        }
        let canonical = format!("{}", value as i64);
        self.categories
            .iter()
            .position(|c| *c == canonical)
            .map(|i| i as Code)
    }

    pub fn cardinality(&self) -> usize {
        self.categories.len()
    }
}

/// Description of one questionnaire table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct DisorderSchema {
    disorder_name: String,
    item_ids: Vec<String>,
    item_texts: Vec<String>,
    likert_domain: Vec<i64>,
    demographic_columns: Vec<String>,
    sex_domain: Vec<String>,
    age_domain: Vec<u32>,
    columns: Vec<ColumnSpec>,
}

/// On-disk JSON form of a schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaFile {
    pub disorder_name: String,
    pub item_ids: Vec<String>,
    #[serde(default = "default_likert")]
    pub likert_domain: Vec<i64>,
    #[serde(default = "default_sex_domain")]
    pub sex_domain: Vec<String>,
    #[serde(default = "default_age_domain")]
    pub age_domain: Vec<u32>,
    #[serde(default = "default_demographics")]
    pub demographic_columns: Vec<String>,
    /// Question wording per item id; items without an entry are presented by id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub item_texts: BTreeMap<String, String>,
}

fn default_likert() -> Vec<i64> {
    (0..=4).collect()
}

fn default_sex_domain() -> Vec<String> {
    vec!["female".into(), "male".into()]
}

fn default_age_domain() -> Vec<u32> {
    (18..=80).collect()
}

fn default_demographics() -> Vec<String> {
    vec![SEX.into(), AGE.into()]
}

impl TryFrom<SchemaFile> for DisorderSchema {
    type Error = TableError;

    fn try_from(file: SchemaFile) -> Result<Self, TableError> {
        let texts = file
            .item_ids
            .iter()
            .map(|id| file.item_texts.get(id).cloned().unwrap_or_else(|| id.clone()))
            .collect();
        for key in file.item_texts.keys() {
            if !file.item_ids.contains(key) {
                return Err(TableError::InvalidSchema(format!(
                    "item text given for unknown item `{key}`"
                )));
            }
        }
        Self::build(
            file.disorder_name,
            file.item_ids,
            texts,
            file.likert_domain,
            file.demographic_columns,
            file.sex_domain,
            file.age_domain,
        )
    }
}

impl From<DisorderSchema> for SchemaFile {
    fn from(s: DisorderSchema) -> Self {
        let item_texts = s
            .item_ids
            .iter()
            .zip(&s.item_texts)
            .filter(|(id, text)| id != text)
            .map(|(id, text)| (id.clone(), text.clone()))
            .collect();
        SchemaFile {
            disorder_name: s.disorder_name,
            item_ids: s.item_ids,
            likert_domain: s.likert_domain,
            sex_domain: s.sex_domain,
            age_domain: s.age_domain,
            demographic_columns: s.demographic_columns,
            item_texts,
        }
    }
}

fn check_unique<T: std::hash::Hash + Eq + std::fmt::Debug>(
    what: &str,
    values: &[T],
) -> Result<(), TableError> {
    let mut seen = HashSet::new();
    for v in values {
        if !seen.insert(v) {
            return Err(TableError::InvalidSchema(format!(
                "duplicate {what} {v:?}"
            )));
        }
    }
    Ok(())
}

impl DisorderSchema {
    /// Schema with the default Likert (0..=4), sex and age (18..=80) domains.
    pub fn new(disorder_name: impl Into<String>, item_ids: Vec<String>) -> Result<Self, TableError> {
        let texts = item_ids.clone();
        Self::build(
            disorder_name.into(),
            item_ids,
            texts,
            default_likert(),
            default_demographics(),
            default_sex_domain(),
            default_age_domain(),
        )
    }

    pub fn with_domains(
        disorder_name: impl Into<String>,
        item_ids: Vec<String>,
        likert_domain: Vec<i64>,
        sex_domain: Vec<String>,
        age_domain: Vec<u32>,
    ) -> Result<Self, TableError> {
        let texts = item_ids.clone();
        Self::build(
            disorder_name.into(),
            item_ids,
            texts,
            likert_domain,
            default_demographics(),
            sex_domain,
            age_domain,
        )
    }

    /// Replaces the question wording shown to the generator.
    pub fn with_item_texts(mut self, texts: Vec<String>) -> Result<Self, TableError> {
        if texts.len() != self.item_ids.len() {
            return Err(TableError::InvalidSchema(format!(
                "{} item texts for {} items",
                texts.len(),
                self.item_ids.len()
            )));
        }
        self.item_texts = texts;
        Ok(self)
    }

    fn build(
        disorder_name: String,
        item_ids: Vec<String>,
        item_texts: Vec<String>,
        likert_domain: Vec<i64>,
        demographic_columns: Vec<String>,
        sex_domain: Vec<String>,
        age_domain: Vec<u32>,
    ) -> Result<Self, TableError> {
        if disorder_name.trim().is_empty() {
            return Err(TableError::InvalidSchema("empty disorder name".into()));
        }
        if item_ids.is_empty() {
            return Err(TableError::InvalidSchema("no items".into()));
        }
        if item_ids.iter().any(|id| id.trim().is_empty()) {
            return Err(TableError::InvalidSchema("empty item id".into()));
        }
        check_unique("item id", &item_ids)?;
        if likert_domain.len() < 2 {
            return Err(TableError::InvalidSchema(
                "likert domain needs at least two categories".into(),
            ));
        }
        check_unique("likert category", &likert_domain)?;
        check_unique("demographic column", &demographic_columns)?;
        let mut columns = Vec::with_capacity(demographic_columns.len() + item_ids.len());
        for name in &demographic_columns {
            let spec = match name.as_str() {
                SEX => {
                    if sex_domain.is_empty() {
                        return Err(TableError::InvalidSchema("empty sex domain".into()));
                    }
                    check_unique("sex category", &sex_domain)?;
                    ColumnSpec {
                        name: SEX.into(),
                        kind: ColumnKind::Sex,
                        categories: sex_domain.clone(),
                    }
                }
                AGE => {
                    if age_domain.is_empty() {
                        return Err(TableError::InvalidSchema("empty age domain".into()));
                    }
                    check_unique("age", &age_domain)?;
                    ColumnSpec {
                        name: AGE.into(),
                        kind: ColumnKind::Age,
                        categories: age_domain.iter().map(|a| a.to_string()).collect(),
                    }
                }
                other => {
                    return Err(TableError::InvalidSchema(format!(
                        "unsupported demographic column `{other}` (expected sex or age)"
                    )))
                }
            };
            columns.push(spec);
        }
        let likert_tokens: Vec<String> = likert_domain.iter().map(|v| v.to_string()).collect();
        for id in &item_ids {
            if demographic_columns.contains(id) {
                return Err(TableError::InvalidSchema(format!(
                    "item id `{id}` collides with a demographic column"
                )));
            }
            columns.push(ColumnSpec {
                name: id.clone(),
                kind: ColumnKind::Item,
                categories: likert_tokens.clone(),
            });
        }
        if columns.iter().any(|c| c.categories.len() > Code::MAX as usize) {
            return Err(TableError::InvalidSchema("column domain too large".into()));
        }
        Ok(Self {
            disorder_name,
            item_ids,
            item_texts,
            likert_domain,
            demographic_columns,
            sex_domain,
            age_domain,
            columns,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TableError> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(file)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TableError> {
        let file = File::create(path)?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn disorder_name(&self) -> &str {
        &self.disorder_name
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn item_texts(&self) -> &[String] {
        &self.item_texts
    }

    pub fn likert_domain(&self) -> &[i64] {
        &self.likert_domain
    }

    pub fn sex_domain(&self) -> &[String] {
        &self.sex_domain
    }

    pub fn age_domain(&self) -> &[u32] {
        &self.age_domain
    }

    pub fn demographic_columns(&self) -> &[String] {
        &self.demographic_columns
    }

    /// All columns: demographics first, then items.
    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, TableError> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    /// Index of the first item column.
    pub fn first_item_column(&self) -> usize {
        self.demographic_columns.len()
    }

    pub fn likert_code(&self, score: i64) -> Option<Code> {
        self.likert_domain
            .iter()
            .position(|&v| v == score)
            .map(|i| i as Code)
    }
}

/// Rows of category codes conforming to a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalTable {
    schema: Arc<DisorderSchema>,
    cells: Vec<Code>,
    n_rows: usize,
}

impl CategoricalTable {
    /// Builds a table from rows of tokens, validating every cell.
    pub fn from_tokens<S: AsRef<str>>(
        schema: Arc<DisorderSchema>,
        rows: &[Vec<S>],
    ) -> Result<Self, TableError> {
        let p = schema.n_columns();
        let mut cells = Vec::with_capacity(rows.len() * p);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(TableError::RowWidth {
                    expected: p,
                    found: row.len(),
                });
            }
            for (spec, token) in schema.columns().iter().zip(row) {
                cells.push(encode_cell(spec, token.as_ref(), r + 1)?);
            }
        }
        Ok(Self {
            n_rows: rows.len(),
            schema,
            cells,
        })
    }

    /// Builds a table from rows of category codes.
    pub fn from_code_rows(
        schema: Arc<DisorderSchema>,
        rows: impl IntoIterator<Item = Vec<Code>>,
    ) -> Result<Self, TableError> {
        let p = schema.n_columns();
        let mut cells = Vec::new();
        let mut n_rows = 0;
        for row in rows {
            if row.len() != p {
                return Err(TableError::RowWidth {
                    expected: p,
                    found: row.len(),
                });
            }
            for (j, (&code, spec)) in row.iter().zip(schema.columns()).enumerate() {
                if code as usize >= spec.cardinality() {
                    return Err(TableError::OutOfDomainValue {
                        row: n_rows + 1,
                        column: schema.columns()[j].name.clone(),
                        value: code.to_string(),
                    });
                }
            }
            cells.extend_from_slice(&row);
            n_rows += 1;
        }
        Ok(Self {
            schema,
            cells,
            n_rows,
        })
    }

    pub fn schema(&self) -> &DisorderSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<DisorderSchema> {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.schema.n_columns()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn row(&self, i: usize) -> &[Code] {
        let p = self.n_columns();
        &self.cells[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[Code]> + '_ {
        self.cells.chunks_exact(self.n_columns().max(1)).take(self.n_rows)
    }

    pub fn column_codes(&self, j: usize) -> Vec<Code> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn token(&self, row: usize, col: usize) -> &str {
        &self.schema.columns()[col].categories[self.row(row)[col] as usize]
    }

    pub fn row_tokens(&self, row: usize) -> Vec<&str> {
        (0..self.n_columns()).map(|j| self.token(row, j)).collect()
    }

    /// Per-category counts for column `j`, indexed by code.
    pub fn column_counts(&self, j: usize) -> Vec<usize> {
        let mut counts = vec![0; self.schema.columns()[j].cardinality()];
        for r in self.rows() {
            counts[r[j] as usize] += 1;
        }
        counts
    }

    /// New table holding the given rows (repeats allowed) in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let p = self.n_columns();
        let mut cells = Vec::with_capacity(indices.len() * p);
        for &i in indices {
            cells.extend_from_slice(self.row(i));
        }
        Self {
            schema: Arc::clone(&self.schema),
            cells,
            n_rows: indices.len(),
        }
    }

    /// Appends the rows of `other`, which must share the schema.
    pub fn concat(&self, other: &Self) -> Result<Self, TableError> {
        if self.schema != other.schema {
            return Err(TableError::InvalidSchema("cannot concatenate tables with different schemas".into()));
        }
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        Ok(Self {
            schema: Arc::clone(&self.schema),
            cells,
            n_rows: self.n_rows + other.n_rows,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TableError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.column_names())?;
        for i in 0..self.n_rows {
            w.write_record(self.row_tokens(i))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TableError> {
        self.write_csv(File::create(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("tokens are UTF-8")
    }
}

fn encode_cell(spec: &ColumnSpec, token: &str, row: usize) -> Result<Code, TableError> {
    if token.trim().is_empty() {
        return Err(TableError::MissingCell {
            row,
            column: spec.name.clone(),
        });
    }
    spec.code_of(token).ok_or_else(|| TableError::OutOfDomainValue {
        row,
        column: spec.name.clone(),
        value: token.to_string(),
    })
}

/// Reads a CSV table whose header lists the schema columns in order.
pub fn read_table<R: Read>(reader: R, schema: Arc<DisorderSchema>) -> Result<CategoricalTable, TableError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected = schema.column_names();
    for name in &expected {
        if !header.iter().any(|h| h == name) {
            return Err(TableError::MissingColumn(name.to_string()));
        }
    }
    if header != expected {
        return Err(TableError::HeaderMismatch {
            expected: expected.join(","),
            found: header.join(","),
        });
    }
    let p = expected.len();
    let mut cells = Vec::new();
    let mut n_rows = 0;
    for record in rdr.records() {
        let record = record?;
        n_rows += 1;
        for (j, spec) in schema.columns().iter().enumerate() {
            let token = record.get(j).unwrap_or("");
            cells.push(encode_cell(spec, token, n_rows)?);
        }
        if record.len() > p {
            return Err(TableError::RowWidth {
                expected: p,
                found: record.len(),
            });
        }
    }
    Ok(CategoricalTable {
        schema,
        cells,
        n_rows,
    })
}

pub fn load_table(path: impl AsRef<Path>, schema: Arc<DisorderSchema>) -> Result<CategoricalTable, TableError> {
    read_table(File::open(path)?, schema)
}

/// Relative category frequencies of one column over the full domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalPmf {
    pub column: String,
    pub categories: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl EmpiricalPmf {
    /// PMF from raw counts. Panics if all counts are zero.
    pub fn from_counts(column: impl Into<String>, categories: Vec<String>, counts: &[usize]) -> Self {
        assert_eq!(categories.len(), counts.len());
        let total: usize = counts.iter().sum();
        assert!(total > 0, "PMF of zero observations");
        let probabilities = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self {
            column: column.into(),
            categories,
            probabilities,
        }
    }

    pub fn probability(&self, category: &str) -> Option<f64> {
        self.categories
            .iter()
            .position(|c| c == category)
            .map(|i| self.probabilities[i])
    }
}

pub fn empirical_pmf(table: &CategoricalTable, column: &str) -> Result<EmpiricalPmf, TableError> {
    let j = table.schema().column_index(column)?;
    if table.is_empty() {
        return Err(TableError::EmptyTable);
    }
    let spec = &table.schema().columns()[j];
    Ok(EmpiricalPmf::from_counts(
        column,
        spec.categories.clone(),
        &table.column_counts(j),
    ))
}

/// Train-set size for a stratum of `n` rows: round half up, then keep both
/// halves non-empty where the stratum allows it.
pub fn stratum_train_size(n: usize, train_fraction: f64) -> usize {
    let raw = (train_fraction * n as f64 + 0.5).floor() as usize;
    match n {
        0 => 0,
        1 => 1,
        _ => raw.clamp(1, n - 1),
    }
}

/// Splits rows into (train, tune), per stratum when a column is given.
///
/// Rows are shuffled inside each stratum with a seeded RNG; both outputs keep
/// the input's relative row order.
pub fn stratified_split(
    table: &CategoricalTable,
    train_fraction: f64,
    stratify_column: Option<&str>,
    seed: u64,
) -> Result<(CategoricalTable, CategoricalTable), TableError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(TableError::InvalidFraction(train_fraction));
    }
    if table.is_empty() {
        return Err(TableError::EmptyTable);
    }
    let strata: BTreeMap<Code, Vec<usize>> = match stratify_column {
        Some(name) => {
            let j = table.schema().column_index(name)?;
            let mut m: BTreeMap<Code, Vec<usize>> = BTreeMap::new();
            for (i, row) in table.rows().enumerate() {
                m.entry(row[j]).or_default().push(i);
            }
            m
        }
        None => BTreeMap::from([(0, (0..table.n_rows()).collect())]),
    };
    let mut in_train = vec![false; table.n_rows()];
    for (&key, members) in &strata {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut stream_rng(seed, key as u64));
        let k = stratum_train_size(shuffled.len(), train_fraction);
        for &i in &shuffled[..k] {
            in_train[i] = true;
        }
    }
    let (train, tune): (Vec<usize>, Vec<usize>) = (0..table.n_rows()).partition(|&i| in_train[i]);
    Ok((table.select_rows(&train), table.select_rows(&tune)))
}
