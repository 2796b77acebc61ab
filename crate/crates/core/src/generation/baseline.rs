//! Chance-level reference table.

use rand::Rng;

use crate::rng::stream_rng;
use crate::table::{CategoricalTable, ColumnKind, TableError};

/// Random table with the real table's row count: demographics drawn i.i.d.
/// from their empirical PMFs in `real`, items uniform over the Likert domain.
pub fn random_baseline(real: &CategoricalTable, seed: u64) -> Result<CategoricalTable, TableError> {
    if real.is_empty() {
        return Err(TableError::EmptyTable);
    }
    let n = real.n_rows();
    let columns = real.schema().columns();
    let mut rng = stream_rng(seed, 0);
    let mut rows = vec![Vec::with_capacity(columns.len()); n];
    for (j, spec) in columns.iter().enumerate() {
        for row in rows.iter_mut() {
            let code = match spec.kind {
                // a uniformly chosen real row carries the column's empirical PMF
                ColumnKind::Sex | ColumnKind::Age => real.row(rng.random_range(0..n))[j],
                ColumnKind::Item => rng.random_range(0..spec.cardinality()) as u16,
            };
            row.push(code);
        }
    }
    CategoricalTable::from_code_rows(real.schema_arc().clone(), rows)
}
