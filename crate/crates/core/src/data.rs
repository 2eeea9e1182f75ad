//! Schemas, validated categorical data tables and stratified contingency
//! counts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{CausalDag, Variable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataError {
    #[error("variable `{0}` is declared twice in the schema")]
    DuplicateVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` plays more than one role (x, y, conditioning set)")]
    OverlappingRoles(String),
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("row {row}, column `{column}`: `{value}` is not a declared level")]
    UnknownLevel { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: missing value")]
    MissingCell { row: usize, column: String },
    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("column {column} has {found} rows, expected {expected}")]
    ColumnLength {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("level index {index} out of range for `{column}`")]
    LevelIndex { column: String, index: usize },
}

/// Ordered variable definitions shared by every row of a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    variables: Vec<Variable>,
    index: BTreeMap<String, usize>,
}

impl Schema {
    pub fn new(variables: Vec<Variable>) -> Result<Self, DataError> {
        let mut index = BTreeMap::new();
        for (i, v) in variables.iter().enumerate() {
            if index.insert(v.name().to_string(), i).is_some() {
                return Err(DataError::DuplicateVariable(v.name().to_string()));
            }
        }
        Ok(Schema { variables, index })
    }

    pub fn from_dag(g: &CausalDag) -> Self {
        Schema::new(g.variables().to_vec()).expect("graph variables are unique")
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize, DataError> {
        self.position(name)
            .ok_or_else(|| DataError::UnknownVariable(name.to_string()))
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.position(name).map(|i| &self.variables[i])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(Variable::name)
    }
}

/// Policy for rows with empty cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Reject,
    DropRow,
}

/// Incremental, validating table construction from string records.
#[derive(Debug)]
pub struct TableBuilder {
    schema: Schema,
    /// schema position -> record position
    source_column: Vec<usize>,
    header: Vec<String>,
    columns: Vec<Vec<u16>>,
    policy: MissingPolicy,
    rows_seen: usize,
    dropped: usize,
}

impl TableBuilder {
    /// The header must name every schema variable exactly once, in any order.
    pub fn new<S: AsRef<str>>(schema: Schema, header: &[S], policy: MissingPolicy) -> Result<Self, DataError> {
        let header: Vec<String> = header.iter().map(|h| h.as_ref().trim().to_string()).collect();
        let mut seen = BTreeSet::new();
        for h in &header {
            if schema.position(h).is_none() {
                return Err(DataError::HeaderMismatch(alloc::format!("unexpected column `{h}`")));
            }
            if !seen.insert(h.as_str()) {
                return Err(DataError::HeaderMismatch(alloc::format!("column `{h}` appears twice")));
            }
        }
        if let Some(missing) = schema.names().find(|n| !seen.contains(n)) {
            return Err(DataError::HeaderMismatch(alloc::format!("missing column `{missing}`")));
        }
        let source_column = schema
            .names()
            .map(|n| header.iter().position(|h| h == n).expect("checked above"))
            .collect();
        let columns = vec![Vec::new(); schema.len()];
        Ok(TableBuilder {
            schema,
            source_column,
            header,
            columns,
            policy,
            rows_seen: 0,
            dropped: 0,
        })
    }

    /// Validates and appends one record. Rows are numbered from 1.
    pub fn push<S: AsRef<str>>(&mut self, record: &[S]) -> Result<(), DataError> {
        self.rows_seen += 1;
        let row = self.rows_seen;
        let width = self.header.len();
        if record.len() > width {
            return Err(DataError::RaggedRow {
                row,
                expected: width,
                found: record.len(),
            });
        }
        let cell = |k: usize| record.get(k).map(|c| c.as_ref().trim()).unwrap_or("");
        if let Some(k) = (0..width).find(|&k| cell(k).is_empty()) {
            return match self.policy {
                MissingPolicy::Reject => Err(DataError::MissingCell {
                    row,
                    column: self.header[k].clone(),
                }),
                MissingPolicy::DropRow => {
                    self.dropped += 1;
                    Ok(())
                }
            };
        }
        let mut values = Vec::with_capacity(self.schema.len());
        for (var, &src) in self.schema.variables.iter().zip(&self.source_column) {
            let value = cell(src);
            let level = var.level_index(value).ok_or_else(|| DataError::UnknownLevel {
                row,
                column: var.name().to_string(),
                value: value.to_string(),
            })?;
            values.push(level as u16);
        }
        for (col, v) in self.columns.iter_mut().zip(values) {
            col.push(v);
        }
        Ok(())
    }

    /// The table plus the number of rows dropped for missing cells.
    pub fn finish(self) -> (DataTable, usize) {
        let n_rows = self.columns.first().map_or(0, Vec::len);
        (
            DataTable {
                schema: self.schema,
                columns: self.columns,
                n_rows,
            },
            self.dropped,
        )
    }
}

/// Categorical observations, stored column-wise as level indices in schema
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataTable {
    schema: Schema,
    columns: Vec<Vec<u16>>,
    n_rows: usize,
}

impl DataTable {
    /// Builds a table from level-index columns in schema order.
    pub fn from_columns(schema: Schema, columns: Vec<Vec<u16>>) -> Result<Self, DataError> {
        if columns.len() != schema.len() {
            return Err(DataError::HeaderMismatch(alloc::format!(
                "{} columns for {} schema variables",
                columns.len(),
                schema.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for (var, col) in schema.variables.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(DataError::ColumnLength {
                    column: var.name().to_string(),
                    expected: n_rows,
                    found: col.len(),
                });
            }
            if let Some(&bad) = col.iter().find(|&&v| v as usize >= var.n_levels()) {
                return Err(DataError::LevelIndex {
                    column: var.name().to_string(),
                    index: bad as usize,
                });
            }
        }
        Ok(DataTable {
            schema,
            columns,
            n_rows,
        })
    }

    /// Convenience constructor from string rows with a header in schema order.
    pub fn from_rows<S: AsRef<str>>(schema: Schema, rows: &[Vec<S>]) -> Result<Self, DataError> {
        let header: Vec<String> = schema.names().map(String::from).collect();
        let mut b = TableBuilder::new(schema, &header, MissingPolicy::Reject)?;
        for r in rows {
            b.push(r)?;
        }
        Ok(b.finish().0)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn column(&self, name: &str) -> Result<&[u16], DataError> {
        Ok(&self.columns[self.schema.require(name)?])
    }

    pub fn column_at(&self, index: usize) -> &[u16] {
        &self.columns[index]
    }

    /// Level label of `variable` in `row`.
    pub fn label(&self, row: usize, variable: usize) -> &str {
        self.schema.variables[variable].level(self.columns[variable][row] as usize)
    }

    /// Rows as level labels, in schema order.
    pub fn records(&self) -> impl Iterator<Item = Vec<&str>> + '_ {
        (0..self.n_rows).map(move |r| (0..self.schema.len()).map(|c| self.label(r, c)).collect())
    }

    /// New table holding the given rows (repeats allowed) in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        let columns = self
            .columns
            .iter()
            .map(|col| rows.iter().map(|&r| col[r]).collect())
            .collect();
        DataTable {
            schema: self.schema.clone(),
            columns,
            n_rows: rows.len(),
        }
    }

    /// Projects onto the named variables, in the order given.
    pub fn project<S: AsRef<str>>(&self, names: &[S]) -> Result<DataTable, DataError> {
        let mut vars = Vec::new();
        let mut cols = Vec::new();
        for n in names {
            let i = self.schema.require(n.as_ref())?;
            vars.push(self.schema.variables[i].clone());
            cols.push(self.columns[i].clone());
        }
        DataTable::from_columns(Schema::new(vars)?, cols)
    }

    /// Empirical level frequencies of one variable.
    pub fn frequencies(&self, name: &str) -> Result<Vec<f64>, DataError> {
        let i = self.schema.require(name)?;
        let mut counts = vec![0usize; self.schema.variables[i].n_levels()];
        for &v in &self.columns[i] {
            counts[v as usize] += 1;
        }
        let n = self.n_rows.max(1) as f64;
        Ok(counts.into_iter().map(|c| c as f64 / n).collect())
    }
}

/// Counts of (x-level, y-level) within one stratum of the conditioning set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub x: String,
    pub y: String,
    /// (variable, level) pairs fixing the stratum; empty when unconditioned.
    pub stratum: Vec<(String, String)>,
    pub n_x: usize,
    pub n_y: usize,
    /// Row-major `n_x × n_y`.
    pub counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n_y + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// One contingency table per observed combination of `z` levels, ordered by
/// the mixed-radix index of the stratum (z sorted by name, first name most
/// significant). Empty strata are omitted.
pub fn stratified_counts<S: AsRef<str>>(
    t: &DataTable,
    x: &str,
    y: &str,
    z: &[S],
) -> Result<Vec<ContingencyTable>, DataError> {
    let schema = t.schema();
    let xi = schema.require(x)?;
    let yi = schema.require(y)?;
    let mut z_names: Vec<&str> = z.iter().map(AsRef::as_ref).collect();
    z_names.sort_unstable();
    let mut roles = BTreeSet::new();
    for name in [x, y].into_iter().chain(z_names.iter().copied()) {
        schema.require(name)?;
        if !roles.insert(name) {
            return Err(DataError::OverlappingRoles(name.to_string()));
        }
    }
    let zi: Vec<usize> = z_names.iter().map(|n| schema.require(n)).collect::<Result<_, _>>()?;

    let n_x = schema.variables[xi].n_levels();
    let n_y = schema.variables[yi].n_levels();
    let xs = t.column_at(xi);
    let ys = t.column_at(yi);
    let mut strata: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for r in 0..t.n_rows() {
        let mut key = 0u64;
        for &c in &zi {
            key = key * schema.variables[c].n_levels() as u64 + t.column_at(c)[r] as u64;
        }
        let cell = xs[r] as usize * n_y + ys[r] as usize;
        strata.entry(key).or_insert_with(|| vec![0; n_x * n_y])[cell] += 1;
    }

    Ok(strata
        .into_iter()
        .map(|(mut key, counts)| {
            let mut stratum = vec![(String::new(), String::new()); zi.len()];
            for (slot, &c) in stratum.iter_mut().zip(&zi).rev() {
                let var = &schema.variables[c];
                let level = (key % var.n_levels() as u64) as usize;
                key /= var.n_levels() as u64;
                *slot = (var.name().to_string(), var.level(level).to_string());
            }
            ContingencyTable {
                x: x.to_string(),
                y: y.to_string(),
                stratum,
                n_x,
                n_y,
                counts,
            }
        })
        .collect())
}
