//! Comma-separated data files: mandatory header, one row per observation.

use std::io::{Read, Write};

use causeway_core::data::{DataError, MissingPolicy, TableBuilder};
use causeway_core::{DataTable, Schema};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("row {row}: {source}")]
    Csv { row: usize, source: csv::Error },
    #[error("the file is empty; a header row is required")]
    NoHeader,
    #[error("binning for `{column}`: {message}")]
    Binning { column: String, message: String },
    #[error("row {row}, column `{column}`: `{value}` is neither a level nor a number")]
    NotNumeric { row: usize, column: String, value: String },
}

/// Maps numeric cells of one column onto its levels.
///
/// With cuts `c₁ < … < cₖ` and `k + 1` levels: values below `c₁` take the
/// first level, values above `cₖ` the last, and a value between takes level
/// `i` when `cᵢ ≤ v < cᵢ₊₁`, except that `cₖ` itself stays in level `k − 1`.
/// Age with cuts `[30, 45]` thus bins as `<30`, `30–45`, `>45`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub column: String,
    pub cuts: Vec<f64>,
}

impl Binning {
    pub fn bin(&self, v: f64) -> usize {
        let k = self.cuts.len();
        if v > self.cuts[k - 1] {
            return k;
        }
        self.cuts[..k - 1].iter().filter(|&&c| v >= c).count()
    }

    fn check(&self, schema: &Schema) -> Result<(), TableError> {
        let fail = |message: String| TableError::Binning {
            column: self.column.clone(),
            message,
        };
        let var = schema
            .variable(&self.column)
            .ok_or_else(|| fail("not a schema variable".into()))?;
        if self.cuts.len() + 1 != var.n_levels() {
            return Err(fail(format!("{} cuts for {} levels", self.cuts.len(), var.n_levels())));
        }
        if self.cuts.iter().any(|c| !c.is_finite()) || self.cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(fail("cuts must be finite and increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub missing: MissingPolicy,
    pub binning: Vec<Binning>,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub table: DataTable,
    /// Rows dropped for missing cells under [`MissingPolicy::DropRow`].
    pub dropped: usize,
}

pub fn load_table(source: impl Read, schema: &Schema, options: &LoadOptions) -> Result<Loaded, TableError> {
    for b in &options.binning {
        b.check(schema)?;
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(TableError::NoHeader),
        Some(h) => h.map_err(|source| TableError::Csv { row: 0, source })?,
    };
    let header: Vec<String> = header.iter().map(str::to_string).collect();
    // header position of each binned column
    let binned: Vec<(usize, &Binning, &[String])> = options
        .binning
        .iter()
        .filter_map(|b| {
            let pos = header.iter().position(|h| *h == b.column)?;
            Some((pos, b, schema.variable(&b.column).expect("checked").levels()))
        })
        .collect();
    let mut builder = TableBuilder::new(schema.clone(), &header, options.missing)?;
    for (i, record) in records.enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| TableError::Csv { row, source })?;
        let mut cells: Vec<String> = record.iter().map(str::to_string).collect();
        for &(pos, b, levels) in &binned {
            let Some(cell) = cells.get_mut(pos) else { continue };
            if cell.is_empty() || levels.iter().any(|l| l == cell) {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| TableError::NotNumeric {
                row,
                column: b.column.clone(),
                value: cell.clone(),
            })?;
            *cell = levels[b.bin(v)].clone();
        }
        builder.push(&cells)?;
    }
    let (table, dropped) = builder.finish();
    Ok(Loaded { table, dropped })
}

/// Writes a header in schema order and one line per row.
pub fn write_table(t: &DataTable, sink: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    w.write_record(t.schema().names())?;
    for record in t.records() {
        w.write_record(record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn table_to_string(t: &DataTable) -> String {
    let mut buf = Vec::new();
    write_table(t, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("labels are UTF-8")
}
