//! Indicator coding of categorical predictors and grouping of rows into
//! covariate patterns.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::EstimateError;
use crate::data::DataTable;
use crate::graph::Variable;

#[derive(Debug, Clone, PartialEq)]
struct Term {
    variable: Variable,
    /// First design column of this term (the intercept is column 0).
    offset: usize,
}

/// Intercept plus one indicator per non-reference level of each predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    terms: Vec<Term>,
    n_columns: usize,
}

impl Encoding {
    pub fn new(variables: &[Variable]) -> Self {
        let mut offset = 1;
        let terms = variables
            .iter()
            .map(|v| {
                let t = Term {
                    variable: v.clone(),
                    offset,
                };
                offset += v.n_levels() - 1;
                t
            })
            .collect();
        Encoding {
            terms,
            n_columns: offset,
        }
    }

    pub fn for_table<S: AsRef<str>>(t: &DataTable, predictors: &[S]) -> Result<Self, EstimateError> {
        let mut vars = Vec::with_capacity(predictors.len());
        for p in predictors {
            let v = t
                .schema()
                .variable(p.as_ref())
                .ok_or_else(|| EstimateError::SchemaMismatch(format!("predictor `{}` is not a column", p.as_ref())))?;
            if vars.iter().any(|w: &Variable| w.name() == v.name()) {
                return Err(EstimateError::InvalidPredictors(format!("`{}` listed twice", v.name())));
            }
            vars.push(v.clone());
        }
        Ok(Encoding::new(&vars))
    }

    pub fn n_columns(&self) -> usize {
        self.n_columns
    }

    pub fn predictors(&self) -> impl Iterator<Item = &Variable> {
        self.terms.iter().map(|t| &t.variable)
    }

    pub fn is_intercept_only(&self) -> bool {
        self.terms.is_empty()
    }

    /// `"(intercept)"`, then `"Var=Level"` for each indicator.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![String::from("(intercept)")];
        for t in &self.terms {
            let r = t.variable.reference_index();
            for (i, level) in t.variable.levels().iter().enumerate() {
                if i != r {
                    names.push(format!("{}={}", t.variable.name(), level));
                }
            }
        }
        names
    }

    /// Predictor variable owning design column `column`, `None` for the intercept.
    pub fn column_variable(&self, column: usize) -> Option<&str> {
        self.terms
            .iter()
            .rev()
            .find(|t| column >= t.offset)
            .map(|t| t.variable.name())
    }

    /// Design row for one combination of predictor level indices (in
    /// predictor order).
    pub fn encode(&self, levels: &[u16]) -> Vec<f64> {
        debug_assert_eq!(levels.len(), self.terms.len());
        let mut row = vec![0.0; self.n_columns];
        row[0] = 1.0;
        for (t, &level) in self.terms.iter().zip(levels) {
            let level = level as usize;
            let r = t.variable.reference_index();
            if level != r {
                let k = if level < r { level } else { level - 1 };
                row[t.offset + k] = 1.0;
            }
        }
        row
    }
}

/// Distinct predictor-level combinations present in a table and the pattern
/// of every row. Patterns are numbered in order of first appearance.
#[derive(Debug, Clone)]
pub(crate) struct Patterns {
    pub levels: Vec<Vec<u16>>,
    pub row_pattern: Vec<u32>,
}

impl Patterns {
    pub fn of(t: &DataTable, columns: &[usize]) -> Self {
        let mut index: BTreeMap<Vec<u16>, u32> = BTreeMap::new();
        let mut levels = Vec::new();
        let row_pattern = (0..t.n_rows())
            .map(|r| {
                let key: Vec<u16> = columns.iter().map(|&c| t.column_at(c)[r]).collect();
                *index.entry(key).or_insert_with_key(|k| {
                    levels.push(k.clone());
                    (levels.len() - 1) as u32
                })
            })
            .collect();
        Patterns { levels, row_pattern }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }
}
