use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::raw::{RawColumn, RawTable};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// How values missing from a supplied vocabulary are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabMode {
    /// Unseen values are a data error.
    Strict,
    /// Unseen values map to the code `vocab.len()`.
    #[default]
    Lenient,
}

/// Per categorical column, the sorted list of values seen in training.
/// A value's code is its position in that list.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VocabMap {
    pub columns: BTreeMap<String, Vec<String>>,
}

impl VocabMap {
    /// Builds vocabularies from every categorical column of `table`.
    pub fn fit(table: &RawTable) -> Self {
        let names = table.schema.feature_names();
        let columns = names
            .into_iter()
            .zip(&table.columns)
            .filter_map(|(name, col)| match col {
                RawColumn::Categorical(v) => {
                    let set: BTreeSet<&String> = v.iter().collect();
                    Some((name, set.into_iter().cloned().collect()))
                }
                RawColumn::Numeric(_) => None,
            })
            .collect();
        VocabMap { columns }
    }

    pub fn code(&self, column: &str, value: &str) -> Option<usize> {
        self.columns
            .get(column)?
            .binary_search_by(|v| v.as_str().cmp(value))
            .ok()
    }

    pub fn decode(&self, column: &str, code: usize) -> Option<&str> {
        self.columns.get(column)?.get(code).map(String::as_str)
    }

    /// Replaces categoricals with their codes; numeric columns pass through.
    pub fn apply(&self, table: &RawTable, mode: VocabMode) -> Result<Matrix> {
        let names = table.schema.feature_names();
        let n = table.len();
        let width = table.columns.len();
        let mut out = Matrix::zeros(n, width);
        for (j, (name, col)) in names.iter().zip(&table.columns).enumerate() {
            match col {
                RawColumn::Numeric(v) => {
                    for (r, &x) in v.iter().enumerate() {
                        out.set(r, j, x);
                    }
                }
                RawColumn::Categorical(v) => {
                    let vocab = self.columns.get(name).ok_or_else(|| {
                        Error::Schema(format!("no vocabulary for categorical column '{name}'"))
                    })?;
                    for (r, s) in v.iter().enumerate() {
                        let code = match vocab.binary_search_by(|x| x.as_str().cmp(s)) {
                            Ok(c) => c,
                            Err(_) if mode == VocabMode::Lenient => vocab.len(),
                            Err(_) => {
                                return Err(Error::Data {
                                    row: table.lines[r],
                                    column: Some(name.clone()),
                                    msg: format!("value '{s}' not in the training vocabulary"),
                                })
                            }
                        };
                        out.set(r, j, code as f64);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Fits a vocabulary on `table` and encodes it.
pub fn encode_categoricals(table: &RawTable) -> Result<(Matrix, VocabMap)> {
    let vocab = VocabMap::fit(table);
    let m = vocab.apply(table, VocabMode::Strict)?;
    Ok((m, vocab))
}
