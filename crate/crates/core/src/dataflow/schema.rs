use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of feature columns every schema must provide (the autoencoder input width).
pub const FEATURE_WIDTH: usize = 13;

/// Number of target classes.
pub const NUM_CLASSES: usize = 3;

const UGRANSOME_SCHEMA: &str = include_str!("../../data/ugransome_schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Column layout of an input CSV.
///
/// `columns` lists every schema column including the target. Class labels
/// are kept in lexicographic order, which fixes the class indices
/// (A → 0, S → 1, SS → 2 for UGRansome).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
    pub target_column: String,
    pub class_labels: Vec<String>,
}

impl FeatureSchema {
    pub fn new(
        columns: Vec<ColumnSpec>,
        target_column: impl Into<String>,
        class_labels: Vec<String>,
    ) -> Result<Self> {
        FeatureSchema {
            columns,
            target_column: target_column.into(),
            class_labels,
        }
        .validated()
    }

    /// The UGRansome layout: 13 features plus the `Prediction` target.
    pub fn ugransome() -> Self {
        Self::from_json_str(UGRANSOME_SCHEMA).expect("bundled schema is valid")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: FeatureSchema = serde_json::from_str(s)
            .map_err(|e| Error::Schema(format!("malformed schema json: {e}")))?;
        raw.validated()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    fn validated(mut self) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column '{}'", c.name)));
            }
        }
        let targets = self
            .columns
            .iter()
            .filter(|c| c.name == self.target_column)
            .count();
        if targets != 1 {
            return Err(Error::Schema(format!(
                "target column '{}' must appear exactly once among the columns",
                self.target_column
            )));
        }
        let n_features = self.columns.len() - 1;
        if n_features != FEATURE_WIDTH {
            return Err(Error::Schema(format!(
                "expected {FEATURE_WIDTH} feature columns besides the target, found {n_features}"
            )));
        }
        self.class_labels.sort();
        self.class_labels.dedup();
        if self.class_labels.len() != NUM_CLASSES {
            return Err(Error::Schema(format!(
                "expected {NUM_CLASSES} distinct class labels, found {}",
                self.class_labels.len()
            )));
        }
        Ok(self)
    }

    /// Feature columns in schema order (target excluded).
    pub fn features(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(move |c| c.name != self.target_column)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features().map(|c| c.name.clone()).collect()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|l| l == label)
    }

    /// Schema columns absent from `header`, in schema order.
    pub fn missing_columns<'a>(&'a self, header: &[&str]) -> Vec<&'a str> {
        self.columns
            .iter()
            .map(|c| c.name.as_str())
            .filter(|n| !header.contains(n))
            .collect()
    }
}
