use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use super::schema::{ColumnKind, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl RawColumn {
    fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    fn select(&self, idx: &[usize]) -> RawColumn {
        match self {
            RawColumn::Numeric(v) => RawColumn::Numeric(idx.iter().map(|&i| v[i]).collect()),
            RawColumn::Categorical(v) => {
                RawColumn::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

/// Parsed records, stored column-wise in schema feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: FeatureSchema,
    pub columns: Vec<RawColumn>,
    pub labels: Vec<usize>,
    /// Source line of each record (header is line 1).
    pub lines: Vec<usize>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> RawTable {
        RawTable {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(idx)).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            lines: idx.iter().map(|&i| self.lines[i]).collect(),
        }
    }

    /// Drops exact duplicate records (features and label), keeping the first.
    pub fn drop_duplicates(&self) -> RawTable {
        let mut seen = HashSet::new();
        let keep: Vec<usize> = (0..self.len())
            .filter(|&r| {
                let key: Vec<String> = self
                    .columns
                    .iter()
                    .map(|c| match c {
                        RawColumn::Numeric(v) => format!("{:x}", v[r].to_bits()),
                        RawColumn::Categorical(v) => v[r].clone(),
                    })
                    .chain(std::iter::once(self.labels[r].to_string()))
                    .collect();
                seen.insert(key)
            })
            .collect();
        self.select(&keep)
    }
}

pub fn parse_csv(path: &Path, schema: &FeatureSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv_reader(file, schema)
}

/// Parses comma-separated UTF-8 with a header row.
///
/// Columns not named by the schema are ignored.
pub fn parse_csv_reader<R: Read>(reader: R, schema: &FeatureSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let missing = schema.missing_columns(&header_refs);
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "input is missing schema column(s): {}",
            missing.join(", ")
        )));
    }
    let col_index = |name: &str| header.iter().position(|h| h == name).expect("checked above");
    let feature_idx: Vec<(usize, ColumnKind, String)> = schema
        .features()
        .map(|c| (col_index(&c.name), c.kind, c.name.clone()))
        .collect();
    let target_idx = col_index(&schema.target_column);

    let mut columns: Vec<RawColumn> = feature_idx
        .iter()
        .map(|(_, kind, _)| match kind {
            ColumnKind::Numeric => RawColumn::Numeric(Vec::new()),
            ColumnKind::Categorical => RawColumn::Categorical(Vec::new()),
        })
        .collect();
    let mut labels = Vec::new();
    let mut lines = Vec::new();

    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let target = field(target_idx);
        let label = schema.class_index(target).ok_or_else(|| Error::Data {
            row: line,
            column: Some(schema.target_column.clone()),
            msg: format!(
                "unknown class label '{target}' (expected one of {:?})",
                schema.class_labels
            ),
        })?;
        for ((i, _, name), col) in feature_idx.iter().zip(columns.iter_mut()) {
            let s = field(*i);
            match col {
                RawColumn::Numeric(v) => {
                    let x: f64 = s.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| {
                        Error::Data {
                            row: line,
                            column: Some(name.clone()),
                            msg: format!("cannot parse '{s}' as a finite number"),
                        }
                    })?;
                    v.push(x);
                }
                RawColumn::Categorical(v) => v.push(s.to_owned()),
            }
        }
        labels.push(label);
        lines.push(line);
    }
    debug_assert!(columns.iter().all(|c| c.len() == labels.len()));
    Ok(RawTable {
        schema: schema.clone(),
        columns,
        labels,
        lines,
    })
}
