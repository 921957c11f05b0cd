use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Normalized features with class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleTable {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl ExampleTable {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::shape("ExampleTable::new", features.rows(), labels.len()));
        }
        Ok(ExampleTable { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    pub fn select(&self, idx: &[usize]) -> ExampleTable {
        ExampleTable {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Writes `names..., label` with full-precision floats.
    pub fn write_csv(&self, path: &Path, names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
        header.push("label");
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec: Vec<String> = self.features.row(r).iter().map(|x| format!("{x:?}")).collect();
            rec.push(self.labels[r].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a table written by [`ExampleTable::write_csv`]; returns the feature names too.
    pub fn read_csv(path: &Path) -> Result<(Self, Vec<String>)> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header.last().map(String::as_str) != Some("label") {
            return Err(Error::Schema(format!(
                "{}: last column must be 'label'",
                path.display()
            )));
        }
        let width = header.len() - 1;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            for (j, s) in rec.iter().enumerate() {
                let bad = |msg: String| Error::Data {
                    row: line,
                    column: Some(header[j].clone()),
                    msg,
                };
                if j < width {
                    data.push(s.parse::<f64>().map_err(|e| bad(e.to_string()))?);
                } else {
                    labels.push(s.parse::<usize>().map_err(|e| bad(e.to_string()))?);
                }
            }
        }
        let features = Matrix::from_vec(labels.len(), width, data)?;
        let names = header[..width].to_vec();
        Ok((ExampleTable { features, labels }, names))
    }
}
