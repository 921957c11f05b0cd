//! Confusion matrix and the per-class / averaged classification metrics.
//!
//! Rows of the confusion matrix are true classes, columns are predictions.
//! Per-class counts are one-vs-rest: for class `j`, `TP = m[j][j]`,
//! `FP = column j − TP`, `FN = row j − TP`, `TN = total − TP − FP − FN`.
//! Any `0/0` rate is reported as 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneVsRest {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape("ConfusionMatrix::from_rows", format!("{k}x{k}"), "ragged rows"));
        }
        Ok(ConfusionMatrix {
            k,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= self.k || pred >= self.k {
            return Err(Error::Domain(format!(
                "class index ({truth}, {pred}) out of range for {} classes",
                self.k
            )));
        }
        self.counts[truth * self.k + pred] += 1;
        Ok(())
    }

    /// Adds another matrix cell by cell.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.k != self.k {
            return Err(Error::shape("ConfusionMatrix::merge", self.k, other.k));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.k).map(|j| self.get(truth, j)).sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        (0..self.k).map(|i| self.get(i, pred)).sum()
    }

    pub fn supports(&self) -> Vec<u64> {
        (0..self.k).map(|i| self.row_sum(i)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn one_vs_rest(&self, class: usize) -> OneVsRest {
        let tp = self.get(class, class);
        let fp = self.col_sum(class) - tp;
        let fn_ = self.row_sum(class) - tp;
        let tn = self.total() - tp - fp - fn_;
        OneVsRest { tp, fp, fn_, tn }
    }

    /// Relabels classes: new class `perm[i]` takes old class `i`.
    pub fn permuted(&self, perm: &[usize]) -> ConfusionMatrix {
        let mut out = ConfusionMatrix::zeros(self.k);
        for i in 0..self.k {
            for j in 0..self.k {
                out.counts[perm[i] * self.k + perm[j]] = self.get(i, j);
            }
        }
        out
    }

    /// CSV with a header of predicted labels and one row per true label.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut s = String::from("true\\pred");
        for l in labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for (i, row) in self.rows().iter().enumerate() {
            s.push_str(labels.get(i).map_or("?", String::as_str));
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape("confusion_matrix", y_true.len(), y_pred.len()));
    }
    let mut cm = ConfusionMatrix::zeros(k);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        cm.add(t, p)?;
    }
    Ok(cm)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// `2PR / (P + R)`, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.classes())
        .map(|j| {
            let o = cm.one_vs_rest(j);
            let precision = ratio(o.tp as f64, (o.tp + o.fp) as f64);
            let recall = ratio(o.tp as f64, (o.tp + o.fn_) as f64);
            ClassMetrics {
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: o.tp + o.fn_,
            }
        })
        .collect()
}

/// `trace / total`.
pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Domain("accuracy of an empty confusion matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Support-weighted mean of each metric.
pub fn weighted_average(metrics: &[ClassMetrics], supports: &[u64]) -> Result<Averages> {
    if metrics.len() != supports.len() {
        return Err(Error::Schema(format!(
            "{} per-class entries but {} supports",
            metrics.len(),
            supports.len()
        )));
    }
    let total: f64 = supports.iter().map(|&s| s as f64).sum();
    if total == 0.0 {
        return Err(Error::Domain("weighted average with zero total support".into()));
    }
    let avg = |f: fn(&ClassMetrics) -> f64| -> f64 {
        metrics
            .iter()
            .zip(supports)
            .map(|(m, &s)| f(m) * s as f64)
            .sum::<f64>()
            / total
    };
    Ok(Averages {
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
    })
}

/// Unweighted mean over classes.
pub fn macro_average(metrics: &[ClassMetrics]) -> Averages {
    let n = metrics.len().max(1) as f64;
    Averages {
        precision: metrics.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: metrics.iter().map(|m| m.recall).sum::<f64>() / n,
        f1: metrics.iter().map(|m| m.f1).sum::<f64>() / n,
    }
}

/// Which average the human-readable table reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageKind {
    #[default]
    Weighted,
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub labels: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub weighted_avg: Averages,
    pub macro_avg: Averages,
    pub total_support: u64,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_confusion(cm: ConfusionMatrix, labels: Vec<String>) -> Result<Self> {
        if labels.len() != cm.classes() {
            return Err(Error::Schema(format!(
                "{} labels for a {}-class confusion matrix",
                labels.len(),
                cm.classes()
            )));
        }
        let per_class = per_class_metrics(&cm);
        let supports = cm.supports();
        Ok(MetricsReport {
            accuracy: overall_accuracy(&cm)?,
            weighted_avg: weighted_average(&per_class, &supports)?,
            macro_avg: macro_average(&per_class),
            total_support: cm.total(),
            per_class,
            labels,
            confusion: cm,
        })
    }

    pub fn from_predictions(
        y_true: &[usize],
        y_pred: &[usize],
        labels: Vec<String>,
    ) -> Result<Self> {
        let cm = confusion_matrix(y_true, y_pred, labels.len())?;
        Self::from_confusion(cm, labels)
    }

    pub fn average(&self, kind: AverageKind) -> Averages {
        match kind {
            AverageKind::Weighted => self.weighted_avg,
            AverageKind::Macro => self.macro_avg,
        }
    }

    /// Human-readable table with six-digit metrics and the weighted average.
    pub fn to_table(&self) -> String {
        self.to_table_with(AverageKind::Weighted)
    }

    pub fn to_table_with(&self, kind: AverageKind) -> String {
        let mut s = format!(
            "{:<10}{:>12}{:>12}{:>12}{:>10}\n",
            "", "precision", "recall", "f1-score", "support"
        );
        for (l, m) in self.labels.iter().zip(&self.per_class) {
            s.push_str(&format!(
                "{:<10}{:>12.6}{:>12.6}{:>12.6}{:>10}\n",
                l, m.precision, m.recall, m.f1, m.support
            ));
        }
        s.push_str(&format!(
            "{:<10}{:>12}{:>12}{:>12.6}{:>10}\n",
            "Accuracy", "", "", self.accuracy, self.total_support
        ));
        let w = self.average(kind);
        let name = match kind {
            AverageKind::Weighted => "Average",
            AverageKind::Macro => "Macro avg",
        };
        s.push_str(&format!(
            "{:<10}{:>12.6}{:>12.6}{:>12.6}{:>10}\n",
            name, w.precision, w.recall, w.f1, self.total_support
        ));
        s
    }
}
