//! Confusion-matrix metrics and support-weighted averages.

use saelstm::metrics::{confusion_matrix, weighted_average, ClassMetrics, MetricsReport};

fn main() -> saelstm::Result<()> {
    // Per-class values and supports from a published A / S / SS evaluation.
    let published = [
        (0.971879, 0.986131, 0.978953, 11320),
        (0.991466, 0.978024, 0.984699, 18293),
        (0.987558, 0.994367, 0.990951, 11894),
    ];
    let per_class: Vec<ClassMetrics> = published
        .iter()
        .map(|&(precision, recall, f1, support)| ClassMetrics {
            precision,
            recall,
            f1,
            support,
        })
        .collect();
    let supports: Vec<u64> = published.iter().map(|p| p.3).collect();
    let avg = weighted_average(&per_class, &supports)?;
    println!(
        "weighted: precision {:.6} recall {:.6} f1 {:.6}",
        avg.precision, avg.recall, avg.f1
    );
    let trace: f64 = per_class.iter().map(|m| m.recall * m.support as f64).sum();
    println!("reconstructed trace {:.1} of {}", trace, supports.iter().sum::<u64>());

    let y_true = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2];
    let y_pred = [0, 0, 1, 1, 1, 1, 2, 2, 0, 2];
    let cm = confusion_matrix(&y_true, &y_pred, 3)?;
    println!("\nconfusion matrix (rows = true): {:?}", cm.rows());
    let labels = vec!["A".to_string(), "S".into(), "SS".into()];
    let report = MetricsReport::from_confusion(cm, labels)?;
    print!("{}", report.to_table());
    Ok(())
}
