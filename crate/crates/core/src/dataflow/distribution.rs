use serde::Serialize;

/// Per-class counts for one or more named subsets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDistribution {
    pub subsets: Vec<(String, Vec<u64>)>,
    pub totals: Vec<u64>,
    /// Arithmetic mean of each class count across subsets.
    pub means: Vec<f64>,
}

pub fn class_counts(labels: &[usize], num_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; num_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

pub fn class_distribution(subsets: &[(&str, &[usize])], num_classes: usize) -> ClassDistribution {
    let subsets: Vec<(String, Vec<u64>)> = subsets
        .iter()
        .map(|(name, labels)| (name.to_string(), class_counts(labels, num_classes)))
        .collect();
    from_counts(subsets, num_classes)
}

/// Same as [`class_distribution`] but from precomputed counts.
pub fn from_counts(subsets: Vec<(String, Vec<u64>)>, num_classes: usize) -> ClassDistribution {
    let mut totals = vec![0u64; num_classes];
    for (_, c) in &subsets {
        for (t, v) in totals.iter_mut().zip(c) {
            *t += v;
        }
    }
    let means = if subsets.is_empty() {
        vec![0.0; num_classes]
    } else {
        totals
            .iter()
            .map(|&t| t as f64 / subsets.len() as f64)
            .collect()
    };
    ClassDistribution {
        subsets,
        totals,
        means,
    }
}
