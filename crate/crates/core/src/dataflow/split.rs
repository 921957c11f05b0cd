use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::table::ExampleTable;
use crate::error::{Error, Result};

/// Row indices of a train/test partition, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Test rows for a class of size `n`: `n · fraction` rounded half-to-even,
/// capped so at least one row stays in training.
pub fn test_count(n: usize, fraction: f64) -> usize {
    let k = (n as f64 * fraction).round_ties_even() as usize;
    k.min(n.saturating_sub(1))
}

/// Per-class seeded shuffle, then the first `test_count` rows of each class go to test.
pub fn stratified_split_indices(
    labels: &[usize],
    num_classes: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class
            .get_mut(l)
            .ok_or_else(|| Error::Domain(format!("label {l} out of range")))?
            .push(i);
    }
    if let Some((c, rows)) = by_class.iter().enumerate().find(|(_, r)| r.len() < 2) {
        return Err(Error::Dataset(format!(
            "class {c} has {} row(s); stratified splitting needs at least 2",
            rows.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::new();
    for mut rows in by_class {
        rows.shuffle(&mut rng);
        let k = test_count(rows.len(), test_fraction);
        test.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn stratified_split(
    table: &ExampleTable,
    num_classes: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(ExampleTable, ExampleTable)> {
    let s = stratified_split_indices(&table.labels, num_classes, test_fraction, seed)?;
    Ok((table.select(&s.train), table.select(&s.test)))
}
