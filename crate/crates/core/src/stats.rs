//! Fold assignment and summary statistics shared by the evaluation harnesses.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mean and sample standard deviation over `n` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// `None` for an empty slice; a single value has standard deviation 0.
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std, n })
    }
}

/// Assigns each item a fold in `0..folds`, stratified by label.
///
/// Labels are visited in sorted order; each label's members are shuffled and dealt
/// round-robin, continuing from where the previous label stopped, so every label is
/// spread evenly (within one member) and fold sizes stay balanced.
pub fn stratified_folds<S: AsRef<str>>(labels: &[S], folds: usize, seed: u64) -> Vec<usize> {
    assert!(folds >= 1, "at least one fold");
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l.as_ref()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for members in by_label.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = next;
            next = (next + 1) % folds;
        }
    }
    assignment
}
