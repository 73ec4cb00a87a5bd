//! Exact nearest-neighbor search, majority voting and cross-validated kNN accuracy.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::embedding::Matrix;
use crate::error::{Error, Result};
use crate::stats::{stratified_folds, MeanStd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl Metric {
    pub fn kind(self) -> ScoreKind {
        match self {
            Metric::Euclidean => ScoreKind::Distance,
            Metric::Cosine => ScoreKind::Similarity,
        }
    }

    pub fn score(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
            Metric::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    dot / (na.sqrt() * nb.sqrt())
                }
            }
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            _ => Err(Error::InvalidConfig(format!("unknown metric {s:?}"))),
        }
    }
}

/// Whether smaller or larger scores mean closer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Distance,
    Similarity,
}

impl ScoreKind {
    /// Orders `a` before `b` when `a` is the better (closer) score.
    pub fn compare(self, a: f64, b: f64) -> Ordering {
        match self {
            ScoreKind::Distance => a.total_cmp(&b),
            ScoreKind::Similarity => b.total_cmp(&a),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborResult {
    pub id: String,
    /// Distance for Euclidean, similarity for cosine and alignment scores.
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Sorts `(score, id)` candidates best-first (ties by smaller id) and keeps the top `k`.
pub fn rank_top_k(mut candidates: Vec<(f64, String)>, k: usize, kind: ScoreKind) -> Vec<NeighborResult> {
    candidates.sort_by(|a, b| kind.compare(a.0, b.0).then_with(|| a.1.cmp(&b.1)));
    candidates
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (score, id))| NeighborResult { id, score, rank: i + 1 })
        .collect()
}

/// Vectors keyed by sequence id, optionally labeled with families.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    vectors: Matrix<f64>,
    ids: Vec<String>,
    labels: Option<Vec<Option<String>>>,
    metric: Metric,
}

impl VectorIndex {
    pub fn new(ids: Vec<String>, vectors: Vec<Vec<f64>>, metric: Metric) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                found: vectors.len(),
            });
        }
        let d = vectors.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(Error::Empty("vector index"));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::DuplicateId(dup.clone()));
        }
        let n = ids.len();
        Ok(VectorIndex {
            vectors: Matrix::from_vec(n, d, vectors.into_iter().flatten().collect()),
            ids,
            labels: None,
            metric,
        })
    }

    /// Attaches family labels; ids missing from `labels` stay unlabeled.
    pub fn with_labels(mut self, labels: &HashMap<String, String>) -> Self {
        self.labels = Some(self.ids.iter().map(|id| labels.get(id).cloned()).collect());
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.as_ref()?.get(i)?.as_deref()
    }

    /// Labels of every labeled row, keyed by id.
    pub fn label_map(&self) -> HashMap<String, String> {
        (0..self.len())
            .filter_map(|i| self.label(i).map(|l| (self.ids[i].clone(), l.to_string())))
            .collect()
    }

    /// Exact top-`k` scan. `exclude_id` is never returned; `k` larger than the index returns everything.
    pub fn neighbors(&self, query: &[f64], k: usize, exclude_id: Option<&str>) -> Result<Vec<NeighborResult>> {
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: query.len(),
            });
        }
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let candidates = (0..self.len())
            .filter(|&i| Some(self.ids[i].as_str()) != exclude_id)
            .map(|i| (self.metric.score(query, self.vector(i)), self.ids[i].clone()))
            .collect();
        Ok(rank_top_k(candidates, k, self.metric.kind()))
    }
}

/// Most frequent label among `neighbors`.
///
/// Ties go to the label whose neighbors are closer in total (smaller summed distance or
/// larger summed similarity), then to the lexicographically smaller label.
pub fn majority_vote(
    neighbors: &[NeighborResult],
    labels: &HashMap<String, String>,
    kind: ScoreKind,
) -> Result<String> {
    if neighbors.is_empty() {
        return Err(Error::Empty("neighbor list"));
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for n in neighbors {
        let label = labels.get(&n.id).ok_or_else(|| Error::MissingLabel(n.id.clone()))?;
        groups.entry(label).or_default().push(n.score);
    }
    let tallies = groups.into_iter().map(|(label, mut scores)| {
        // sum in a fixed order so the result does not depend on neighbor order
        scores.sort_by(f64::total_cmp);
        (label, scores.len(), scores.iter().sum::<f64>())
    });
    let best = tallies
        .min_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| kind.compare(a.2, b.2))
                .then_with(|| a.0.cmp(b.0))
        })
        .unwrap();
    Ok(best.0.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnScore {
    pub k: usize,
    pub accuracy: MeanStd,
    pub fold_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnReport {
    pub scores: Vec<KnnScore>,
    /// Families with fewer members than folds, left out of the evaluation.
    pub dropped_families: Vec<String>,
    pub evaluated: usize,
}

/// Stratified k-fold kNN classification accuracy for each `k` in `k_values`.
///
/// Every labeled vector is a test query exactly once; its neighbors come only from the
/// other folds.
pub fn knn_cross_validate(index: &VectorIndex, folds: usize, k_values: &[usize], seed: u64) -> Result<KnnReport> {
    if folds < 2 {
        return Err(Error::InvalidConfig("need at least 2 folds".into()));
    }
    if k_values.is_empty() || k_values.contains(&0) {
        return Err(Error::InvalidConfig("k values must be positive".into()));
    }
    if index.labels.is_none() {
        return Err(Error::InvalidConfig("index has no labels".into()));
    }
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for i in 0..index.len() {
        if let Some(l) = index.label(i) {
            *sizes.entry(l).or_default() += 1;
        }
    }
    let dropped: Vec<String> = sizes
        .iter()
        .filter(|(_, &n)| n < folds)
        .map(|(l, _)| l.to_string())
        .collect();
    let usable: Vec<usize> = (0..index.len())
        .filter(|&i| index.label(i).is_some_and(|l| sizes[l] >= folds))
        .collect();
    let families = sizes.len() - dropped.len();
    if families < 2 {
        return Err(Error::TooFewFamilies {
            need: 2,
            found: families,
        });
    }
    let labels: Vec<&str> = usable.iter().map(|&i| index.label(i).unwrap()).collect();
    let fold_of = stratified_folds(&labels, folds, seed);
    let max_k = *k_values.iter().max().unwrap();
    let kind = index.metric.kind();

    // per test item: whether the vote at each k was correct
    let outcomes: Vec<(usize, Vec<bool>)> = (0..usable.len())
        .into_par_iter()
        .map(|t| {
            let query = index.vector(usable[t]);
            let candidates = (0..usable.len())
                .filter(|&j| fold_of[j] != fold_of[t])
                .map(|j| (index.metric.score(query, index.vector(usable[j])), j))
                .collect::<Vec<_>>();
            let mut ranked = candidates;
            ranked.sort_by(|a, b| {
                kind.compare(a.0, b.0)
                    .then_with(|| index.ids[usable[a.1]].cmp(&index.ids[usable[b.1]]))
            });
            ranked.truncate(max_k);
            let correct = k_values
                .iter()
                .map(|&k| {
                    let voted = vote_indices(&ranked[..k.min(ranked.len())], &labels, kind);
                    voted == labels[t]
                })
                .collect();
            (fold_of[t], correct)
        })
        .collect();

    let scores = k_values
        .iter()
        .enumerate()
        .map(|(ki, &k)| {
            let mut hits = vec![0usize; folds];
            let mut totals = vec![0usize; folds];
            for (fold, correct) in &outcomes {
                totals[*fold] += 1;
                hits[*fold] += correct[ki] as usize;
            }
            let fold_accuracy: Vec<f64> = hits
                .iter()
                .zip(&totals)
                .filter(|(_, &n)| n > 0)
                .map(|(&h, &n)| h as f64 / n as f64)
                .collect();
            KnnScore {
                k,
                accuracy: MeanStd::of(&fold_accuracy).unwrap(),
                fold_accuracy,
            }
        })
        .collect();
    Ok(KnnReport {
        scores,
        dropped_families: dropped,
        evaluated: usable.len(),
    })
}

fn vote_indices<'a>(ranked: &[(f64, usize)], labels: &[&'a str], kind: ScoreKind) -> &'a str {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for &(score, j) in ranked {
        groups.entry(labels[j]).or_default().push(score);
    }
    groups
        .into_iter()
        .map(|(l, mut s)| {
            s.sort_by(f64::total_cmp);
            (l, s.len(), s.iter().sum::<f64>())
        })
        .min_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| kind.compare(a.2, b.2))
                .then_with(|| a.0.cmp(b.0))
        })
        .map(|g| g.0)
        .unwrap_or("")
}
