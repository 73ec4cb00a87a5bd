//! Linear SVMs and the binary / multiclass family-classification protocols.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::VectorIndex;
use crate::rng::{derive_seed, label_hash};
use crate::stats::{stratified_folds, MeanStd};

/// Smallest family the binary protocol accepts.
pub const MIN_FAMILY_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Records one prediction.
    pub fn add(&mut self, actual: bool, predicted: bool) {
        match (actual, predicted) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }
}

/// The four table metrics. `None` marks a 0/0 ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub specificity: Option<f64>,
    pub sensitivity: Option<f64>,
    pub accuracy: f64,
    pub precision: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics_from_counts(c: ConfusionCounts) -> Result<Metrics> {
    if c.total() == 0 {
        return Err(Error::NoExamples);
    }
    Ok(Metrics {
        specificity: ratio(c.tn, c.tn + c.fp),
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        accuracy: (c.tn + c.tp) as f64 / c.total() as f64,
        precision: ratio(c.tp, c.tp + c.fp),
    })
}

/// Fold-level metrics summarized as mean and sample standard deviation.
///
/// Undefined fold values are left out of the summary; `undefined` counts how many
/// were dropped for each metric, in the order specificity, sensitivity, precision.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub specificity: Option<MeanStd>,
    pub sensitivity: Option<MeanStd>,
    pub accuracy: Option<MeanStd>,
    pub precision: Option<MeanStd>,
    pub undefined: [usize; 3],
    pub folds: Vec<Metrics>,
}

impl MetricsReport {
    pub fn from_folds(folds: Vec<Metrics>) -> Self {
        let collect = |f: fn(&Metrics) -> Option<f64>| -> (Option<MeanStd>, usize) {
            let vals: Vec<f64> = folds.iter().filter_map(f).collect();
            (MeanStd::of(&vals), folds.len() - vals.len())
        };
        let (specificity, us) = collect(|m| m.specificity);
        let (sensitivity, ue) = collect(|m| m.sensitivity);
        let (precision, up) = collect(|m| m.precision);
        let (accuracy, _) = collect(|m| Some(m.accuracy));
        MetricsReport {
            specificity,
            sensitivity,
            accuracy,
            precision,
            undefined: [us, ue, up],
            folds,
        }
    }

    /// Human-readable notes about fold values left out of the means.
    pub fn warnings(&self) -> Vec<String> {
        ["specificity", "sensitivity", "precision"]
            .iter()
            .zip(self.undefined)
            .filter(|(_, n)| *n > 0)
            .map(|(name, n)| format!("{name} undefined (0/0) in {n} fold(s), excluded from the mean"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    /// Hinge-loss weight against the margin term.
    pub c: f64,
    pub epochs: usize,
    /// Train on per-feature z-scores and fold the scaling back into the returned model.
    pub standardize: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 20,
            standardize: true,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig("C must be a positive number".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("SVM epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl SvmModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// `+1` or `-1`; a margin of exactly zero counts as `+1`.
    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.margin(x) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(‖w‖² + b²)/2 + C·Σ max(0, 1 − yᵢ(w·xᵢ + b))`.
///
/// The bias is regularized along with the weights because training treats it as an
/// extra constant feature.
pub fn svm_objective(model: &SvmModel, x: &[Vec<f64>], y: &[i8]) -> f64 {
    let reg = 0.5 * (dot(&model.weights, &model.weights) + model.bias * model.bias);
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - f64::from(yi) * model.margin(xi)).max(0.0))
        .sum();
    reg + model.c * hinge
}

fn check_features(x: &[Vec<f64>], n_labels: usize) -> Result<usize> {
    if x.len() != n_labels {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: n_labels,
        });
    }
    let d = x.first().map_or(0, Vec::len);
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: row.len(),
        });
    }
    Ok(d)
}

/// Pegasos stochastic subgradient descent on the primal hinge loss, `λ = 1/(n·C)`.
///
/// Each epoch visits the examples in a fresh seeded order with step `1/(λt)`, followed
/// by projection onto the ball of radius `1/√λ`. The last iterate is returned. With
/// `standardize` the descent runs on z-scored features, so the regularizer acts in
/// those coordinates, and the result is mapped back to raw features.
pub fn train_linear_svm(x: &[Vec<f64>], y: &[i8], params: SvmParams, seed: u64) -> Result<SvmModel> {
    params.validate()?;
    let d = check_features(x, y.len())?;
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::InvalidConfig("binary labels must be +1 or -1".into()));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    if params.standardize {
        let (mean, scale) = feature_scaling(x, d);
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|r| r.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect())
            .collect();
        let inner = train_linear_svm(
            &z,
            y,
            SvmParams {
                standardize: false,
                ..params
            },
            seed,
        )?;
        let weights: Vec<f64> = inner.weights.iter().zip(&scale).map(|(w, s)| w / s).collect();
        let bias = inner.bias - dot(&weights, &mean);
        return Ok(SvmModel {
            weights,
            bias,
            c: params.c,
        });
    }
    let n = x.len();
    let lambda = 1.0 / (n as f64 * params.c);
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let yi = f64::from(y[i]);
            let violated = yi * (dot(&w, &x[i]) + b) < 1.0;
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            b *= shrink;
            if violated {
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += eta * yi * xj;
                }
                b += eta * yi;
            }
            let norm = (dot(&w, &w) + b * b).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
                b *= s;
            }
        }
    }
    Ok(SvmModel {
        weights: w,
        bias: b,
        c: params.c,
    })
}

/// Per-feature mean and standard deviation (1 for constant features).
fn feature_scaling(x: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let mut mean = vec![0.0; d];
    for r in x {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; d];
    for r in x {
        var.iter_mut()
            .zip(r)
            .zip(&mean)
            .for_each(|((s, v), m)| *s += (v - m).powi(2) / n);
    }
    let scale = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    (mean, scale)
}

/// One-vs-rest linear SVMs over sorted class names.
///
/// With exactly two classes a single model separates the first class (positive) from
/// the second, and the margins are `m` and `−m`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneVsRest {
    pub classes: Vec<String>,
    pub models: Vec<SvmModel>,
}

impl OneVsRest {
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        if self.classes.len() == 2 {
            let m = self.models[0].margin(x);
            vec![m, -m]
        } else {
            self.models.iter().map(|m| m.margin(x)).collect()
        }
    }

    /// Class with the largest margin; ties go to the lexicographically smaller class.
    pub fn predict(&self, x: &[f64]) -> &str {
        let margins = self.margins(x);
        let mut best = 0;
        for (i, &m) in margins.iter().enumerate().skip(1) {
            if m > margins[best] {
                best = i;
            }
        }
        &self.classes[best]
    }
}

pub fn one_vs_rest<S: AsRef<str> + Sync>(x: &[Vec<f64>], y: &[S], params: SvmParams, seed: u64) -> Result<OneVsRest> {
    params.validate()?;
    check_features(x, y.len())?;
    let mut classes: Vec<String> = y.iter().map(|s| s.as_ref().to_string()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let positives: Vec<&String> = if classes.len() == 2 {
        vec![&classes[0]]
    } else {
        classes.iter().collect()
    };
    let models = positives
        .par_iter()
        .map(|class| {
            let yb: Vec<i8> = y
                .iter()
                .map(|s| if s.as_ref() == class.as_str() { 1 } else { -1 })
                .collect();
            train_linear_svm(x, &yb, params, derive_seed(seed, &[label_hash(class)]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OneVsRest { classes, models })
}

/// Settings shared by both evaluation protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub folds: usize,
    pub svm: SvmParams,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            folds: 10,
            svm: SvmParams::default(),
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig("need at least 2 folds".into()));
        }
        self.svm.validate()
    }
}

fn family_members(index: &VectorIndex) -> BTreeMap<&str, Vec<usize>> {
    let mut fams: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for i in 0..index.len() {
        if let Some(l) = index.label(i) {
            fams.entry(l).or_default().push(i);
        }
    }
    fams
}

/// Family-versus-rest evaluation: the family's members against an equal number of
/// sequences drawn uniformly without replacement from every other family, scored by
/// stratified cross-validation.
pub fn binary_family_protocol(index: &VectorIndex, family: &str, cfg: &ProtocolConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let fams = family_members(index);
    let positives = fams.get(family).cloned().unwrap_or_default();
    let min = MIN_FAMILY_SIZE.max(cfg.folds);
    if positives.len() < min {
        return Err(Error::FamilyTooSmall {
            family: family.to_string(),
            size: positives.len(),
            min,
        });
    }
    let pool: Vec<usize> = fams
        .iter()
        .filter(|(f, _)| **f != family)
        .flat_map(|(_, m)| m.iter().copied())
        .collect();
    if pool.len() < positives.len() {
        return Err(Error::NegativePoolTooSmall {
            family: family.to_string(),
            available: pool.len(),
            needed: positives.len(),
        });
    }
    let fam_seed = derive_seed(cfg.seed, &[label_hash(family)]);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(fam_seed, &[0]));
    let mut negatives: Vec<usize> = index::sample(&mut rng, pool.len(), positives.len())
        .into_iter()
        .map(|j| pool[j])
        .collect();
    negatives.sort_unstable();

    let rows: Vec<usize> = positives.iter().chain(&negatives).copied().collect();
    let y: Vec<i8> = (0..rows.len())
        .map(|i| if i < positives.len() { 1 } else { -1 })
        .collect();
    let x: Vec<Vec<f64>> = rows.iter().map(|&r| index.vector(r).to_vec()).collect();
    let fold_of = stratified_folds(
        &y.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        cfg.folds,
        derive_seed(fam_seed, &[1]),
    );

    let folds = (0..cfg.folds)
        .into_par_iter()
        .map(|f| {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| fold_of[i] != f);
            let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<i8> = train.iter().map(|&i| y[i]).collect();
            let model = train_linear_svm(&tx, &ty, cfg.svm, derive_seed(fam_seed, &[2, f as u64]))?;
            let mut counts = ConfusionCounts::default();
            for &i in &test {
                counts.add(y[i] == 1, model.predict(&x[i]) == 1);
            }
            metrics_from_counts(counts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_folds(folds))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassReport {
    pub report: MetricsReport,
    /// Families evaluated, most populous first.
    pub families: Vec<String>,
    /// Set when fewer families exist than were requested.
    pub clamped: bool,
}

/// One-vs-rest SVM evaluation over the `top_n` most populous families.
///
/// Accuracy is the fraction of test sequences assigned their own family. Precision,
/// sensitivity and specificity are computed per family (that family against the rest)
/// and macro-averaged within each fold.
pub fn multiclass_protocol(index: &VectorIndex, top_n: usize, cfg: &ProtocolConfig) -> Result<MulticlassReport> {
    cfg.validate()?;
    let fams = family_members(index);
    let mut ranked: Vec<(&str, &Vec<usize>)> = fams.iter().map(|(f, m)| (*f, m)).collect();
    ranked.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(b.0)));
    let clamped = top_n > ranked.len();
    ranked.truncate(top_n);
    if ranked.len() < 2 {
        return Err(Error::TooFewFamilies {
            need: 2,
            found: ranked.len(),
        });
    }
    let families: Vec<String> = ranked.iter().map(|(f, _)| f.to_string()).collect();
    let mut rows: Vec<usize> = ranked.iter().flat_map(|(_, m)| m.iter().copied()).collect();
    rows.sort_unstable();
    let y: Vec<&str> = rows.iter().map(|&r| index.label(r).unwrap()).collect();
    let x: Vec<Vec<f64>> = rows.iter().map(|&r| index.vector(r).to_vec()).collect();
    let fold_of = stratified_folds(&y, cfg.folds, derive_seed(cfg.seed, &[1]));

    let folds = (0..cfg.folds)
        .into_par_iter()
        .map(|f| {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| fold_of[i] != f);
            let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<&str> = train.iter().map(|&i| y[i]).collect();
            let model = one_vs_rest(&tx, &ty, cfg.svm, derive_seed(cfg.seed, &[2, f as u64]))?;
            let predicted: Vec<&str> = test.iter().map(|&i| model.predict(&x[i])).collect();
            fold_metrics(&families, &test.iter().map(|&i| y[i]).collect::<Vec<_>>(), &predicted)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassReport {
        report: MetricsReport::from_folds(folds),
        families,
        clamped,
    })
}

/// Overall accuracy plus macro-averaged per-class rates for one fold.
pub fn fold_metrics<S: AsRef<str>>(classes: &[S], actual: &[&str], predicted: &[&str]) -> Result<Metrics> {
    if actual.is_empty() {
        return Err(Error::NoExamples);
    }
    let correct = actual.iter().zip(predicted).filter(|(a, p)| a == p).count();
    let mut spec = Vec::new();
    let mut sens = Vec::new();
    let mut prec = Vec::new();
    for class in classes {
        let class = class.as_ref();
        let mut c = ConfusionCounts::default();
        for (a, p) in actual.iter().zip(predicted) {
            c.add(*a == class, *p == class);
        }
        let m = metrics_from_counts(c)?;
        spec.extend(m.specificity);
        sens.extend(m.sensitivity);
        prec.extend(m.precision);
    }
    let mean = |v: &[f64]| MeanStd::of(v).map(|m| m.mean);
    Ok(Metrics {
        specificity: mean(&spec),
        sensitivity: mean(&sens),
        accuracy: correct as f64 / actual.len() as f64,
        precision: mean(&prec),
    })
}
