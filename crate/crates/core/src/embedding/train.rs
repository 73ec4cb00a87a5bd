use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::step::{apply_unit, units_at, FrozenStore, ReadOnly, Scratch, SharedParams, SharedView, Store, Unit};
use super::{init_vector, EmbeddingModel, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::tokenizer::{subsample_filter, Corpus, TokenId, TokenizedDoc};

/// Per-epoch training diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean loss per update, measured while training.
    pub epoch_loss: Vec<f64>,
    pub updates: u64,
}

struct Schedule {
    alpha0: f64,
    alpha_min: f64,
    total: u64,
}

impl Schedule {
    fn rate(&self, done: u64) -> f32 {
        let frac = (done as f64 / self.total.max(1) as f64).min(1.0);
        (self.alpha0 - (self.alpha0 - self.alpha_min) * frac).max(self.alpha_min) as f32
    }
}

fn check_docs(model: &EmbeddingModel, docs: &[TokenizedDoc]) -> Result<()> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let v = model.vocab.len();
    let n = model.n_docs();
    for d in docs {
        if d.doc_tag >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: d.doc_tag + 1,
            });
        }
        if let Some(&t) = d.tokens.iter().find(|&&t| t as usize >= v) {
            return Err(Error::DimensionMismatch {
                expected: v,
                found: t as usize + 1,
            });
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_shard<S: Store<f32>>(
    store: &mut S,
    model_cfg: &TrainConfig,
    vocab: &crate::tokenizer::Vocabulary,
    docs: &[TokenizedDoc],
    shard: &[usize],
    rng: &mut ChaCha8Rng,
    progress: &AtomicU64,
    schedule: &Schedule,
) -> (f64, u64) {
    let mut scratch = Scratch::new(model_cfg.dim);
    let mut units: Vec<Unit> = Vec::new();
    let mut loss_sum = 0.0f64;
    let mut count = 0u64;
    for &di in shard {
        let doc = &docs[di];
        let start = progress.fetch_add(doc.tokens.len() as u64, Ordering::Relaxed);
        let kept;
        let tokens: &[TokenId] = if model_cfg.subsample_t > 0.0 {
            kept = subsample_filter(&doc.tokens, vocab, model_cfg.subsample_t, rng);
            &kept
        } else {
            &doc.tokens
        };
        for pos in 0..tokens.len() {
            let lr = schedule.rate(start + pos as u64);
            let reach = rng.random_range(1..=model_cfg.window);
            units.clear();
            units_at(
                model_cfg.architecture,
                model_cfg.objective,
                vocab,
                doc.doc_tag,
                tokens,
                pos,
                reach,
                rng,
                &mut units,
            );
            for unit in &units {
                loss_sum += apply_unit(store, unit, Some(lr), &mut scratch) as f64;
                count += 1;
            }
        }
    }
    (loss_sum, count)
}

/// Runs `config.epochs` passes of SGD over `docs`.
///
/// Documents are shuffled each epoch and the learning rate decays linearly per token from
/// `alpha0` to `alpha_min`. With one worker the result is a pure function of the seed; with
/// more, shards of each epoch run concurrently on shared parameters without locking.
///
/// CBOW and skip-gram never touch document rows during training; afterwards each document
/// row is set to the mean of its tokens' word vectors.
pub fn train(model: &mut EmbeddingModel, docs: &[TokenizedDoc]) -> Result<TrainReport> {
    let cfg = model.config;
    cfg.validate()?;
    check_docs(model, docs)?;
    let total_tokens: u64 = docs.iter().map(|d| d.tokens.len() as u64).sum();
    let schedule = Schedule {
        alpha0: cfg.alpha0,
        alpha_min: cfg.alpha_min,
        total: total_tokens * cfg.epochs as u64,
    };
    let progress = AtomicU64::new(0);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let workers = cfg.workers.min(docs.len()).max(1);

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1, epoch as u64]));
        order.shuffle(&mut shuffle_rng);
        let (loss, count) = if workers == 1 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2, epoch as u64, 0]));
            run_shard(
                &mut model.params,
                &cfg,
                &model.vocab,
                docs,
                &order,
                &mut rng,
                &progress,
                &schedule,
            )
        } else {
            let shared = SharedParams::new(&model.params);
            let chunk = order.len().div_ceil(workers);
            let results: Vec<(f64, u64)> = thread::scope(|s| {
                let handles: Vec<_> = order
                    .chunks(chunk)
                    .enumerate()
                    .map(|(w, shard)| {
                        let mut view = SharedView(&shared);
                        let (cfg, vocab, progress, schedule) = (&cfg, &model.vocab, &progress, &schedule);
                        s.spawn(move || {
                            let mut rng =
                                ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2, epoch as u64, w as u64]));
                            run_shard(&mut view, cfg, vocab, docs, shard, &mut rng, progress, schedule)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .collect()
            });
            let SharedParams { docs: d, words, output } = shared;
            model.params.docs = d.into_matrix(model.params.docs.rows());
            model.params.words = words.into_matrix(model.params.words.rows());
            model.params.output = output.into_matrix(model.params.output.rows());
            results.into_iter().fold((0.0, 0), |(l, c), (l2, c2)| (l + l2, c + c2))
        };
        report.updates += count;
        report
            .epoch_loss
            .push(if count > 0 { loss / count as f64 } else { 0.0 });
    }

    if !cfg.architecture.learns_documents() {
        compose_doc_vectors(model, docs);
    }
    Ok(report)
}

fn compose_doc_vectors(model: &mut EmbeddingModel, docs: &[TokenizedDoc]) {
    let d = model.dim();
    let mut sums = vec![0.0f64; model.n_docs() * d];
    let mut counts = vec![0usize; model.n_docs()];
    for doc in docs {
        counts[doc.doc_tag] += doc.tokens.len();
        let acc = &mut sums[doc.doc_tag * d..(doc.doc_tag + 1) * d];
        for &t in &doc.tokens {
            for (a, &w) in acc.iter_mut().zip(model.params.words.row(t as usize)) {
                *a += w as f64;
            }
        }
    }
    for (tag, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let row = model.params.docs.row_mut(tag);
        for (r, &s) in row.iter_mut().zip(&sums[tag * d..(tag + 1) * d]) {
            *r = (s / n as f64) as f32;
        }
    }
}

/// Initializes a model from `corpus` and trains it.
pub fn fit(corpus: &Corpus, cfg: &TrainConfig) -> Result<(EmbeddingModel, TrainReport)> {
    let mut model = EmbeddingModel::from_corpus(corpus, cfg)?;
    let report = train(&mut model, &corpus.docs)?;
    Ok((model, report))
}

/// Mean loss per update over `docs`, without changing the model.
///
/// Documents are visited in the given order with no subsampling; window reaches and
/// noise samples come from `probe_seed`, so repeated calls agree exactly.
pub fn loss_estimate(model: &EmbeddingModel, docs: &[TokenizedDoc], probe_seed: u64) -> f64 {
    let cfg = &model.config;
    let mut rng = ChaCha8Rng::seed_from_u64(probe_seed);
    let mut scratch = Scratch::new(cfg.dim);
    let mut params = ReadOnly(&model.params);
    let mut units = Vec::new();
    let mut sum = 0.0f64;
    let mut n = 0u64;
    for doc in docs {
        for pos in 0..doc.tokens.len() {
            let reach = rng.random_range(1..=cfg.window);
            units.clear();
            units_at(
                cfg.architecture,
                cfg.objective,
                &model.vocab,
                doc.doc_tag,
                &doc.tokens,
                pos,
                reach,
                &mut rng,
                &mut units,
            );
            for unit in &units {
                sum += apply_unit(&mut params, unit, None, &mut scratch) as f64;
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferOptions {
    pub epochs: usize,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub seed: u64,
}

impl InferOptions {
    /// Twice the training epochs at the training learning rates.
    pub fn from_config(cfg: &TrainConfig) -> Self {
        InferOptions {
            epochs: cfg.infer_epochs(),
            alpha0: cfg.alpha0,
            alpha_min: cfg.alpha_min,
            seed: cfg.seed,
        }
    }
}

/// Learns a vector for an unseen document with word and output parameters frozen.
///
/// `runs` are the document's token runs (the reading frames in non-overlapping mode).
/// Ids outside the vocabulary are dropped. For DM and DBOW a fresh vector, initialized
/// like a training row, is fitted by SGD for `opts.epochs` passes; CBOW and skip-gram
/// models return the mean word vector instead.
pub fn infer_doc(model: &EmbeddingModel, runs: &[Vec<TokenId>], opts: &InferOptions) -> Result<Vec<f32>> {
    let v = model.vocab.len() as TokenId;
    let runs: Vec<Vec<TokenId>> = runs
        .iter()
        .map(|r| r.iter().copied().filter(|&t| t < v).collect::<Vec<_>>())
        .filter(|r| !r.is_empty())
        .collect();
    if runs.is_empty() {
        return Err(Error::NoKnownTokens);
    }
    let cfg = &model.config;
    let d = cfg.dim;
    if !cfg.architecture.learns_documents() {
        let mut acc = vec![0.0f64; d];
        let mut n = 0usize;
        for &t in runs.iter().flatten() {
            for (a, &w) in acc.iter_mut().zip(model.params.words.row(t as usize)) {
                *a += w as f64;
            }
            n += 1;
        }
        return Ok(acc.into_iter().map(|a| (a / n as f64) as f32).collect());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let doc = init_vector(d, &mut rng);
    let mut store = FrozenStore {
        doc,
        words: &model.params.words,
        output: &model.params.output,
    };
    let per_pass: u64 = runs.iter().map(|r| r.len() as u64).sum();
    let schedule = Schedule {
        alpha0: opts.alpha0,
        alpha_min: opts.alpha_min.min(opts.alpha0),
        total: per_pass * opts.epochs as u64,
    };
    let mut scratch = Scratch::new(d);
    let mut units = Vec::new();
    let mut done = 0u64;
    for _ in 0..opts.epochs {
        for run in &runs {
            for pos in 0..run.len() {
                let lr = schedule.rate(done);
                done += 1;
                let reach = rng.random_range(1..=cfg.window);
                units.clear();
                units_at(
                    cfg.architecture,
                    cfg.objective,
                    &model.vocab,
                    0,
                    run,
                    pos,
                    reach,
                    &mut rng,
                    &mut units,
                );
                for unit in &units {
                    apply_unit(&mut store, unit, Some(lr), &mut scratch);
                }
            }
        }
    }
    Ok(store.doc)
}

/// Tokenizes `residues` with the model's stored tokenizer settings and infers its vector.
pub fn infer_sequence(model: &EmbeddingModel, residues: &str, opts: &InferOptions) -> Result<Vec<f32>> {
    let runs: Vec<Vec<TokenId>> = model
        .tokenizer
        .split(residues)?
        .into_iter()
        .map(|run| model.vocab.encode(run))
        .collect();
    infer_doc(model, &runs, opts)
}
