//! Paragraph-vector and word2vec training over tokenized sequences.
//!
//! Four architectures share one update path (see [`units_at`]): CBOW and
//! skip-gram learn word vectors only, DM and DBOW additionally learn one vector
//! per document. Output probabilities use either negative sampling or a
//! hierarchical softmax over the vocabulary's Huffman tree.

mod matrix;
mod objective;
mod step;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use matrix::Matrix;
pub use objective::{
    neg_log_sigmoid, objective_gradient, objective_loss, output_terms, sigmoid, ObjectiveGradient, OutputTerm,
    MAX_NEGATIVE_REDRAWS,
};
pub use step::{unit_gradient, unit_loss, units_at, Params, Slot, Unit, UnitGradient};
pub use train::{fit, infer_doc, infer_sequence, loss_estimate, train, InferOptions, TrainReport};

use crate::error::{Error, Result};
use crate::tokenizer::{Corpus, TokenizerConfig, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Architecture {
    Cbow,
    SkipGram,
    #[default]
    Dm,
    Dbow,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Cbow => "cbow",
            Architecture::SkipGram => "sg",
            Architecture::Dm => "dm",
            Architecture::Dbow => "dbow",
        }
    }

    /// Whether the architecture trains document vectors directly.
    pub fn learns_documents(self) -> bool {
        matches!(self, Architecture::Dm | Architecture::Dbow)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cbow" => Ok(Architecture::Cbow),
            "sg" | "skipgram" | "skip-gram" => Ok(Architecture::SkipGram),
            "dm" => Ok(Architecture::Dm),
            "dbow" => Ok(Architecture::Dbow),
            _ => Err(Error::InvalidConfig(format!("unknown architecture {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    /// Number of noise samples per positive example.
    NegativeSampling(usize),
    HierarchicalSoftmax,
}

impl Default for Objective {
    fn default() -> Self {
        Objective::NegativeSampling(5)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::NegativeSampling(n) => write!(f, "ns:{n}"),
            Objective::HierarchicalSoftmax => f.write_str("hs"),
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    /// `hs`, `ns` (5 negatives) or `ns:N`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hs" => Ok(Objective::HierarchicalSoftmax),
            "ns" => Ok(Objective::NegativeSampling(5)),
            _ => s
                .strip_prefix("ns:")
                .and_then(|n| n.parse().ok())
                .map(Objective::NegativeSampling)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown objective {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub dim: usize,
    /// Maximum context reach; each position draws its reach uniformly from `1..=window`.
    pub window: usize,
    pub objective: Objective,
    /// Subsampling threshold; 0 disables subsampling.
    pub subsample_t: f64,
    pub epochs: usize,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            architecture: Architecture::Dm,
            dim: 250,
            window: 5,
            objective: Objective::default(),
            subsample_t: 0.0,
            epochs: 20,
            alpha0: 0.025,
            alpha_min: 0.025 / 10_000.0,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dimension must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return bad("initial learning rate must lie in (0, 1]");
        }
        if !(self.alpha_min >= 0.0 && self.alpha_min < self.alpha0) {
            return bad("minimum learning rate must lie in [0, alpha0)");
        }
        if !(self.subsample_t >= 0.0 && self.subsample_t.is_finite()) {
            return bad("subsampling threshold must be a finite non-negative number");
        }
        if self.objective == Objective::NegativeSampling(0) {
            return bad("negative sampling needs at least one negative");
        }
        Ok(())
    }

    /// Default inference passes: twice the training epochs.
    pub fn infer_epochs(&self) -> usize {
        2 * self.epochs
    }
}

/// Trained (or freshly initialized) parameters with everything needed to embed new sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub params: Params<f32>,
    pub vocab: Vocabulary,
    pub config: TrainConfig,
    pub tokenizer: TokenizerConfig,
    /// Sequence id of each document row.
    pub doc_ids: Vec<String>,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_vector(&self, tag: usize) -> &[f32] {
        self.params.docs.row(tag)
    }

    /// Number of output rows the objective needs for a vocabulary of size `v`.
    pub fn output_rows(objective: Objective, v: usize) -> usize {
        match objective {
            Objective::NegativeSampling(_) => v,
            Objective::HierarchicalSoftmax => v.saturating_sub(1),
        }
    }

    /// Builds a model whose doc rows are the given sequence ids.
    pub fn new(vocab: Vocabulary, doc_ids: Vec<String>, tokenizer: TokenizerConfig, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if vocab.is_empty() {
            return Err(Error::VocabularyTooSmall(0, 1));
        }
        if cfg.objective == Objective::HierarchicalSoftmax && vocab.len() < 2 {
            return Err(Error::VocabularyTooSmall(vocab.len(), 2));
        }
        if doc_ids.is_empty() {
            return Err(Error::Empty("document list"));
        }
        let d = cfg.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let docs = uniform_init(doc_ids.len(), d, &mut rng);
        let words = uniform_init(vocab.len(), d, &mut rng);
        let output = Matrix::zeros(Self::output_rows(cfg.objective, vocab.len()), d);
        Ok(EmbeddingModel {
            params: Params { docs, words, output },
            vocab,
            config: *cfg,
            tokenizer,
            doc_ids,
        })
    }

    pub fn from_corpus(corpus: &Corpus, cfg: &TrainConfig) -> Result<Self> {
        Self::new(corpus.vocab.clone(), corpus.doc_ids.clone(), corpus.config, cfg)
    }
}

/// Fresh model with `n_docs` anonymous documents (`doc0`, `doc1`, ...).
///
/// Document and word rows are uniform in `[-0.5/d, 0.5/d]`; output rows start at zero.
pub fn init_model(vocab: Vocabulary, n_docs: usize, cfg: &TrainConfig) -> Result<EmbeddingModel> {
    let ids = (0..n_docs).map(|i| format!("doc{i}")).collect();
    EmbeddingModel::new(vocab, ids, TokenizerConfig::default(), cfg)
}

pub(crate) fn init_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f32> {
    let half = 0.5 / dim as f32;
    (0..dim).map(|_| rng.random_range(-half..=half)).collect()
}

fn uniform_init<R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Matrix<f32> {
    let data = (0..rows).flat_map(|_| init_vector(dim, rng)).collect();
    Matrix::from_vec(rows, dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(v: usize) -> Vocabulary {
        Vocabulary::new((0..v).map(|i| (format!("T{i}"), (i + 1) as u64)).collect(), 1).unwrap()
    }

    fn cfg(dim: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            dim,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_model(vocab(6), 3, &cfg(4, 7)).unwrap();
        let b = init_model(vocab(6), 3, &cfg(4, 7)).unwrap();
        assert_eq!(a, b);
        let bound = 0.5 / 4.0;
        assert!(a.params.words.as_slice().iter().all(|x| x.abs() <= bound));
        assert!(a.params.docs.as_slice().iter().all(|x| x.abs() <= bound));
        assert!(a.params.output.as_slice().iter().all(|&x| x == 0.0));
        assert_eq!(a.params.output.rows(), 6);
        let c = init_model(vocab(6), 3, &cfg(4, 8)).unwrap();
        assert_ne!(a.params.words, c.params.words);
    }

    #[test]
    fn init_rejects_bad_shapes() {
        assert!(matches!(
            init_model(vocab(0), 3, &cfg(4, 7)),
            Err(Error::VocabularyTooSmall(0, 1))
        ));
        assert!(matches!(
            init_model(vocab(3), 3, &cfg(0, 7)),
            Err(Error::InvalidConfig(_))
        ));
        assert!(init_model(vocab(3), 0, &cfg(4, 7)).is_err());
        let hs = TrainConfig {
            objective: Objective::HierarchicalSoftmax,
            ..cfg(4, 1)
        };
        assert_eq!(init_model(vocab(5), 1, &hs).unwrap().params.output.rows(), 4);
        assert!(init_model(vocab(1), 1, &hs).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                alpha0: 5.0,
                ..Default::default()
            },
            TrainConfig {
                alpha_min: 0.5,
                ..Default::default()
            },
            TrainConfig {
                window: 0,
                ..Default::default()
            },
            TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                objective: Objective::NegativeSampling(0),
                ..Default::default()
            },
            TrainConfig {
                subsample_t: -1.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("sg".parse::<Architecture>().unwrap(), Architecture::SkipGram);
        assert_eq!("ns:3".parse::<Objective>().unwrap(), Objective::NegativeSampling(3));
        assert_eq!("hs".parse::<Objective>().unwrap(), Objective::HierarchicalSoftmax);
        assert!("ns:x".parse::<Objective>().is_err());
        assert_eq!(Objective::NegativeSampling(5).to_string(), "ns:5");
    }
}
