//! Kmer tokenization, vocabulary construction and Huffman coding.
//!
//! Two schemes turn a sequence into documents of kmer "words":
//!
//! * **non-overlapping**: `k` reading frames, frame `p` starting at offset `p`
//!   and stepping `k` letters at a time. `QWERTYQWERTY` with `k = 3` gives
//!   `QWE RTY QWE RTY`, `WER TYQ WER` and `ERT YQW ERT`. All frames of a
//!   sequence share one document tag, so each sequence still gets exactly one
//!   vector.
//! * **overlapping**: a single document of every window shifted by one letter.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sequences::SequenceRecord;

pub type TokenId = u32;

/// Exponent applied to counts in the negative-sampling distribution.
pub const NOISE_EXPONENT: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    NonOverlapping,
    Overlapping,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::NonOverlapping => "nonoverlap",
            Mode::Overlapping => "overlap",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonoverlap" | "non-overlapping" => Ok(Mode::NonOverlapping),
            "overlap" | "overlapping" => Ok(Mode::Overlapping),
            _ => Err(Error::InvalidConfig(format!("unknown tokenizer mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerConfig {
    pub k: usize,
    pub mode: Mode,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            k: 3,
            mode: Mode::NonOverlapping,
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("kmer length must be at least 1".into()));
        }
        Ok(())
    }

    /// Shortest sequence this configuration can tokenize.
    pub fn min_length(&self) -> usize {
        match self.mode {
            Mode::Overlapping => self.k,
            Mode::NonOverlapping => 2 * self.k - 1,
        }
    }

    /// Splits residues into token runs: one per frame, or a single overlapping run.
    pub fn split<'a>(&self, residues: &'a str) -> Result<Vec<Vec<&'a str>>> {
        match self.mode {
            Mode::Overlapping => Ok(vec![kmers_overlapping(residues, self.k)?]),
            Mode::NonOverlapping => kmers_nonoverlapping(residues, self.k),
        }
    }
}

fn too_short(len: usize, need: usize) -> Error {
    Error::SequenceTooShort {
        id: String::new(),
        len,
        need,
    }
}

/// Every window of length `k`, shifted one letter at a time.
pub fn kmers_overlapping(residues: &str, k: usize) -> Result<Vec<&str>> {
    if k == 0 {
        return Err(Error::InvalidConfig("kmer length must be at least 1".into()));
    }
    if !residues.is_ascii() {
        return Err(Error::InvalidConfig("residues must be ASCII".into()));
    }
    let n = residues.len();
    if n < k {
        return Err(too_short(n, k));
    }
    Ok((0..=n - k).map(|i| &residues[i..i + k]).collect())
}

/// The `k` non-overlapping reading frames; trailing partial kmers are dropped.
pub fn kmers_nonoverlapping(residues: &str, k: usize) -> Result<Vec<Vec<&str>>> {
    if k == 0 {
        return Err(Error::InvalidConfig("kmer length must be at least 1".into()));
    }
    if !residues.is_ascii() {
        return Err(Error::InvalidConfig("residues must be ASCII".into()));
    }
    let n = residues.len();
    if n < 2 * k - 1 {
        return Err(too_short(n, 2 * k - 1));
    }
    Ok((0..k)
        .map(|p| {
            residues.as_bytes()[p..]
                .chunks_exact(k)
                .enumerate()
                .map(|(i, _)| &residues[p + i * k..p + (i + 1) * k])
                .collect()
        })
        .collect())
}

/// One Huffman code: bits and inner-node indices from the root down.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanCode {
    pub bits: Vec<bool>,
    pub nodes: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Huffman {
    codes: Vec<HuffmanCode>,
}

impl Huffman {
    pub fn code(&self, token: TokenId) -> &HuffmanCode {
        &self.codes[token as usize]
    }

    pub fn codes(&self) -> &[HuffmanCode] {
        &self.codes
    }

    pub fn inner_nodes(&self) -> usize {
        self.codes.len() - 1
    }
}

/// Builds a binary Huffman tree over `counts`.
///
/// The two lightest nodes are merged first; equal weights go to the lower node id
/// (leaves are `0..V`, inner nodes follow in creation order). The first node of a
/// merged pair gets bit `false`. Inner node `j` is the `j`-th merge; the root is `V - 2`.
pub fn build_huffman(counts: &[u64]) -> Result<Huffman> {
    let v = counts.len();
    if v < 2 {
        return Err(Error::VocabularyTooSmall(v, 2));
    }
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        counts.iter().enumerate().map(|(i, &c)| Reverse((c, i))).collect();
    let mut parent = vec![0usize; 2 * v - 1];
    let mut bit = vec![false; 2 * v - 1];
    for next in v..2 * v - 1 {
        let Reverse((ca, a)) = heap.pop().unwrap();
        let Reverse((cb, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        bit[b] = true;
        heap.push(Reverse((ca + cb, next)));
    }
    let root = 2 * v - 2;
    let codes = (0..v)
        .map(|leaf| {
            let mut bits = Vec::new();
            let mut nodes = Vec::new();
            let mut node = leaf;
            while node != root {
                bits.push(bit[node]);
                nodes.push((parent[node] - v) as u32);
                node = parent[node];
            }
            bits.reverse();
            nodes.reverse();
            HuffmanCode { bits, nodes }
        })
        .collect();
    Ok(Huffman { codes })
}

/// Kmer strings with dense ids, their counts and derived sampling structures.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, TokenId>,
    total: u64,
    min_count: u64,
    sampling_table: Vec<f64>,
    huffman: Option<Huffman>,
}

impl Vocabulary {
    /// Builds a vocabulary keeping tokens with `count >= min_count`, in the given order.
    pub fn new(entries: Vec<(String, u64)>, min_count: u64) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        let mut index = HashMap::new();
        for (tok, count) in entries {
            if count < min_count || count == 0 {
                continue;
            }
            if index.insert(tok.clone(), tokens.len() as TokenId).is_some() {
                return Err(Error::InvalidConfig(format!("token {tok:?} repeated in vocabulary")));
            }
            tokens.push(tok);
            counts.push(count);
        }
        let total = counts.iter().sum();
        let sampling_table = noise_table(&counts);
        let huffman = if counts.len() >= 2 {
            Some(build_huffman(&counts)?)
        } else {
            None
        };
        Ok(Vocabulary {
            tokens,
            counts,
            index,
            total,
            min_count,
            sampling_table,
            huffman,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, id: TokenId) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Cumulative noise distribution, proportional to `count^0.75`, ending at 1.
    pub fn sampling_table(&self) -> &[f64] {
        &self.sampling_table
    }

    pub fn huffman(&self) -> Option<&Huffman> {
        self.huffman.as_ref()
    }

    /// Draws a token from the noise distribution.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> TokenId {
        let u: f64 = rng.random();
        let i = self.sampling_table.partition_point(|&c| c <= u);
        i.min(self.tokens.len() - 1) as TokenId
    }

    /// Corpus frequency of a token.
    pub fn frequency(&self, id: TokenId) -> f64 {
        self.counts[id as usize] as f64 / self.total as f64
    }

    /// Maps kmers to ids, dropping unknown ones.
    pub fn encode<'a>(&self, kmers: impl IntoIterator<Item = &'a str>) -> Vec<TokenId> {
        kmers.into_iter().filter_map(|k| self.id(k)).collect()
    }
}

fn noise_table(counts: &[u64]) -> Vec<f64> {
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(NOISE_EXPONENT)).collect();
    let sum: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut table: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc / sum
        })
        .collect();
    if let Some(last) = table.last_mut() {
        *last = 1.0;
    }
    table
}

/// Probability that a token of corpus frequency `f` survives subsampling at threshold `t`.
pub fn keep_probability(f: f64, t: f64) -> f64 {
    let r = t / f;
    (r.sqrt() + r).min(1.0)
}

/// Randomly drops frequent tokens; survivors keep their order.
pub fn subsample_filter<R: Rng + ?Sized>(tokens: &[TokenId], vocab: &Vocabulary, t: f64, rng: &mut R) -> Vec<TokenId> {
    tokens
        .iter()
        .copied()
        .filter(|&tok| {
            let p = keep_probability(vocab.frequency(tok), t);
            p >= 1.0 || rng.random::<f64>() < p
        })
        .collect()
}

/// A run of token ids belonging to one source sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub doc_tag: usize,
    /// Reading frame in non-overlapping mode, always 0 in overlapping mode.
    pub phase: usize,
    pub tokens: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

/// Tokenized documents with their vocabulary.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub config: TokenizerConfig,
    pub docs: Vec<TokenizedDoc>,
    pub vocab: Vocabulary,
    /// Sequence id for every doc tag.
    pub doc_ids: Vec<String>,
    pub skipped: Vec<Skipped>,
}

impl Corpus {
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }
}

/// Tokenizes records and builds the vocabulary.
///
/// Token ids follow first occurrence. Records too short for the configuration, or left
/// without tokens after `min_count` filtering, are skipped and listed in `skipped`.
pub fn build_corpus(records: &[SequenceRecord], cfg: TokenizerConfig, min_count: u64) -> Result<Corpus> {
    cfg.validate()?;
    let mut skipped = Vec::new();
    let mut split = Vec::with_capacity(records.len());
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for rec in records {
        match cfg.split(&rec.residues) {
            Ok(runs) => {
                for kmer in runs.iter().flatten() {
                    let slot = *seen.entry(kmer).or_insert_with(|| {
                        order.push((kmer.to_string(), 0));
                        order.len() - 1
                    });
                    order[slot].1 += 1;
                }
                split.push((rec, runs));
            }
            Err(_) => skipped.push(Skipped {
                id: rec.id.clone(),
                reason: format!("length {} below minimum {}", rec.len(), cfg.min_length()),
            }),
        }
    }
    let vocab = Vocabulary::new(order, min_count.max(1))?;

    let mut docs = Vec::new();
    let mut doc_ids = Vec::new();
    for (rec, runs) in split {
        let tag = doc_ids.len();
        let before = docs.len();
        for (phase, run) in runs.into_iter().enumerate() {
            let tokens = vocab.encode(run);
            if !tokens.is_empty() {
                docs.push(TokenizedDoc {
                    doc_tag: tag,
                    phase,
                    tokens,
                });
            }
        }
        if docs.len() == before {
            skipped.push(Skipped {
                id: rec.id.clone(),
                reason: "no kmers left after min-count filtering".into(),
            });
        } else {
            doc_ids.push(rec.id.clone());
        }
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Corpus {
        config: cfg,
        docs,
        vocab,
        doc_ids,
        skipped,
    })
}

const CORPUS_MAGIC: &str = "#seqvec-corpus";

/// Writes the text corpus format.
///
/// `#` lines carry the tokenizer settings and the sequence id of each doc tag; every other
/// line is one document: `doc_tag phase kmer kmer ...`.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    writeln!(
        out,
        "{CORPUS_MAGIC} k={} mode={} min_count={}",
        corpus.config.k,
        corpus.config.mode,
        corpus.vocab.min_count()
    )?;
    for (tag, id) in corpus.doc_ids.iter().enumerate() {
        writeln!(out, "#doc {tag} {id}")?;
    }
    for doc in &corpus.docs {
        write!(out, "{} {}", doc.doc_tag, doc.phase)?;
        for &t in &doc.tokens {
            write!(out, " {}", corpus.vocab.token(t))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a corpus written by [`write_corpus`], rebuilding the vocabulary from its tokens.
pub fn read_corpus<R: BufRead>(input: R) -> Result<Corpus> {
    const SRC: &str = "corpus";
    let mut config = None;
    let mut min_count = 1;
    let mut doc_ids: Vec<String> = Vec::new();
    let mut raw: Vec<(usize, usize, Vec<String>)> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let ln = i + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(CORPUS_MAGIC) {
            let mut k = None;
            let mut mode = None;
            for field in rest.split_whitespace() {
                let (key, value) = field
                    .split_once('=')
                    .ok_or_else(|| Error::parse(SRC, ln, 1, format!("bad header field {field:?}")))?;
                match key {
                    "k" => k = value.parse::<usize>().ok(),
                    "mode" => mode = value.parse::<Mode>().ok(),
                    "min_count" => min_count = value.parse().map_err(|_| Error::parse(SRC, ln, 1, "bad min_count"))?,
                    _ => {}
                }
            }
            match (k, mode) {
                (Some(k), Some(mode)) if k > 0 => config = Some(TokenizerConfig { k, mode }),
                _ => return Err(Error::parse(SRC, ln, 1, "header needs k and mode")),
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("#doc ") {
            let mut parts = rest.split_whitespace();
            let tag: Option<usize> = parts.next().and_then(|t| t.parse().ok());
            let id = parts.next();
            match (tag, id) {
                (Some(tag), Some(id)) if tag == doc_ids.len() => doc_ids.push(id.to_string()),
                _ => return Err(Error::parse(SRC, ln, 1, "doc tags must be listed densely from 0")),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(' ');
        let tag = parts.next().and_then(|t| t.parse::<usize>().ok());
        let phase = parts.next().and_then(|t| t.parse::<usize>().ok());
        let (Some(tag), Some(phase)) = (tag, phase) else {
            return Err(Error::parse(SRC, ln, 1, "expected `doc_tag phase kmer...`"));
        };
        let kmers: Vec<String> = parts.filter(|s| !s.is_empty()).map(str::to_string).collect();
        if kmers.is_empty() {
            return Err(Error::parse(SRC, ln, 1, "document has no tokens"));
        }
        raw.push((tag, phase, kmers));
    }
    let config = config.ok_or_else(|| Error::parse(SRC, 1, 1, "missing corpus header"))?;
    if raw.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if doc_ids.is_empty() {
        let n = raw.iter().map(|d| d.0).max().unwrap() + 1;
        doc_ids = (0..n).map(|t| format!("doc{t}")).collect();
    }
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for kmer in raw.iter().flat_map(|d| d.2.iter()) {
        let slot = *seen.entry(kmer.clone()).or_insert_with(|| {
            order.push((kmer.clone(), 0));
            order.len() - 1
        });
        order[slot].1 += 1;
    }
    // Counts in the file already satisfy min_count; keep every token.
    let mut vocab = Vocabulary::new(order, 1)?;
    vocab.min_count = min_count;
    let mut docs = Vec::with_capacity(raw.len());
    for (tag, phase, kmers) in raw {
        if tag >= doc_ids.len() {
            return Err(Error::parse(SRC, 1, 1, format!("doc tag {tag} has no #doc entry")));
        }
        docs.push(TokenizedDoc {
            doc_tag: tag,
            phase,
            tokens: kmers.iter().map(|k| vocab.id(k).unwrap()).collect(),
        });
    }
    Ok(Corpus {
        config,
        docs,
        vocab,
        doc_ids,
        skipped: Vec::new(),
    })
}
