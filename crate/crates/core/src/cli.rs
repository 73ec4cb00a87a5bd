//! The `seqvec` command line.
//!
//! Exit codes: 0 on success, 1 for data errors, 2 for usage errors (bad flags or
//! invalid configuration). Diagnostics go to stderr; data goes to files or stdout.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::align::{align_topk, AlignParams, SubstitutionMatrix};
use crate::classify::{binary_family_protocol, multiclass_protocol, ProtocolConfig, SvmParams, MIN_FAMILY_SIZE};
use crate::embedding::{loss_estimate, train, Architecture, EmbeddingModel, InferOptions, Objective, TrainConfig};
use crate::error::{Error, Result};
use crate::io::{
    read_model, read_vectors, write_binary_report, write_knn_report, write_model, write_multiclass_report,
    write_vectors, VectorTable,
};
use crate::knn::{knn_cross_validate, majority_vote, Metric, ScoreKind, VectorIndex};
use crate::rng::derive_seed;
use crate::sequences::{load_family_labels, parse_fasta, Alphabet, Policy, SequenceRecord};
use crate::tokenizer::{build_corpus, read_corpus, write_corpus, TokenizerConfig};

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "SEQVEC_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "seqvec",
    version,
    about = "Kmer paragraph-vector embeddings of biological sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut FASTA sequences into kmer documents.
    Tokenize(TokenizeArgs),
    /// Train embeddings on a tokenized corpus.
    Train(TrainArgs),
    /// Export a model's document vectors as text.
    Vectors(VectorsArgs),
    /// Embed new sequences with a trained model.
    Infer(InferArgs),
    /// Cross-validated kNN family classification.
    KnnEval(KnnEvalArgs),
    /// Cross-validated linear-SVM family classification.
    SvmEval(SvmEvalArgs),
    /// Classify query sequences by Smith-Waterman top-k voting.
    AlignKnn(AlignKnnArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlphabetArg {
    Protein,
    Dna,
}

impl AlphabetArg {
    fn alphabet(self) -> Alphabet {
        match self {
            AlphabetArg::Protein => Alphabet::protein(),
            AlphabetArg::Dna => Alphabet::dna(),
        }
    }
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "protein")]
    pub alphabet: AlphabetArg,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value = "nonoverlap")]
    pub mode: String,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    /// Replace residues outside the alphabet with its wildcard instead of failing.
    #[arg(long)]
    pub replace_invalid: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "dm")]
    pub arch: String,
    #[arg(long, default_value_t = 250)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value = "ns:5")]
    pub objective: String,
    #[arg(long, default_value_t = 0.0)]
    pub subsample: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct VectorsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "protein")]
    pub alphabet: AlphabetArg,
    /// Defaults to twice the training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct KnnEvalArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
    pub k: Vec<usize>,
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SvmMode {
    Binary,
    Multiclass,
}

#[derive(Debug, Args)]
pub struct SvmEvalArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    pub mode: SvmMode,
    /// Largest families to evaluate (binary: all eligible, multiclass: 25).
    #[arg(long)]
    pub top_n: Option<usize>,
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignKnnArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// `blosum62` or the path of an NCBI-format matrix file.
    #[arg(long, default_value = "blosum62")]
    pub matrix: String,
    #[arg(long, default_value_t = -11, allow_hyphen_values = true)]
    pub gap_open: i32,
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    pub gap_extend: i32,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match command {
        Command::Tokenize(a) => cmd_tokenize(&a, stdout, stderr),
        Command::Train(a) => cmd_train(&a, stdout, stderr),
        Command::Vectors(a) => cmd_vectors(&a, stdout),
        Command::Infer(a) => cmd_infer(&a, stdout, stderr),
        Command::KnnEval(a) => cmd_knn_eval(&a, stdout, stderr),
        Command::SvmEval(a) => cmd_svm_eval(&a, stdout, stderr),
        Command::AlignKnn(a) => cmd_align_knn(&a, stdout, stderr),
    }
}

fn resolve_seed(seed: Option<u64>) -> Result<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_fasta(path: &Path, alphabet: &Alphabet, policy: Policy) -> Result<Vec<SequenceRecord>> {
    parse_fasta(open(path)?, alphabet, policy)
}

fn load_labels(path: &Path, stderr: &mut dyn Write) -> Result<HashMap<String, String>> {
    let labels = load_family_labels(open(path)?)?;
    if labels.duplicates > 0 {
        writeln!(
            stderr,
            "warning: {} duplicate label lines, later lines kept",
            labels.duplicates
        )?;
    }
    Ok(labels.labels)
}

/// Writes a report to `output` or, when absent, to stdout.
fn emit(output: &Option<PathBuf>, stdout: &mut dyn Write, body: &[u8]) -> Result<()> {
    match output {
        Some(p) => {
            let mut f = create(p)?;
            f.write_all(body)?;
            f.flush()?;
        }
        None => stdout.write_all(body)?,
    }
    Ok(())
}

pub fn cmd_tokenize(a: &TokenizeArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = TokenizerConfig {
        k: a.k,
        mode: a.mode.parse()?,
    };
    cfg.validate()?;
    let policy = if a.replace_invalid {
        Policy::Replace
    } else {
        Policy::Strict
    };
    let records = match read_fasta(&a.input, &a.alphabet.alphabet(), policy) {
        Err(Error::Empty(_)) => return Err(Error::EmptyCorpus),
        other => other?,
    };
    let corpus = build_corpus(&records, cfg, a.min_count)?;
    for s in &corpus.skipped {
        writeln!(stderr, "warning: skipped {}: {}", s.id, s.reason)?;
    }
    let mut out = create(&a.output)?;
    write_corpus(&corpus, &mut out)?;
    out.flush()?;
    writeln!(stdout, "vocabulary\t{}", corpus.vocab.len())?;
    writeln!(stdout, "documents\t{}", corpus.n_docs())?;
    writeln!(stdout, "dropped\t{}", corpus.skipped.len())?;
    Ok(())
}

pub fn cmd_train(a: &TrainArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = TrainConfig {
        architecture: a.arch.parse::<Architecture>()?,
        dim: a.dim,
        window: a.window,
        objective: a.objective.parse::<Objective>()?,
        subsample_t: a.subsample,
        epochs: a.epochs,
        alpha0: a.alpha,
        alpha_min: a.alpha / 10_000.0,
        seed: resolve_seed(a.seed)?,
        workers: a.workers,
    };
    cfg.validate()?;
    let corpus = read_corpus(open(&a.corpus)?)?;
    let mut model = EmbeddingModel::from_corpus(&corpus, &cfg)?;
    let probe = derive_seed(cfg.seed, &[9]);
    let before = loss_estimate(&model, &corpus.docs, probe);
    let report = train(&mut model, &corpus.docs)?;
    let after = loss_estimate(&model, &corpus.docs, probe);
    for (i, l) in report.epoch_loss.iter().enumerate() {
        writeln!(stderr, "epoch {}: mean loss {l:.5}", i + 1)?;
    }
    let mut out = create(&a.output)?;
    write_model(&model, &mut out)?;
    out.flush()?;
    writeln!(stdout, "initial_loss\t{before:.6}")?;
    writeln!(stdout, "final_loss\t{after:.6}")?;
    Ok(())
}

fn f32_rows(t: &VectorTable) -> Vec<Vec<f32>> {
    t.vectors
        .iter()
        .map(|v| v.iter().map(|&x| x as f32).collect())
        .collect()
}

pub fn cmd_vectors(a: &VectorsArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = read_model(open(&a.model)?)?;
    let table = VectorTable::from_model(&model);
    write_vectors(&table.ids, &f32_rows(&table), create(&a.output)?)?;
    writeln!(stdout, "vectors\t{}\ndim\t{}", table.ids.len(), table.dim())?;
    Ok(())
}

pub fn cmd_infer(a: &InferArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let model = read_model(open(&a.model)?)?;
    let records = read_fasta(&a.input, &a.alphabet.alphabet(), Policy::Strict)?;
    let seed = resolve_seed(a.seed)?;
    let mut opts = InferOptions::from_config(&model.config);
    if let Some(e) = a.epochs {
        opts.epochs = e;
    }
    let mut ids = Vec::new();
    let mut vectors = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let o = InferOptions {
            seed: derive_seed(seed, &[i as u64]),
            ..opts
        };
        match crate::embedding::infer_sequence(&model, &rec.residues, &o) {
            Ok(v) => {
                ids.push(rec.id.clone());
                vectors.push(v);
            }
            Err(e @ (Error::NoKnownTokens | Error::SequenceTooShort { .. })) => {
                writeln!(stderr, "warning: skipped {}: {e}", rec.id)?;
            }
            Err(e) => return Err(e),
        }
    }
    if ids.is_empty() {
        return Err(Error::Empty("no sequence could be embedded"));
    }
    write_vectors(&ids, &vectors, create(&a.output)?)?;
    writeln!(stdout, "vectors\t{}", ids.len())?;
    Ok(())
}

fn labeled_index(vectors: &Path, labels: &Path, metric: Metric, stderr: &mut dyn Write) -> Result<VectorIndex> {
    let table = read_vectors(open(vectors)?)?;
    let labels = load_labels(labels, stderr)?;
    let unlabeled = table.ids.iter().filter(|id| !labels.contains_key(*id)).count();
    if unlabeled > 0 {
        writeln!(
            stderr,
            "warning: {unlabeled} vectors have no family label and are ignored"
        )?;
    }
    Ok(VectorIndex::new(table.ids, table.vectors, metric)?.with_labels(&labels))
}

pub fn cmd_knn_eval(a: &KnnEvalArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let metric: Metric = a.metric.parse()?;
    let index = labeled_index(&a.vectors, &a.labels, metric, stderr)?;
    let report = knn_cross_validate(&index, a.folds, &a.k, resolve_seed(a.seed)?)?;
    if !report.dropped_families.is_empty() {
        writeln!(
            stderr,
            "warning: {} families with fewer than {} members dropped: {}",
            report.dropped_families.len(),
            a.folds,
            report.dropped_families.join(",")
        )?;
    }
    let mut body = Vec::new();
    write_knn_report(&report, &mut body)?;
    emit(&a.output, stdout, &body)
}

pub fn cmd_svm_eval(a: &SvmEvalArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = ProtocolConfig {
        folds: a.folds,
        svm: SvmParams {
            c: a.c,
            epochs: a.epochs,
            ..Default::default()
        },
        seed: resolve_seed(a.seed)?,
    };
    let index = labeled_index(&a.vectors, &a.labels, Metric::Euclidean, stderr)?;
    let mut body = Vec::new();
    match a.mode {
        SvmMode::Multiclass => {
            let top_n = a.top_n.unwrap_or(25);
            let r = multiclass_protocol(&index, top_n, &cfg)?;
            if r.clamped {
                writeln!(
                    stderr,
                    "warning: only {} families available, fewer than top-n {top_n}",
                    r.families.len()
                )?;
            }
            for w in r.report.warnings() {
                writeln!(stderr, "warning: {w}")?;
            }
            write_multiclass_report(r.families.len(), &r.report, &mut body)?;
        }
        SvmMode::Binary => {
            let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
            for i in 0..index.len() {
                if let Some(l) = index.label(i) {
                    *sizes.entry(l.to_string()).or_default() += 1;
                }
            }
            let min = MIN_FAMILY_SIZE.max(a.folds);
            let mut eligible: Vec<(String, usize)> = sizes.into_iter().filter(|(_, n)| *n >= min).collect();
            eligible.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
            if let Some(n) = a.top_n {
                if n > eligible.len() {
                    writeln!(
                        stderr,
                        "warning: only {} families have at least {min} members",
                        eligible.len()
                    )?;
                }
                eligible.truncate(n);
            }
            if eligible.is_empty() {
                return Err(Error::TooFewFamilies { need: 1, found: 0 });
            }
            let mut rows = Vec::new();
            for (family, size) in eligible {
                let r = binary_family_protocol(&index, &family, &cfg)?;
                for w in r.warnings() {
                    writeln!(stderr, "warning: {family}: {w}")?;
                }
                rows.push((family, size, r));
            }
            write_binary_report(&rows, &mut body)?;
        }
    }
    emit(&a.output, stdout, &body)
}

pub fn cmd_align_knn(a: &AlignKnnArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let matrix = if a.matrix.eq_ignore_ascii_case("blosum62") {
        SubstitutionMatrix::blosum62()
    } else {
        let text = std::fs::read_to_string(&a.matrix)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", a.matrix))))?;
        SubstitutionMatrix::from_ncbi_text(&a.matrix, &text)?
    };
    let params = AlignParams::new(matrix, a.gap_open, a.gap_extend)?;
    let alphabet = Alphabet::protein();
    let db = read_fasta(&a.db, &alphabet, Policy::Strict)?;
    let queries = read_fasta(&a.query, &alphabet, Policy::Strict)?;
    let labels = load_labels(&a.labels, stderr)?;
    let labeled: Vec<SequenceRecord> = db.into_iter().filter(|r| labels.contains_key(&r.id)).collect();
    let mut body = Vec::new();
    writeln!(body, "query\tpredicted\tbest_hit\tbest_score")?;
    for q in &queries {
        let hits = align_topk(&labeled, q, a.k, &params)?;
        let predicted = majority_vote(&hits, &labels, ScoreKind::Similarity)?;
        writeln!(body, "{}\t{}\t{}\t{}", q.id, predicted, hits[0].id, hits[0].score)?;
    }
    emit(&a.output, stdout, &body)
}
