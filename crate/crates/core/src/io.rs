//! Persistence: the binary model file, the text vector format and TSV reports.
//!
//! Model file layout, all integers and floats little-endian:
//!
//! ```text
//! "SQV1"  version:u32
//! arch:u32 dim:u32 window:u32 objective:u32 negatives:u32 subsample_t:f64
//! epochs:u32 alpha0:f64 alpha_min:f64 seed:u64 k:u32 mode:u32 min_count:u64
//! V:u64   V × (len:u16 utf8 count:u64)
//! N:u64   N × (len:u16 utf8)
//! D (N×dim) W (V×dim) O (rows×dim) as f32, row-major
//! ```
//!
//! `O` has `V` rows under negative sampling and `V − 1` under hierarchical softmax.

use std::io::{BufRead, Read, Write};

use crate::classify::MetricsReport;
use crate::embedding::{Architecture, EmbeddingModel, Matrix, Objective, Params, TrainConfig};
use crate::error::{Error, Result};
use crate::knn::KnnReport;
use crate::stats::MeanStd;
use crate::tokenizer::{Mode, TokenizerConfig, Vocabulary};

pub const MAGIC: &[u8; 4] = b"SQV1";
pub const VERSION: u32 = 1;

const CONFIG_BYTES: usize = 4 * 5 + 8 + 4 + 8 + 8 + 8 + 4 + 4 + 8;

fn arch_code(a: Architecture) -> u32 {
    match a {
        Architecture::Cbow => 0,
        Architecture::SkipGram => 1,
        Architecture::Dm => 2,
        Architecture::Dbow => 3,
    }
}

fn mode_code(m: Mode) -> u32 {
    match m {
        Mode::NonOverlapping => 0,
        Mode::Overlapping => 1,
    }
}

pub fn write_model<W: Write>(model: &EmbeddingModel, out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    let c = &model.config;
    let (objective, negatives) = match c.objective {
        Objective::NegativeSampling(n) => (0u32, n as u32),
        Objective::HierarchicalSoftmax => (1, 0),
    };
    let mut buf = Vec::with_capacity(8 + CONFIG_BYTES);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for v in [
        arch_code(c.architecture),
        c.dim as u32,
        c.window as u32,
        objective,
        negatives,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&c.subsample_t.to_le_bytes());
    buf.extend_from_slice(&(c.epochs as u32).to_le_bytes());
    buf.extend_from_slice(&c.alpha0.to_le_bytes());
    buf.extend_from_slice(&c.alpha_min.to_le_bytes());
    buf.extend_from_slice(&c.seed.to_le_bytes());
    buf.extend_from_slice(&(model.tokenizer.k as u32).to_le_bytes());
    buf.extend_from_slice(&mode_code(model.tokenizer.mode).to_le_bytes());
    buf.extend_from_slice(&model.vocab.min_count().to_le_bytes());
    out.write_all(&buf)?;

    out.write_all(&(model.vocab.len() as u64).to_le_bytes())?;
    for (tok, &count) in model.vocab.tokens().iter().zip(model.vocab.counts()) {
        write_str(&mut out, tok)?;
        out.write_all(&count.to_le_bytes())?;
    }
    out.write_all(&(model.doc_ids.len() as u64).to_le_bytes())?;
    for id in &model.doc_ids {
        write_str(&mut out, id)?;
    }
    for m in [&model.params.docs, &model.params.words, &model.params.output] {
        for x in m.as_slice() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_str<W: Write>(out: &mut W, s: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::InvalidConfig(format!("string longer than 65535 bytes: {s:.20}...")))?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Byte cursor that reports failures with their offset.
struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::ModelFormat {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(self.fail(format!(
                "truncated while reading {what}: need {n} bytes, {} left",
                self.data.len() - self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let start = self.pos;
        let len = self.u16(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::ModelFormat {
            offset: start,
            message: format!("{what} is not UTF-8"),
        })
    }

    /// A count of items each at least `min_bytes` long, checked against what is left.
    fn count(&mut self, what: &str, min_bytes: usize) -> Result<usize> {
        let start = self.pos;
        let n = self.u64(what)?;
        if n > (self.remaining() / min_bytes) as u64 {
            return Err(Error::ModelFormat {
                offset: start,
                message: format!("{what} {n} exceeds the remaining {} bytes", self.remaining()),
            });
        }
        Ok(n as usize)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Matrix<f32> {
        let bytes = self.take(rows * cols * 4, "matrix").expect("length checked");
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }
}

/// Reads a model written by [`write_model`]. Magic and version are checked before the
/// rest of the file is read; any size disagreement is an error, never a partial model.
pub fn read_model<R: Read>(mut input: R) -> Result<EmbeddingModel> {
    let mut head = [0u8; 8];
    let mut got = 0;
    while got < head.len() {
        match input.read(&mut head[got..])? {
            0 => break,
            n => got += n,
        }
    }
    if got < 4 || &head[..4] != MAGIC {
        return Err(Error::ModelFormat {
            offset: 0,
            message: "not a seqvec model (bad magic)".into(),
        });
    }
    if got < 8 {
        return Err(Error::ModelFormat {
            offset: got,
            message: "truncated while reading version".into(),
        });
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::ModelFormat {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let mut rest = head.to_vec();
    input.read_to_end(&mut rest)?;
    let mut cur = Cursor { data: &rest, pos: 8 };

    let arch = match cur.u32("architecture")? {
        0 => Architecture::Cbow,
        1 => Architecture::SkipGram,
        2 => Architecture::Dm,
        3 => Architecture::Dbow,
        other => return Err(cur.fail(format!("unknown architecture code {other}"))),
    };
    let dim = cur.u32("dim")? as usize;
    let window = cur.u32("window")? as usize;
    let objective_code = cur.u32("objective")?;
    let negatives = cur.u32("negatives")? as usize;
    let objective = match objective_code {
        0 => Objective::NegativeSampling(negatives),
        1 => Objective::HierarchicalSoftmax,
        other => return Err(cur.fail(format!("unknown objective code {other}"))),
    };
    let config = TrainConfig {
        architecture: arch,
        dim,
        window,
        objective,
        subsample_t: cur.f64("subsample_t")?,
        epochs: cur.u32("epochs")? as usize,
        alpha0: cur.f64("alpha0")?,
        alpha_min: cur.f64("alpha_min")?,
        seed: cur.u64("seed")?,
        workers: 1,
    };
    let k = cur.u32("k")? as usize;
    let mode = match cur.u32("mode")? {
        0 => Mode::NonOverlapping,
        1 => Mode::Overlapping,
        other => return Err(cur.fail(format!("unknown tokenizer mode code {other}"))),
    };
    let min_count = cur.u64("min_count")?;
    let config_end = cur.pos;
    config.validate().map_err(|e| Error::ModelFormat {
        offset: config_end,
        message: format!("stored configuration is invalid: {e}"),
    })?;
    let tokenizer = TokenizerConfig { k, mode };

    let v = cur.count("vocabulary size", 10)?;
    let mut entries = Vec::with_capacity(v);
    for _ in 0..v {
        let tok = cur.string("token")?;
        let count = cur.u64("token count")?;
        entries.push((tok, count));
    }
    let vocab_end = cur.pos;
    let vocab = Vocabulary::new(entries, min_count).map_err(|e| Error::ModelFormat {
        offset: vocab_end,
        message: format!("bad vocabulary: {e}"),
    })?;
    if vocab.len() != v {
        return Err(Error::ModelFormat {
            offset: vocab_end,
            message: "vocabulary holds tokens below its min_count".into(),
        });
    }
    let n = cur.count("document count", 2)?;
    let doc_ids = (0..n).map(|_| cur.string("document id")).collect::<Result<Vec<_>>>()?;

    let out_rows = EmbeddingModel::output_rows(objective, v);
    let expected = (n as u128 + v as u128 + out_rows as u128) * dim as u128 * 4;
    if cur.remaining() as u128 != expected {
        return Err(cur.fail(format!(
            "matrix payload is {} bytes, shapes need {expected}",
            cur.remaining()
        )));
    }
    let docs = cur.matrix(n, dim);
    let words = cur.matrix(v, dim);
    let output = cur.matrix(out_rows, dim);
    Ok(EmbeddingModel {
        params: Params { docs, words, output },
        vocab,
        config,
        tokenizer,
        doc_ids,
    })
}

/// Vectors keyed by id, as stored in the text vector format.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    pub ids: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl VectorTable {
    pub fn from_model(model: &EmbeddingModel) -> Self {
        VectorTable {
            ids: model.doc_ids.clone(),
            vectors: model
                .params
                .docs
                .iter_rows()
                .map(|r| r.iter().map(|&x| f64::from(x)).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

/// `N d` header, then `id v1 ... vd` per line. Values print as the shortest decimal
/// that reads back to the same `f32`.
pub fn write_vectors<W: Write>(ids: &[String], vectors: &[Vec<f32>], out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    let d = vectors.first().map_or(0, Vec::len);
    writeln!(out, "{} {}", ids.len(), d)?;
    for (id, v) in ids.iter().zip(vectors) {
        write!(out, "{id}")?;
        for x in v {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_vectors<R: BufRead>(input: R) -> Result<VectorTable> {
    const SRC: &str = "vector file";
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Empty(SRC))?;
    let header = header?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n, d) = match fields[..] {
        [n, d] => match (n.parse::<usize>(), d.parse::<usize>()) {
            (Ok(n), Ok(d)) if d > 0 => (n, d),
            _ => return Err(Error::parse(SRC, 1, 1, "header must be \"N d\" with d >= 1")),
        },
        _ => return Err(Error::parse(SRC, 1, 1, "header must be \"N d\"")),
    };
    let mut table = VectorTable {
        ids: Vec::new(),
        vectors: Vec::new(),
    };
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let mut parts = line.split_whitespace();
        let id = parts.next().unwrap().to_string();
        let v = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::parse(SRC, line_no, 1, format!("bad number {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if v.len() != d {
            return Err(Error::parse(
                SRC,
                line_no,
                1,
                format!("expected {d} values, found {}", v.len()),
            ));
        }
        table.ids.push(id);
        table.vectors.push(v);
    }
    if table.ids.len() != n {
        return Err(Error::parse(
            SRC,
            1,
            1,
            format!("header declares {n} vectors, file has {}", table.ids.len()),
        ));
    }
    if n == 0 {
        return Err(Error::Empty(SRC));
    }
    Ok(table)
}

fn cell(m: Option<MeanStd>) -> String {
    match m {
        Some(m) => format!("{:.4}\t{:.4}", m.mean, m.std),
        None => "NA\tNA".into(),
    }
}

/// Accuracy per neighborhood size.
pub fn write_knn_report<W: Write>(report: &KnnReport, mut out: W) -> Result<()> {
    writeln!(out, "k\tAccuracy\tAccuracy_std\tfolds")?;
    for s in &report.scores {
        writeln!(out, "{}\t{}\t{}", s.k, cell(Some(s.accuracy)), s.accuracy.n)?;
    }
    Ok(())
}

pub const METRIC_HEADER: &str =
    "Specificity\tSpecificity_std\tSensitivity\tSensitivity_std\tAccuracy\tAccuracy_std\tPrecision\tPrecision_std";

/// One row per family of the binary protocol, then a `mean` row averaging the family
/// means (its std columns are the spread across families).
pub fn write_binary_report<W: Write>(rows: &[(String, usize, MetricsReport)], mut out: W) -> Result<()> {
    writeln!(out, "family\tsize\t{METRIC_HEADER}")?;
    for (family, size, r) in rows {
        writeln!(out, "{family}\t{size}\t{}", metric_cells(r))?;
    }
    if !rows.is_empty() {
        let across = |f: fn(&MetricsReport) -> Option<MeanStd>| {
            let v: Vec<f64> = rows.iter().filter_map(|(_, _, r)| f(r).map(|m| m.mean)).collect();
            MeanStd::of(&v)
        };
        writeln!(
            out,
            "mean\t{}\t{}\t{}\t{}\t{}",
            rows.iter().map(|r| r.1).sum::<usize>(),
            cell(across(|r| r.specificity)),
            cell(across(|r| r.sensitivity)),
            cell(across(|r| r.accuracy)),
            cell(across(|r| r.precision)),
        )?;
    }
    Ok(())
}

/// A single row for the multiclass protocol.
pub fn write_multiclass_report<W: Write>(classes: usize, report: &MetricsReport, mut out: W) -> Result<()> {
    writeln!(out, "classes\t{METRIC_HEADER}")?;
    writeln!(out, "{classes}\t{}", metric_cells(report))?;
    Ok(())
}

fn metric_cells(r: &MetricsReport) -> String {
    [r.specificity, r.sensitivity, r.accuracy, r.precision]
        .into_iter()
        .map(cell)
        .collect::<Vec<_>>()
        .join("\t")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::init_model;

    fn model(objective: Objective) -> EmbeddingModel {
        let vocab = Vocabulary::new((0..5).map(|i| (format!("K{i}"), 3 + i as u64)).collect(), 1).unwrap();
        let cfg = TrainConfig {
            dim: 3,
            objective,
            seed: 4,
            ..Default::default()
        };
        let mut m = init_model(vocab, 2, &cfg).unwrap();
        m.params.output.row_mut(0)[1] = -0.25;
        m.tokenizer = TokenizerConfig {
            k: 2,
            mode: Mode::Overlapping,
        };
        m
    }

    fn bytes(m: &EmbeddingModel) -> Vec<u8> {
        let mut buf = Vec::new();
        write_model(m, &mut buf).unwrap();
        buf
    }

    #[test]
    fn model_round_trip() {
        for obj in [Objective::NegativeSampling(3), Objective::HierarchicalSoftmax] {
            let m = model(obj);
            let buf = bytes(&m);
            assert_eq!(&buf[..4], MAGIC);
            assert_eq!(read_model(&buf[..]).unwrap(), m);
        }
    }

    #[test]
    fn every_truncation_is_rejected() {
        let buf = bytes(&model(Objective::NegativeSampling(2)));
        for len in 0..buf.len() {
            let err = read_model(&buf[..len]).unwrap_err();
            assert!(matches!(err, Error::ModelFormat { .. }), "{len}: {err}");
        }
        let mut long = buf.clone();
        long.push(0);
        assert!(read_model(&long[..]).is_err());
    }

    #[test]
    fn header_checks() {
        let mut buf = bytes(&model(Objective::NegativeSampling(2)));
        buf[4] = 9;
        assert!(read_model(&buf[..]).unwrap_err().to_string().contains("version"));
        buf[0] = b'X';
        assert!(read_model(&buf[..]).unwrap_err().to_string().contains("magic"));
    }

    #[test]
    fn huge_counts_fail_before_allocating() {
        let mut buf = bytes(&model(Objective::NegativeSampling(2)));
        let vocab_at = 8 + CONFIG_BYTES;
        buf[vocab_at..vocab_at + 8].copy_from_slice(&u64::MAX.to_le_bytes());
        let err = read_model(&buf[..]).unwrap_err();
        assert!(
            matches!(err, Error::ModelFormat { offset, .. } if offset == vocab_at),
            "{err}"
        );
    }

    #[test]
    fn vector_text_round_trip() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let vecs = vec![vec![0.1f32, -3.5e-8, 7.0], vec![f32::MIN_POSITIVE, 1.0 / 3.0, -0.0]];
        let mut buf = Vec::new();
        write_vectors(&ids, &vecs, &mut buf).unwrap();
        let t = read_vectors(&buf[..]).unwrap();
        assert_eq!(t.ids, ids);
        let back: Vec<Vec<f32>> = t
            .vectors
            .iter()
            .map(|v| v.iter().map(|&x| x as f32).collect())
            .collect();
        assert_eq!(back, vecs);
    }

    #[test]
    fn vector_text_errors() {
        assert!(read_vectors(&b""[..]).is_err());
        assert!(read_vectors(&b"2 2\na 1 2\n"[..]).is_err());
        assert!(read_vectors(&b"1 2\na 1\n"[..]).is_err());
        assert!(read_vectors(&b"1 2\na 1 x\n"[..]).is_err());
        assert!(read_vectors(&b"x\n"[..]).is_err());
    }
}
