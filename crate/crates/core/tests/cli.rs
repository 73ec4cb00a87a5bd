//! End-to-end runs of the `seqvec` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqvec::sequences::{write_fasta, SequenceRecord};
use seqvec::synthetic::{markov_families, MarkovFamilies};
use tempfile::TempDir;

fn seqvec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqvec"))
        .args(args)
        .env_remove("SEQVEC_SEED")
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    records: Vec<SequenceRecord>,
}

impl Fixture {
    /// Three small families with labels, tokenized.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let records = markov_families(&MarkovFamilies {
            families: 3,
            per_family: 12,
            length: 60,
            ..Default::default()
        });
        write_fasta(&records, fs::File::create(dir.path().join("db.fa")).unwrap()).unwrap();
        let labels: String = records
            .iter()
            .map(|r| format!("{}\t{}\n", r.id, r.family.as_deref().unwrap()))
            .collect();
        fs::write(dir.path().join("labels.tsv"), labels).unwrap();
        let f = Fixture { dir, records };
        let out = seqvec(&[
            "tokenize",
            "--input",
            s(&f.path("db.fa")),
            "--output",
            s(&f.path("corpus.txt")),
        ]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, output: &str, extra: &[&str]) -> Output {
        let corpus = self.path("corpus.txt");
        let model = self.path(output);
        let mut args = vec![
            "train",
            "--corpus",
            s(&corpus),
            "--dim",
            "16",
            "--epochs",
            "5",
            "--output",
            s(&model),
        ];
        args.extend_from_slice(extra);
        seqvec(&args)
    }
}

#[test]
fn tokenize_writes_phase_documents() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("q.fa");
    let out_path = dir.path().join("corpus.txt");
    fs::write(&fa, ">q1 example\nQWERTYQWERTY\n").unwrap();
    let out = seqvec(&["tokenize", "--input", s(&fa), "--output", s(&out_path)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let corpus = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = corpus.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines, ["0 0 QWE RTY QWE RTY", "0 1 WER TYQ WER", "0 2 ERT YQW ERT"]);
    assert!(text(&out.stdout).contains("documents\t1"));

    let out = seqvec(&[
        "tokenize",
        "--input",
        s(&fa),
        "--mode",
        "overlap",
        "--output",
        s(&out_path),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let corpus = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = corpus.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines, ["0 0 QWE WER ERT RTY TYQ YQW QWE WER ERT RTY"]);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("q.fa");
    fs::write(&fa, ">q\nACDEFG\n").unwrap();
    let out_path = dir.path().join("c.txt");
    let out = seqvec(&["tokenize", "--input", s(&fa), "--k", "0", "--output", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
    assert_eq!(seqvec(&["tokenize"]).status.code(), Some(2));
    assert_eq!(seqvec(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(seqvec(&["--help"]).status.code(), Some(0));
    assert_eq!(seqvec(&["--version"]).status.code(), Some(0));
}

#[test]
fn empty_fasta_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("empty.fa");
    fs::write(&fa, "").unwrap();
    let out = seqvec(&["tokenize", "--input", s(&fa), "--output", s(&dir.path().join("c.txt"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("empty corpus"), "{}", text(&out.stderr));

    let out = seqvec(&[
        "tokenize",
        "--input",
        s(&dir.path().join("missing.fa")),
        "--output",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_residue_fails_unless_replaced() {
    let dir = tempfile::tempdir().unwrap();
    let fa = dir.path().join("bad.fa");
    fs::write(&fa, ">a\nACD1EFGHIK\n").unwrap();
    let c = dir.path().join("c.txt");
    let out = seqvec(&["tokenize", "--input", s(&fa), "--output", s(&c)]);
    assert_eq!(out.status.code(), Some(1));
    let out = seqvec(&["tokenize", "--input", s(&fa), "--replace-invalid", "--output", s(&c)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let f = Fixture::new();
    let a = f.train("a.bin", &["--workers", "1", "--seed", "7"]);
    assert!(a.status.success(), "{}", text(&a.stderr));
    let b = f.train("b.bin", &["--workers", "1", "--seed", "7"]);
    assert!(b.status.success());
    assert_eq!(fs::read(f.path("a.bin")).unwrap(), fs::read(f.path("b.bin")).unwrap());

    let stdout = text(&a.stdout);
    let value = |key: &str| -> f64 {
        let line = stdout.lines().find(|l| l.starts_with(key)).unwrap();
        line.split('\t').nth(1).unwrap().parse().unwrap()
    };
    assert!(value("final_loss") < value("initial_loss"), "{stdout}");
    assert!(text(&a.stderr).contains("epoch 5"));
}

#[test]
fn seed_falls_back_to_environment() {
    let f = Fixture::new();
    let corpus = f.path("corpus.txt");
    let run = |out: &str, seed: &str| {
        let model = f.path(out);
        let o = Command::new(env!("CARGO_BIN_EXE_seqvec"))
            .args([
                "train",
                "--corpus",
                s(&corpus),
                "--dim",
                "8",
                "--epochs",
                "2",
                "--output",
                s(&model),
            ])
            .env("SEQVEC_SEED", seed)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", text(&o.stderr));
        fs::read(model).unwrap()
    };
    let from_env = run("env.bin", "7");
    assert_eq!(from_env, run("env2.bin", "7"));
    assert_ne!(from_env, run("env3.bin", "8"));
    let flag = f.path("flag.bin");
    let o = seqvec(&[
        "train",
        "--corpus",
        s(&corpus),
        "--dim",
        "8",
        "--epochs",
        "2",
        "--seed",
        "7",
        "--output",
        s(&flag),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert_eq!(from_env, fs::read(f.path("flag.bin")).unwrap());
}

#[test]
fn invalid_training_config_exits_2() {
    let f = Fixture::new();
    assert_eq!(f.train("m.bin", &["--alpha", "5.0"]).status.code(), Some(2));
    assert_eq!(f.train("m.bin", &["--arch", "lstm"]).status.code(), Some(2));
    assert_eq!(f.train("m.bin", &["--objective", "ns:0"]).status.code(), Some(2));
}

#[test]
fn corrupt_model_is_rejected() {
    let f = Fixture::new();
    fs::write(f.path("junk.bin"), b"not a model").unwrap();
    let out = seqvec(&[
        "vectors",
        "--model",
        s(&f.path("junk.bin")),
        "--output",
        s(&f.path("v.txt")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn full_pipeline() {
    let f = Fixture::new();
    assert!(f.train("m.bin", &["--seed", "3"]).status.success());
    let (model, vectors, labels) = (f.path("m.bin"), f.path("vectors.txt"), f.path("labels.tsv"));

    let out = seqvec(&["vectors", "--model", s(&model), "--output", s(&vectors)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = fs::read_to_string(&vectors).unwrap();
    assert_eq!(body.lines().next().unwrap(), "36 16");
    assert_eq!(body.lines().count(), 37);

    let inferred = f.path("inferred.txt");
    let out = seqvec(&[
        "infer",
        "--model",
        s(&model),
        "--input",
        s(&f.path("db.fa")),
        "--seed",
        "1",
        "--output",
        s(&inferred),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(fs::read_to_string(&inferred).unwrap().starts_with("36 16\n"));

    let out = seqvec(&[
        "knn-eval",
        "--vectors",
        s(&vectors),
        "--labels",
        s(&labels),
        "--folds",
        "4",
        "--k",
        "1,3",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report = text(&out.stdout);
    assert!(report.starts_with("k\tAccuracy"), "{report}");
    assert_eq!(report.lines().count(), 3);

    let svm_out = f.path("svm.tsv");
    let out = seqvec(&[
        "svm-eval",
        "--vectors",
        s(&vectors),
        "--labels",
        s(&labels),
        "--mode",
        "binary",
        "--folds",
        "4",
        "--output",
        s(&svm_out),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report = fs::read_to_string(&svm_out).unwrap();
    assert!(report.lines().next().unwrap().contains("Specificity\tSpecificity_std"));
    assert_eq!(report.lines().count(), 5, "{report}");
    assert!(report.lines().last().unwrap().starts_with("mean"));

    let out = seqvec(&[
        "svm-eval",
        "--vectors",
        s(&vectors),
        "--labels",
        s(&labels),
        "--mode",
        "multiclass",
        "--folds",
        "4",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("fewer than top-n"));

    let query = f.path("query.fa");
    write_fasta(&f.records[15..16], fs::File::create(&query).unwrap()).unwrap();
    let out = seqvec(&[
        "align-knn",
        "--db",
        s(&f.path("db.fa")),
        "--labels",
        s(&labels),
        "--query",
        s(&query),
        "--k",
        "3",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let rows = text(&out.stdout);
    let row: Vec<&str> = rows.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[0], "fam01_0003");
    assert_eq!(row[1], "fam01");
    assert_ne!(row[2], "fam01_0003");

    let out = seqvec(&[
        "align-knn",
        "--db",
        s(&f.path("db.fa")),
        "--labels",
        s(&labels),
        "--query",
        s(&query),
        "--gap-open",
        "-1",
        "--gap-extend",
        "-5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
