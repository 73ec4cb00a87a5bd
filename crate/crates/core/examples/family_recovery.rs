//! Embed synthetic protein families and check that kNN and a linear SVM recover them.
//!
//!     cargo run --release --example family_recovery

use std::time::Instant;

use seqvec::classify::{multiclass_protocol, ProtocolConfig};
use seqvec::embedding::{fit, Architecture, Objective, TrainConfig};
use seqvec::knn::{knn_cross_validate, Metric, VectorIndex};
use seqvec::synthetic::{markov_families, MarkovFamilies};
use seqvec::tokenizer::{build_corpus, Mode, TokenizerConfig};

fn main() -> seqvec::Result<()> {
    let records = markov_families(&MarkovFamilies::default());
    let labels = records
        .iter()
        .map(|r| (r.id.clone(), r.family.clone().unwrap()))
        .collect();

    let mode = std::env::args()
        .nth(1)
        .map_or(Ok(Mode::NonOverlapping), |m| m.parse())?;
    let corpus = build_corpus(&records, TokenizerConfig { k: 3, mode }, 1)?;
    println!(
        "{} documents, {} tokens, vocabulary {}",
        corpus.n_docs(),
        corpus.total_tokens(),
        corpus.vocab.len()
    );

    let cfg = TrainConfig {
        architecture: Architecture::Dm,
        dim: 50,
        window: 5,
        objective: Objective::NegativeSampling(5),
        epochs: 20,
        seed: 7,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (model, report) = fit(&corpus, &cfg)?;
    println!(
        "trained in {:.1?}; loss per epoch {:.3} -> {:.3}",
        start.elapsed(),
        report.epoch_loss[0],
        report.epoch_loss.last().unwrap()
    );

    let vectors = (0..model.n_docs())
        .map(|i| model.doc_vector(i).iter().map(|&x| f64::from(x)).collect())
        .collect();
    let index = VectorIndex::new(model.doc_ids.clone(), vectors, Metric::Euclidean)?.with_labels(&labels);

    let knn = knn_cross_validate(&index, 10, &[1, 3, 5, 10], 3)?;
    for s in &knn.scores {
        println!(
            "kNN k={:<2} accuracy {:.3} ± {:.3}",
            s.k, s.accuracy.mean, s.accuracy.std
        );
    }
    let svm = multiclass_protocol(
        &index,
        25,
        &ProtocolConfig {
            seed: 3,
            ..Default::default()
        },
    )?;
    let acc = svm.report.accuracy.unwrap();
    println!("one-vs-rest SVM accuracy {:.3} ± {:.3}", acc.mean, acc.std);
    Ok(())
}
