//! Train paragraph vectors on synthetic families, then embed unseen sequences and
//! assign each to a family by a cosine 10-NN vote over the training vectors.
//!
//!     cargo run --release --example train_and_infer [dm|dbow|cbow|skipgram] [ns:5|hs]

use std::collections::HashMap;

use seqvec::embedding::{fit, infer_sequence, loss_estimate, EmbeddingModel, InferOptions, TrainConfig};
use seqvec::knn::{majority_vote, Metric, VectorIndex};
use seqvec::synthetic::{markov_families, MarkovFamilies};
use seqvec::tokenizer::{build_corpus, TokenizerConfig};

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

fn main() -> seqvec::Result<()> {
    let mut args = std::env::args().skip(1);
    let architecture = args.next().unwrap_or_else(|| "dm".into()).parse()?;
    let objective = args.next().unwrap_or_else(|| "ns:5".into()).parse()?;

    let p = MarkovFamilies {
        families: 3,
        per_family: 60,
        ..Default::default()
    };
    let records = markov_families(&p);
    let labels: HashMap<String, String> = records
        .iter()
        .map(|r| (r.id.clone(), r.family.clone().unwrap()))
        .collect();
    let corpus = build_corpus(&records, TokenizerConfig::default(), 1)?;
    let cfg = TrainConfig {
        architecture,
        objective,
        dim: 32,
        seed: 5,
        ..TrainConfig::default()
    };
    let untrained = EmbeddingModel::from_corpus(&corpus, &cfg)?;
    let (model, report) = fit(&corpus, &cfg)?;
    println!(
        "{architecture} {objective}: probe loss {:.4} -> {:.4} over {} updates",
        loss_estimate(&untrained, &corpus.docs, 1),
        loss_estimate(&model, &corpus.docs, 1),
        report.updates
    );

    let vectors = (0..model.n_docs()).map(|i| widen(model.doc_vector(i))).collect();
    let index = VectorIndex::new(model.doc_ids.clone(), vectors, Metric::Cosine)?;

    // the same generator with more members per family yields fresh sequences from the same chains
    let more = 80;
    let unseen = markov_families(&MarkovFamilies { per_family: more, ..p });
    let opts = InferOptions::from_config(&model.config);
    let mut correct = 0;
    let mut total = 0;
    for f in 0..p.families {
        for r in &unseen[f * more + p.per_family..(f + 1) * more] {
            let v = widen(&infer_sequence(&model, &r.residues, &opts)?);
            let hits = index.neighbors(&v, 10, None)?;
            let predicted = majority_vote(&hits, &labels, Metric::Cosine.kind())?;
            if r.family.as_deref() == Some(predicted.as_str()) {
                correct += 1;
            }
            total += 1;
        }
    }
    println!("{correct}/{total} unseen sequences assigned to their own family");
    Ok(())
}
