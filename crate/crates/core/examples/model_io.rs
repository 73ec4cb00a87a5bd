//! Save a model, load it back, and export its document vectors as text.
//!
//!     cargo run --example model_io

use seqvec::embedding::{fit, TrainConfig};
use seqvec::io::{read_model, read_vectors, write_model, write_vectors, VectorTable};
use seqvec::synthetic::{markov_families, MarkovFamilies};
use seqvec::tokenizer::{build_corpus, TokenizerConfig};

fn main() -> seqvec::Result<()> {
    let records = markov_families(&MarkovFamilies {
        families: 2,
        per_family: 10,
        ..Default::default()
    });
    let corpus = build_corpus(&records, TokenizerConfig::default(), 1)?;
    let cfg = TrainConfig {
        dim: 8,
        epochs: 5,
        ..TrainConfig::default()
    };
    let (model, _) = fit(&corpus, &cfg)?;

    let mut bytes = Vec::new();
    write_model(&model, &mut bytes)?;
    let loaded = read_model(&bytes[..])?;
    println!(
        "model file: {} bytes, {} docs, vocabulary {}",
        bytes.len(),
        loaded.n_docs(),
        loaded.vocab.len()
    );
    assert_eq!(loaded.params.docs.as_slice(), model.params.docs.as_slice());

    // a truncated file is rejected with the offset where it ran out
    if let Err(e) = read_model(&bytes[..bytes.len() / 2]) {
        println!("truncated: {e}");
    }

    let table = VectorTable::from_model(&loaded);
    let rows: Vec<Vec<f32>> = (0..loaded.n_docs()).map(|i| loaded.doc_vector(i).to_vec()).collect();
    let mut text = Vec::new();
    write_vectors(&table.ids, &rows, &mut text)?;
    print!(
        "{}",
        String::from_utf8_lossy(&text)
            .lines()
            .take(3)
            .collect::<Vec<_>>()
            .join("\n")
    );
    println!("\n...");
    let back = read_vectors(&text[..])?;
    println!("re-read {} vectors of dimension {}", back.ids.len(), back.dim());
    Ok(())
}
