//! Parse FASTA text and cut it into kmer documents both ways.
//!
//!     cargo run --example tokenize_fasta

use seqvec::sequences::{parse_fasta, Alphabet, Policy};
use seqvec::tokenizer::{build_corpus, write_corpus, Mode, TokenizerConfig};

const FASTA: &str = ">q1 repeated motif\nQWERTYQWERTY\n>q2\nMKVLAAGIVG\nLLLA\n";

fn main() -> seqvec::Result<()> {
    let records = parse_fasta(FASTA.as_bytes(), &Alphabet::protein(), Policy::Strict)?;
    for r in &records {
        println!("{} ({} residues) {}", r.id, r.len(), r.residues);
    }

    for mode in [Mode::NonOverlapping, Mode::Overlapping] {
        let corpus = build_corpus(&records, TokenizerConfig { k: 3, mode }, 1)?;
        println!(
            "\n{mode}: {} documents, vocabulary {}",
            corpus.docs.len(),
            corpus.vocab.len()
        );
        write_corpus(&corpus, std::io::stdout().lock())?;
    }
    Ok(())
}
