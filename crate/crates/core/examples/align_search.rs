//! Smith-Waterman scores and alignment-based family retrieval.
//!
//!     cargo run --release --example align_search

use std::collections::HashMap;

use seqvec::align::{align_classify, align_topk, smith_waterman, AlignParams, SubstitutionMatrix};
use seqvec::synthetic::{markov_families, MarkovFamilies};

fn main() -> seqvec::Result<()> {
    let blosum = AlignParams::default();
    println!(
        "HEAGAWGHEE vs PAWHEAE, BLOSUM62 -11/-1: {}",
        smith_waterman("HEAGAWGHEE", "PAWHEAE", &blosum)?
    );
    let dna = AlignParams::new(SubstitutionMatrix::uniform(2, -1), -2, -1)?;
    println!(
        "ACACACTA vs AGCACACA, +2/-1, gaps -2/-1: {}",
        smith_waterman("ACACACTA", "AGCACACA", &dna)?
    );

    let records = markov_families(&MarkovFamilies {
        families: 4,
        per_family: 25,
        length: 80,
        ..Default::default()
    });
    let labels: HashMap<String, String> = records
        .iter()
        .map(|r| (r.id.clone(), r.family.clone().unwrap()))
        .collect();

    let query = &records[30];
    for hit in align_topk(&records, query, 5, &blosum)? {
        println!("{:>2}. {} score {}", hit.rank, hit.id, hit.score);
    }
    let correct = records
        .iter()
        .step_by(5)
        .filter(|q| align_classify(&records, &labels, q, 5, &blosum).is_ok_and(|f| Some(f) == q.family))
        .count();
    println!(
        "{correct}/{} queries assigned to their own family",
        records.len().div_ceil(5)
    );
    Ok(())
}
