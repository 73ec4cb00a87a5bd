//! Fixed-dimension embeddings of biological sequences.
//!
//! Sequences are cut into kmer "words", each sequence becomes a document, and
//! paragraph-vector training learns one vector per sequence. The embeddings are
//! evaluated with exact kNN majority voting, linear SVMs, and compared against a
//! Smith-Waterman retrieval baseline.

pub mod align;
pub mod classify;
pub mod cli;
pub mod embedding;
pub mod error;
pub mod io;
pub mod knn;
pub mod rng;
pub mod sequences;
pub mod stats;
pub mod synthetic;
pub mod tokenizer;

pub use error::{Error, Result};
