//! Exact nearest neighbors, majority voting and cross-validated accuracy on labeled points.
//!
//!     cargo run --example knn_search

use std::collections::HashMap;

use seqvec::knn::{knn_cross_validate, majority_vote, Metric, VectorIndex};
use seqvec::synthetic::gaussian_clusters;

fn main() -> seqvec::Result<()> {
    let c = gaussian_clusters(4, 30, 8, 5.0, 2.0, 17);
    let labels: HashMap<String, String> = c.ids.iter().cloned().zip(c.labels.iter().cloned()).collect();
    let index = VectorIndex::new(c.ids.clone(), c.vectors.clone(), Metric::Euclidean)?.with_labels(&labels);

    let query = &c.vectors[0];
    let hits = index.neighbors(query, 5, Some(&c.ids[0]))?;
    for h in &hits {
        println!("{:>2}. {} {:.3} ({})", h.rank, h.id, h.score, labels[&h.id]);
    }
    println!("vote: {}", majority_vote(&hits, &labels, Metric::Euclidean.kind())?);

    for metric in [Metric::Euclidean, Metric::Cosine] {
        let report = knn_cross_validate(&index.clone().with_metric(metric), 10, &[1, 5, 15], 1)?;
        for s in &report.scores {
            println!(
                "{metric} k={:<2} accuracy {:.3} ± {:.3}",
                s.k, s.accuracy.mean, s.accuracy.std
            );
        }
    }
    Ok(())
}
