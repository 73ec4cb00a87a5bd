//! Linear SVM: a direct fit, then the binary (family vs rest) and multiclass protocols.
//!
//!     cargo run --release --example svm_protocols

use std::collections::HashMap;

use seqvec::classify::{binary_family_protocol, multiclass_protocol, one_vs_rest, ProtocolConfig, SvmParams};
use seqvec::knn::{Metric, VectorIndex};
use seqvec::synthetic::gaussian_clusters;

fn main() -> seqvec::Result<()> {
    let c = gaussian_clusters(6, 40, 10, 4.0, 1.5, 2);

    let model = one_vs_rest(&c.vectors, &c.labels, SvmParams::default(), 1)?;
    let train_acc = c
        .vectors
        .iter()
        .zip(&c.labels)
        .filter(|(x, y)| model.predict(x) == y.as_str())
        .count() as f64
        / c.labels.len() as f64;
    println!(
        "one-vs-rest training accuracy {train_acc:.3} over classes {:?}",
        model.classes
    );

    let labels: HashMap<String, String> = c.ids.iter().cloned().zip(c.labels.iter().cloned()).collect();
    let index = VectorIndex::new(c.ids, c.vectors, Metric::Euclidean)?.with_labels(&labels);
    let cfg = ProtocolConfig::default();

    println!("family\tspecificity\tsensitivity\taccuracy");
    for family in ["c00", "c03"] {
        let r = binary_family_protocol(&index, family, &cfg)?;
        let show = |m: Option<seqvec::stats::MeanStd>| m.map_or("NA".into(), |m| format!("{:.3}±{:.3}", m.mean, m.std));
        println!(
            "{family}\t{}\t{}\t{}",
            show(r.specificity),
            show(r.sensitivity),
            show(r.accuracy)
        );
    }

    let multi = multiclass_protocol(&index, 25, &cfg)?;
    let acc = multi.report.accuracy.unwrap();
    println!(
        "multiclass over {} families: accuracy {:.3} ± {:.3}",
        multi.families.len(),
        acc.mean,
        acc.std
    );
    Ok(())
}
