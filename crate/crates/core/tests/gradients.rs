//! Analytic gradients against central finite differences, in f64.

mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqvec::embedding::{objective_gradient, output_terms, Architecture, Objective};
use seqvec::tokenizer::Vocabulary;
use support::{check_architecture, numeric_grad_h, random_matrix, relative_error, TOLERANCE};

macro_rules! gradient_case {
    ($name:ident, $arch:expr, $obj:expr) => {
        #[test]
        fn $name() {
            let (checked, worst) = check_architecture($arch, $obj);
            assert!(checked >= 100, "only {checked} rows checked");
            assert!(worst < TOLERANCE, "worst relative error {worst:e}");
            println!("{} rows, worst relative error {worst:e}", checked);
        }
    };
}

gradient_case!(
    cbow_negative_sampling,
    Architecture::Cbow,
    Objective::NegativeSampling(3)
);
gradient_case!(
    cbow_hierarchical_softmax,
    Architecture::Cbow,
    Objective::HierarchicalSoftmax
);
gradient_case!(
    skipgram_negative_sampling,
    Architecture::SkipGram,
    Objective::NegativeSampling(3)
);
gradient_case!(
    skipgram_hierarchical_softmax,
    Architecture::SkipGram,
    Objective::HierarchicalSoftmax
);
gradient_case!(dm_negative_sampling, Architecture::Dm, Objective::NegativeSampling(3));
gradient_case!(
    dm_hierarchical_softmax,
    Architecture::Dm,
    Objective::HierarchicalSoftmax
);
gradient_case!(
    dbow_negative_sampling,
    Architecture::Dbow,
    Objective::NegativeSampling(3)
);
gradient_case!(
    dbow_hierarchical_softmax,
    Architecture::Dbow,
    Objective::HierarchicalSoftmax
);

#[test]
fn grad_h_negative_sampling_d5() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = Vocabulary::new((0..8).map(|i| (format!("t{i}"), 1 + i as u64)).collect(), 1).unwrap();
        let output = random_matrix(8, 5, &mut rng);
        let h: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut terms = Vec::new();
        output_terms(
            Objective::NegativeSampling(3),
            &vocab,
            rng.random_range(0..8),
            &mut rng,
            &mut terms,
        );
        let g = objective_gradient(&h, &terms, &output);
        assert!(relative_error(&g.grad_h, &numeric_grad_h(&h, &terms, &output)) < TOLERANCE);
    }
}

#[test]
fn grad_h_hierarchical_softmax_two_tokens() {
    let vocab = Vocabulary::new(vec![("a".into(), 3), ("b".into(), 1)], 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for target in 0..2 {
        let output = random_matrix(1, 4, &mut rng);
        let h: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut terms = Vec::new();
        output_terms(Objective::HierarchicalSoftmax, &vocab, target, &mut rng, &mut terms);
        assert_eq!(terms.len(), 1);
        let g = objective_gradient(&h, &terms, &output);
        let sign = if terms[0].positive { 1.0 } else { -1.0 };
        let z: f64 = output.row(0).iter().zip(&h).map(|(o, x)| o * x).sum();
        assert!((g.loss - (1.0 + (-sign * z).exp()).ln()).abs() < 1e-12);
        assert!(relative_error(&g.grad_h, &numeric_grad_h(&h, &terms, &output)) < TOLERANCE);
    }
}
