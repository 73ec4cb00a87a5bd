//! Finite-difference gradient oracle shared by the gradient tests and the acceptance suite.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqvec::embedding::{
    objective_loss, unit_gradient, unit_loss, units_at, Architecture, Matrix, Objective, OutputTerm, Params, Slot, Unit,
};
use seqvec::tokenizer::{TokenId, Vocabulary};

pub const STEP: f64 = 1e-3;
pub const TOLERANCE: f64 = 1e-4;
pub const INSTANCES: u64 = 120;

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-9 {
        diff
    } else {
        diff / scale
    }
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-0.8..0.8)).collect(),
    )
}

struct Instance {
    vocab: Vocabulary,
    params: Params<f64>,
    tokens: Vec<TokenId>,
}

fn instance(objective: Objective, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = rng.random_range(2..=20);
    let d = rng.random_range(1..=8);
    let vocab = Vocabulary::new((0..v).map(|i| (format!("t{i}"), rng.random_range(1..50))).collect(), 1).unwrap();
    let out_rows = match objective {
        Objective::NegativeSampling(_) => v,
        Objective::HierarchicalSoftmax => v - 1,
    };
    let n_docs = 3;
    let params = Params {
        docs: random_matrix(n_docs, d, &mut rng),
        words: random_matrix(v, d, &mut rng),
        output: random_matrix(out_rows, d, &mut rng),
    };
    let len = rng.random_range(1..=9);
    let tokens = (0..len).map(|_| rng.random_range(0..v as TokenId)).collect();
    Instance { vocab, params, tokens }
}

fn finite_difference(params: &Params<f64>, unit: &Unit, slot: Slot, row: usize) -> Vec<f64> {
    let d = params.words.cols();
    (0..d)
        .map(|c| {
            let mut plus = params.clone();
            plus.matrix_mut(slot).row_mut(row)[c] += STEP;
            let mut minus = params.clone();
            minus.matrix_mut(slot).row_mut(row)[c] -= STEP;
            (unit_loss(&plus, unit) - unit_loss(&minus, unit)) / (2.0 * STEP)
        })
        .collect()
}

pub fn check_architecture(arch: Architecture, objective: Objective) -> (usize, f64) {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let inst = instance(objective, seed * 31 + arch as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = rng.random_range(0..inst.tokens.len());
        let reach = rng.random_range(1..=4);
        let mut units = Vec::new();
        units_at(
            arch,
            objective,
            &inst.vocab,
            1,
            &inst.tokens,
            pos,
            reach,
            &mut rng,
            &mut units,
        );
        for unit in &units {
            let analytic = unit_gradient(&inst.params, unit);
            for (&(slot, row), grad) in &analytic.rows {
                let numeric = finite_difference(&inst.params, unit, slot, row);
                let err = relative_error(grad, &numeric);
                worst = worst.max(err);
                checked += 1;
            }
        }
    }
    (checked, worst)
}

pub fn numeric_grad_h(h: &[f64], terms: &[OutputTerm], output: &Matrix<f64>) -> Vec<f64> {
    (0..h.len())
        .map(|c| {
            let mut plus = h.to_vec();
            plus[c] += STEP;
            let mut minus = h.to_vec();
            minus[c] -= STEP;
            (objective_loss(&plus, terms, output) - objective_loss(&minus, terms, output)) / (2.0 * STEP)
        })
        .collect()
}

pub const CASES: [(Architecture, Objective); 8] = [
    (Architecture::Cbow, Objective::NegativeSampling(3)),
    (Architecture::Cbow, Objective::HierarchicalSoftmax),
    (Architecture::SkipGram, Objective::NegativeSampling(3)),
    (Architecture::SkipGram, Objective::HierarchicalSoftmax),
    (Architecture::Dm, Objective::NegativeSampling(3)),
    (Architecture::Dm, Objective::HierarchicalSoftmax),
    (Architecture::Dbow, Objective::NegativeSampling(3)),
    (Architecture::Dbow, Objective::HierarchicalSoftmax),
];
