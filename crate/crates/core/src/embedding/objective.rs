//! Negative-sampling and hierarchical-softmax objectives.
//!
//! Both reduce to a sum of binary logistic terms over rows of the output matrix:
//! `loss = -Σ log σ(s_j · o_j·h)` with `s_j = +1` for the positive row(s) and `-1`
//! otherwise. For negative sampling the rows are the target and the drawn noise
//! tokens; for hierarchical softmax they are the inner nodes on the target's
//! Huffman path, with the sign taken from the code bit.

use num_traits::Float;
use rand::Rng;

use super::{Matrix, Objective};
use crate::tokenizer::{TokenId, Vocabulary};

/// Redraws allowed when a noise sample collides with the target.
pub const MAX_NEGATIVE_REDRAWS: usize = 16;

/// One binary logistic term: an output row and whether it is the positive label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputTerm {
    pub row: usize,
    pub positive: bool,
}

pub(crate) fn cast<F: Float>(x: f64) -> F {
    F::from(x).unwrap()
}

pub fn sigmoid<F: Float>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// `-log σ(z)`, stable for large `|z|`.
pub fn neg_log_sigmoid<F: Float>(z: F) -> F {
    (-z).max(F::zero()) + (-z.abs()).exp().ln_1p()
}

/// Appends the output terms for predicting `target`.
///
/// Negative samples that equal the target are redrawn up to [`MAX_NEGATIVE_REDRAWS`]
/// times and dropped if they keep colliding.
pub fn output_terms<R: Rng + ?Sized>(
    objective: Objective,
    vocab: &Vocabulary,
    target: TokenId,
    rng: &mut R,
    out: &mut Vec<OutputTerm>,
) {
    match objective {
        Objective::NegativeSampling(n) => {
            out.push(OutputTerm {
                row: target as usize,
                positive: true,
            });
            for _ in 0..n {
                for _ in 0..MAX_NEGATIVE_REDRAWS {
                    let d = vocab.sample_noise(rng);
                    if d != target {
                        out.push(OutputTerm {
                            row: d as usize,
                            positive: false,
                        });
                        break;
                    }
                }
            }
        }
        Objective::HierarchicalSoftmax => {
            let code = vocab
                .huffman()
                .expect("hierarchical softmax needs a Huffman tree")
                .code(target);
            for (&bit, &node) in code.bits.iter().zip(&code.nodes) {
                out.push(OutputTerm {
                    row: node as usize,
                    positive: !bit,
                });
            }
        }
    }
}

/// Loss and gradient of one objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient<F> {
    pub loss: F,
    pub grad_h: Vec<F>,
    /// `(output row, d loss / d row)`, one entry per term (rows may repeat).
    pub output: Vec<(usize, Vec<F>)>,
}

/// Scores all terms against `h`, accumulating `d loss / d h` into `grad_h` and the
/// per-term scalar `d loss / d (o_j·h)` into `coeffs`. Returns the loss.
pub(crate) fn score_terms<F: Float>(
    h: &[F],
    terms: &[OutputTerm],
    mut read_row: impl FnMut(usize, &mut [F]),
    row_buf: &mut [F],
    grad_h: &mut [F],
    coeffs: &mut Vec<F>,
) -> F {
    coeffs.clear();
    grad_h.iter_mut().for_each(|g| *g = F::zero());
    let mut loss = F::zero();
    for term in terms {
        read_row(term.row, row_buf);
        let score = dot(row_buf, h);
        let sign = if term.positive { F::one() } else { -F::one() };
        let z = sign * score;
        loss = loss + neg_log_sigmoid(z);
        let g = (sigmoid(z) - F::one()) * sign;
        for (gh, &o) in grad_h.iter_mut().zip(row_buf.iter()) {
            *gh = *gh + g * o;
        }
        coeffs.push(g);
    }
    loss
}

/// Analytic loss and gradients for hidden vector `h` against `terms`.
pub fn objective_gradient<F: Float>(h: &[F], terms: &[OutputTerm], output: &Matrix<F>) -> ObjectiveGradient<F> {
    let d = h.len();
    let mut grad_h = vec![F::zero(); d];
    let mut buf = vec![F::zero(); d];
    let mut coeffs = Vec::with_capacity(terms.len());
    let loss = score_terms(
        h,
        terms,
        |row, out| out.copy_from_slice(output.row(row)),
        &mut buf,
        &mut grad_h,
        &mut coeffs,
    );
    let output = terms
        .iter()
        .zip(&coeffs)
        .map(|(t, &g)| (t.row, h.iter().map(|&x| g * x).collect()))
        .collect();
    ObjectiveGradient { loss, grad_h, output }
}

/// Loss only.
pub fn objective_loss<F: Float>(h: &[F], terms: &[OutputTerm], output: &Matrix<F>) -> F {
    terms.iter().fold(F::zero(), |acc, t| {
        let sign = if t.positive { F::one() } else { -F::one() };
        acc + neg_log_sigmoid(sign * dot(output.row(t.row), h))
    })
}

pub(crate) fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}
