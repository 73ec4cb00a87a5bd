//! One SGD update: build the hidden vector from input rows, score it against the
//! output terms, then push the gradient back into the output and input rows.

use std::collections::BTreeMap;

use num_traits::Float;
use rand::Rng;

use super::matrix::AtomicMatrix;
use super::objective::{cast, output_terms, score_terms, OutputTerm};
use super::{Architecture, Matrix, Objective};
use crate::tokenizer::{TokenId, Vocabulary};

/// Which parameter matrix a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Doc,
    Word,
    Output,
}

/// Document, input-word and output matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub docs: Matrix<F>,
    pub words: Matrix<F>,
    pub output: Matrix<F>,
}

impl<F: Copy> Params<F> {
    pub fn matrix(&self, slot: Slot) -> &Matrix<F> {
        match slot {
            Slot::Doc => &self.docs,
            Slot::Word => &self.words,
            Slot::Output => &self.output,
        }
    }

    pub fn matrix_mut(&mut self, slot: Slot) -> &mut Matrix<F> {
        match slot {
            Slot::Doc => &mut self.docs,
            Slot::Word => &mut self.words,
            Slot::Output => &mut self.output,
        }
    }
}

/// Row-level access to parameters during an update.
pub(crate) trait Store<F> {
    fn read(&self, slot: Slot, row: usize, out: &mut [F]);
    /// `row += alpha * x`
    fn axpy(&mut self, slot: Slot, row: usize, alpha: F, x: &[F]);
}

impl<F: Float> Store<F> for Params<F> {
    fn read(&self, slot: Slot, row: usize, out: &mut [F]) {
        out.copy_from_slice(self.matrix(slot).row(row));
    }

    fn axpy(&mut self, slot: Slot, row: usize, alpha: F, x: &[F]) {
        for (p, &v) in self.matrix_mut(slot).row_mut(row).iter_mut().zip(x) {
            *p = *p + alpha * v;
        }
    }
}

pub(crate) struct SharedParams {
    pub docs: AtomicMatrix,
    pub words: AtomicMatrix,
    pub output: AtomicMatrix,
}

impl SharedParams {
    pub fn new(p: &Params<f32>) -> Self {
        SharedParams {
            docs: AtomicMatrix::from_matrix(&p.docs),
            words: AtomicMatrix::from_matrix(&p.words),
            output: AtomicMatrix::from_matrix(&p.output),
        }
    }

    fn matrix(&self, slot: Slot) -> &AtomicMatrix {
        match slot {
            Slot::Doc => &self.docs,
            Slot::Word => &self.words,
            Slot::Output => &self.output,
        }
    }
}

/// Per-thread handle onto [`SharedParams`].
#[derive(Clone, Copy)]
pub(crate) struct SharedView<'a>(pub &'a SharedParams);

impl Store<f32> for SharedView<'_> {
    fn read(&self, slot: Slot, row: usize, out: &mut [f32]) {
        self.0.matrix(slot).read(row, out);
    }

    fn axpy(&mut self, slot: Slot, row: usize, alpha: f32, x: &[f32]) {
        self.0.matrix(slot).axpy(row, alpha, x);
    }
}

/// Evaluation-only view; updates are ignored.
pub(crate) struct ReadOnly<'a, F>(pub &'a Params<F>);

impl<F: Float> Store<F> for ReadOnly<'_, F> {
    fn read(&self, slot: Slot, row: usize, out: &mut [F]) {
        self.0.read(slot, row, out);
    }

    fn axpy(&mut self, _slot: Slot, _row: usize, _alpha: F, _x: &[F]) {}
}

/// Inference store: a private document vector over frozen word and output matrices.
pub(crate) struct FrozenStore<'a> {
    pub doc: Vec<f32>,
    pub words: &'a Matrix<f32>,
    pub output: &'a Matrix<f32>,
}

impl Store<f32> for FrozenStore<'_> {
    fn read(&self, slot: Slot, row: usize, out: &mut [f32]) {
        match slot {
            Slot::Doc => out.copy_from_slice(&self.doc),
            Slot::Word => out.copy_from_slice(self.words.row(row)),
            Slot::Output => out.copy_from_slice(self.output.row(row)),
        }
    }

    fn axpy(&mut self, slot: Slot, _row: usize, alpha: f32, x: &[f32]) {
        if slot == Slot::Doc {
            for (p, &v) in self.doc.iter_mut().zip(x) {
                *p += alpha * v;
            }
        }
    }
}

/// One objective evaluation: the rows averaged into `h` and the output terms it is scored against.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Unit {
    pub inputs: Vec<(Slot, usize)>,
    pub terms: Vec<OutputTerm>,
}

/// Emits the units for position `pos` of a token run, using reduced window `reach`.
///
/// * CBOW: mean of the context word rows predicts the current token.
/// * SkipGram: the current word row predicts each context token (one unit per context token).
/// * DM: mean of the document row and the context word rows predicts the current token.
/// * DBOW: the document row predicts the current token.
///
/// CBOW with no context words yields nothing.
#[allow(clippy::too_many_arguments)]
pub fn units_at<R: Rng + ?Sized>(
    architecture: Architecture,
    objective: Objective,
    vocab: &Vocabulary,
    doc_tag: usize,
    tokens: &[TokenId],
    pos: usize,
    reach: usize,
    rng: &mut R,
    out: &mut Vec<Unit>,
) {
    let lo = pos.saturating_sub(reach);
    let hi = (pos + reach).min(tokens.len() - 1);
    let context = (lo..=hi).filter(|&j| j != pos);
    let current = tokens[pos];
    let mut push = |inputs: Vec<(Slot, usize)>, target: TokenId, rng: &mut R| {
        let mut terms = Vec::new();
        output_terms(objective, vocab, target, rng, &mut terms);
        out.push(Unit { inputs, terms });
    };
    match architecture {
        Architecture::Cbow => {
            let inputs: Vec<_> = context.map(|j| (Slot::Word, tokens[j] as usize)).collect();
            if !inputs.is_empty() {
                push(inputs, current, rng);
            }
        }
        Architecture::SkipGram => {
            for j in context {
                push(vec![(Slot::Word, current as usize)], tokens[j], rng);
            }
        }
        Architecture::Dm => {
            let mut inputs = vec![(Slot::Doc, doc_tag)];
            inputs.extend(context.map(|j| (Slot::Word, tokens[j] as usize)));
            push(inputs, current, rng);
        }
        Architecture::Dbow => push(vec![(Slot::Doc, doc_tag)], current, rng),
    }
}

/// Reusable buffers for [`apply_unit`].
pub(crate) struct Scratch<F> {
    h: Vec<F>,
    row: Vec<F>,
    grad_h: Vec<F>,
    coeffs: Vec<F>,
}

impl<F: Float> Scratch<F> {
    pub fn new(dim: usize) -> Self {
        Scratch {
            h: vec![F::zero(); dim],
            row: vec![F::zero(); dim],
            grad_h: vec![F::zero(); dim],
            coeffs: Vec::new(),
        }
    }
}

/// Evaluates a unit and, when `lr` is given, applies one SGD step.
///
/// Every term is scored against the pre-update parameters. Each output row moves by
/// `-lr · g_j · h`; each of the `n` input rows moves by `-lr · grad_h / n`.
pub(crate) fn apply_unit<F: Float, S: Store<F>>(
    store: &mut S,
    unit: &Unit,
    lr: Option<F>,
    scratch: &mut Scratch<F>,
) -> F {
    let n = unit.inputs.len();
    if n == 0 {
        return F::zero();
    }
    let Scratch { h, row, grad_h, coeffs } = scratch;
    h.iter_mut().for_each(|x| *x = F::zero());
    for &(slot, r) in &unit.inputs {
        store.read(slot, r, row);
        for (a, &b) in h.iter_mut().zip(row.iter()) {
            *a = *a + b;
        }
    }
    let inv = F::one() / cast::<F>(n as f64);
    h.iter_mut().for_each(|x| *x = *x * inv);

    let loss = score_terms(
        h,
        &unit.terms,
        |r, out| store.read(Slot::Output, r, out),
        row,
        grad_h,
        coeffs,
    );

    if let Some(lr) = lr {
        for (t, &g) in unit.terms.iter().zip(coeffs.iter()) {
            store.axpy(Slot::Output, t.row, -lr * g, h);
        }
        let share = -lr * inv;
        for &(slot, r) in &unit.inputs {
            store.axpy(slot, r, share, grad_h);
        }
    }
    loss
}

/// Loss of a unit at the given parameters.
pub fn unit_loss<F: Float>(params: &Params<F>, unit: &Unit) -> F {
    apply_unit(
        &mut ReadOnly(params),
        unit,
        None,
        &mut Scratch::new(params.words.cols()),
    )
}

/// Full analytic gradient of a unit's loss.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitGradient<F> {
    pub loss: F,
    pub grad_h: Vec<F>,
    /// Gradient per touched row, summed over repeated occurrences.
    pub rows: BTreeMap<(Slot, usize), Vec<F>>,
}

pub fn unit_gradient<F: Float>(params: &Params<F>, unit: &Unit) -> UnitGradient<F> {
    let d = params.words.cols();
    // With lr = 1 on a copy, every parameter moves by exactly -gradient.
    let mut after = params.clone();
    let mut scratch = Scratch::new(d);
    let loss = apply_unit(&mut after, unit, Some(F::one()), &mut scratch);
    let mut rows = BTreeMap::new();
    let touched = unit
        .inputs
        .iter()
        .copied()
        .chain(unit.terms.iter().map(|t| (Slot::Output, t.row)));
    for key in touched {
        rows.entry(key).or_insert_with(|| {
            let before = params.matrix(key.0).row(key.1);
            let now = after.matrix(key.0).row(key.1);
            before.iter().zip(now).map(|(&b, &a)| b - a).collect::<Vec<F>>()
        });
    }
    UnitGradient {
        loss,
        grad_h: scratch.grad_h,
        rows,
    }
}
