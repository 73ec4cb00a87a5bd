use std::sync::atomic::{AtomicU32, Ordering};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Copy + Default> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::default(); rows * cols],
        }
    }
}

impl<F: Copy> Matrix<F> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[F]> {
        // chunks_exact(0) panics; a zero-width matrix has no meaningful rows anyway
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn map<G: Copy>(&self, f: impl Fn(F) -> G) -> Matrix<G> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// `f32` matrix shared between training threads.
///
/// Updates are plain relaxed load/store pairs, so concurrent writers to one row may
/// lose each other's increments; that is the accepted cost of lock-free SGD.
pub(crate) struct AtomicMatrix {
    cols: usize,
    data: Vec<AtomicU32>,
}

impl AtomicMatrix {
    pub fn from_matrix(m: &Matrix<f32>) -> Self {
        AtomicMatrix {
            cols: m.cols,
            data: m.data.iter().map(|x| AtomicU32::new(x.to_bits())).collect(),
        }
    }

    pub fn into_matrix(self, rows: usize) -> Matrix<f32> {
        Matrix {
            rows,
            cols: self.cols,
            data: self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect(),
        }
    }

    pub fn read(&self, row: usize, out: &mut [f32]) {
        let base = row * self.cols;
        for (o, a) in out.iter_mut().zip(&self.data[base..base + self.cols]) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    pub fn axpy(&self, row: usize, alpha: f32, x: &[f32]) {
        let base = row * self.cols;
        for (a, &v) in self.data[base..base + self.cols].iter().zip(x) {
            let cur = f32::from_bits(a.load(Ordering::Relaxed));
            a.store((cur + alpha * v).to_bits(), Ordering::Relaxed);
        }
    }
}
