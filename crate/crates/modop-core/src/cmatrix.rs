//! Dense complex matrices, row-major.
//!
//! This is the plain-matrix substrate the numerical kernels run on. Module
//! operators reach it through `OperatorMatrix::embed`.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds from rows of (re, im) pairs; rows must be of equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, lambda: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * lambda).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.data[i * self.cols + l];
                if a == ZERO {
                    continue;
                }
                let row = l * other.cols;
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[row + j];
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ‖M − M†‖_F, a cheap Hermiticity gauge.
    pub fn hermitian_deviation(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = self[(i, j)] - self[(j, i)].conj();
                s += d.norm_sqr();
            }
        }
        s.sqrt()
    }

    /// (M + M†)/2 with the diagonal forced real.
    pub fn hermitian_part(&self) -> Self {
        debug_assert!(self.is_square());
        let mut out = Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        });
        for i in 0..self.rows {
            out[(i, i)] = C64::new(out[(i, i)].re, 0.0);
        }
        out
    }

    /// Applies the plane rotation (p, q) on columns:
    /// col_p ← c·col_p + s·col_q, col_q ← −s̄·col_p + c·col_q.
    pub(crate) fn rotate_columns(&mut self, p: usize, q: usize, c: f64, s: C64) {
        for i in 0..self.rows {
            let xp = self.data[i * self.cols + p];
            let xq = self.data[i * self.cols + q];
            self.data[i * self.cols + p] = xp * c + xq * s;
            self.data[i * self.cols + q] = xp * (-s.conj()) + xq * c;
        }
    }

    /// Applies the adjoint rotation on rows:
    /// row_p ← c·row_p + s̄·row_q, row_q ← −s·row_p + c·row_q.
    pub(crate) fn rotate_rows(&mut self, p: usize, q: usize, c: f64, s: C64) {
        for j in 0..self.cols {
            let xp = self.data[p * self.cols + j];
            let xq = self.data[q * self.cols + j];
            self.data[p * self.cols + j] = xp * c + xq * s.conj();
            self.data[q * self.cols + j] = xp * (-s) + xq * c;
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matmul_and_adjoint() {
        let a = CMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ]);
        let aa = a.adjoint();
        assert_eq!(aa[(1, 0)], c(0.0, -1.0));
        let prod = a.matmul(&aa);
        assert_eq!(prod[(0, 0)], c(1.0, 0.0));
        assert_eq!(prod[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn hermitian_part_is_hermitian() {
        let m = CMatrix::from_rows(&[
            vec![c(1.0, 2.0), c(3.0, 4.0)],
            vec![c(5.0, 6.0), c(7.0, 8.0)],
        ]);
        let h = m.hermitian_part();
        assert!(h.hermitian_deviation() == 0.0);
        assert_eq!(h[(0, 0)].im, 0.0);
    }

    #[test]
    fn rotation_is_unitary_on_columns() {
        let mut m = CMatrix::identity(3);
        let s = c(0.6, 0.0);
        m.rotate_columns(0, 2, 0.8, s);
        let g = m.adjoint().matmul(&m);
        assert!(g.sub(&CMatrix::identity(3)).frobenius_norm() < 1e-15);
    }
}
