//! Dense row-major `f64` matrices and the numeric kernels behind the tensor ops.
//!
//! Kernels come in sequential and data-parallel flavors; the `parallel`
//! feature selects rayon-backed versions for large operands. Every kernel is
//! deterministic: each output element is produced by a single fixed-order
//! accumulation, so results are bitwise identical regardless of thread count.

use std::fmt;
use std::ops::{Index, IndexMut};

/// Dense matrix, row-major, 64-bit floats.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Mat { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from a flat row-major vector. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "from_vec: {}x{} needs {} values", rows, cols, rows * cols);
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "from_rows: ragged input");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn scalar(value: f64) -> Self {
        Mat::from_vec(1, 1, vec![value])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul: {}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols);
        kernels::matmul(self, other)
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: kernels::map(&self.data, f) }
    }

    pub fn zip_map(&self, other: &Mat, f: impl Fn(f64, f64) -> f64 + Sync) -> Mat {
        assert_eq!(self.shape(), other.shape(), "zip_map: shape mismatch");
        Mat { rows: self.rows, cols: self.cols, data: kernels::zip_map(&self.data, &other.data, f) }
    }

    pub fn scale(&self, c: f64) -> Mat {
        self.map(|x| x * c)
    }

    pub fn add(&self, other: &Mat) -> Mat {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Mat) -> Mat {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!(self.shape(), other.shape(), "add_assign: shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn add_scaled_assign(&mut self, other: &Mat, c: f64) {
        assert_eq!(self.shape(), other.shape(), "add_scaled_assign: shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// Sum of every entry, accumulated in row-major order.
    pub fn sum(&self) -> f64 {
        let mut s = 0.0;
        for &v in &self.data {
            s += v;
        }
        s
    }

    /// Column sums as a 1 x cols matrix, accumulated row by row.
    pub fn col_sums(&self) -> Mat {
        let mut out = Mat::zeros(1, self.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            for (o, &v) in out.data.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for &v in &self.data {
            s += v * v;
        }
        s.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff: shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        let show = self.rows.min(8);
        for i in 0..show {
            let row: Vec<String> = self.row(i).iter().take(8).map(|v| format!("{v:.4}")).collect();
            writeln!(f, "  [{}{}]", row.join(", "), if self.cols > 8 { ", .." } else { "" })?;
        }
        if self.rows > show {
            writeln!(f, "  ..")?;
        }
        write!(f, "]")
    }
}

/// Raw numeric kernels. The `_seq`/`_par` pairs exist so benches can compare
/// both paths directly; `matmul`/`map`/`zip_map` dispatch on operand size.
pub mod kernels {
    use super::Mat;
    #[cfg(feature = "parallel")]
    use rayon::prelude::*;

    /// Below this many multiply-adds the parallel dispatch stays sequential.
    const PAR_MATMUL_FLOPS: usize = 1 << 20;
    /// Below this many elements, elementwise ops stay sequential.
    const PAR_MAP_LEN: usize = 1 << 16;

    #[inline]
    fn matmul_row(a_row: &[f64], b: &Mat, out_row: &mut [f64]) {
        // ikj order: stream rows of b, skip zero coefficients (normalized
        // adjacencies stored dense are mostly zeros).
        for (k, &aik) in a_row.iter().enumerate() {
            if aik != 0.0 {
                let b_row = b.row(k);
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += aik * bv;
                }
            }
        }
    }

    pub fn matmul_seq(a: &Mat, b: &Mat) -> Mat {
        let mut out = Mat::zeros(a.rows(), b.cols());
        let cols = b.cols();
        for i in 0..a.rows() {
            let (row_a, row_out) = (a.row(i), &mut out.data_mut()[i * cols..(i + 1) * cols]);
            matmul_row(row_a, b, row_out);
        }
        out
    }

    #[cfg(feature = "parallel")]
    pub fn matmul_par(a: &Mat, b: &Mat) -> Mat {
        let mut out = Mat::zeros(a.rows(), b.cols());
        let cols = b.cols();
        out.data_mut()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row_out)| matmul_row(a.row(i), b, row_out));
        out
    }

    pub fn matmul(a: &Mat, b: &Mat) -> Mat {
        #[cfg(feature = "parallel")]
        {
            if a.rows() * a.cols() * b.cols() >= PAR_MATMUL_FLOPS {
                return matmul_par(a, b);
            }
        }
        matmul_seq(a, b)
    }

    pub fn map_seq(data: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        data.iter().map(|&x| f(x)).collect()
    }

    #[cfg(feature = "parallel")]
    pub fn map_par(data: &[f64], f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
        data.par_iter().map(|&x| f(x)).collect()
    }

    pub fn map(data: &[f64], f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
        #[cfg(feature = "parallel")]
        {
            if data.len() >= PAR_MAP_LEN {
                return map_par(data, f);
            }
        }
        map_seq(data, f)
    }

    pub fn zip_map_seq(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
    }

    #[cfg(feature = "parallel")]
    pub fn zip_map_par(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
        a.par_iter().zip(b.par_iter()).map(|(&x, &y)| f(x, y)).collect()
    }

    pub fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
        #[cfg(feature = "parallel")]
        {
            if a.len() >= PAR_MAP_LEN {
                return zip_map_par(a, b, f);
            }
        }
        zip_map_seq(a, b, f)
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(x)) without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Per-entry binary cross-entropy given a logit and a {0,1} target.
#[inline]
pub fn bce_logit(logit: f64, target: f64) -> f64 {
    softplus(logit) - logit * target
}
