use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A borrowed matrix with arbitrary strides, so transposes cost nothing.
#[derive(Clone, Copy)]
struct Strided<'a> {
    data: &'a [f64],
    row_stride: isize,
    col_stride: isize,
}

impl Strided<'_> {
    fn t(self) -> Self {
        Self {
            row_stride: self.col_stride,
            col_stride: self.row_stride,
            ..self
        }
    }
}

/// `m × n` product of an `m × k` and a `k × n` operand.
fn gemm(a: Strided, b: Strided, m: usize, n: usize, k: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    assert!(a.data.len() >= m * k && b.data.len() >= k * n);
    // SAFETY: both operands hold at least `m·k` and `k·n` values laid out
    // with the given strides (checked above and by the callers' shapes), and
    // `out` is a fresh row-major `m × n` buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    out
}

/// Row-major dense matrix of `f64`.
///
/// Constructors reject non-finite entries; arithmetic helpers assume their
/// inputs already satisfy that invariant.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{})", self.rows, self.cols)?;
        if self.data.len() <= 36 {
            for r in 0..self.rows {
                write!(f, "\n  {:?}", self.row(r))?;
            }
        }
        Ok(())
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "DenseMatrix::new",
                format!("{} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix::new"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::shape("DenseMatrix::from_rows", cols, bad.len()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Wraps a buffer produced by internal arithmetic without re-validating.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // zero-column matrices have an empty buffer, and chunks_exact(0) panics
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Rows `indices[0], indices[1], ...` of `self`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_raw(indices.len(), self.cols, data)
    }

    /// `self · otherᵀ`.
    pub fn matmul_transpose(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_transpose",
                format!("{} columns", self.cols),
                format!("{} columns", other.cols),
            ));
        }
        Ok(gemm(self.view(), other.view().t(), self.rows, other.rows, self.cols))
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("{} rows", self.cols),
                format!("{} rows", other.rows),
            ));
        }
        Ok(gemm(self.view(), other.view(), self.rows, other.cols, self.cols))
    }

    /// `selfᵀ · other`.
    pub fn transpose_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "transpose_matmul",
                format!("{} rows", self.rows),
                format!("{} rows", other.rows),
            ));
        }
        Ok(gemm(self.view().t(), other.view(), self.cols, other.cols, self.rows))
    }

    /// `self · selfᵀ`, symmetrized so the result is exactly symmetric.
    pub fn gram(&self) -> DenseMatrix {
        let mut out = gemm(self.view(), self.view().t(), self.rows, self.rows, self.cols);
        let n = self.rows;
        for i in 0..n {
            for j in i + 1..n {
                out.data[j * n + i] = out.data[i * n + j];
            }
        }
        out
    }

    fn view(&self) -> Strided<'_> {
        Strided {
            data: &self.data,
            row_stride: self.cols as isize,
            col_stride: 1,
        }
    }

    pub fn mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::shape("mat_vec", self.cols, v.len()));
        }
        Ok(self.row_iter().map(|r| dot(r, v)).collect())
    }

    /// `selfᵀ · v`.
    pub fn t_mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::shape("t_mat_vec", self.rows, v.len()));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &w) in self.row_iter().zip(v) {
            if w != 0.0 {
                axpy(w, r, &mut out);
            }
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        self.map(|v| v * s)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "sub",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Rescales every row to Euclidean norm `radius`. Zero rows are left as is.
    pub fn normalize_rows(&mut self, radius: f64) {
        if self.cols == 0 {
            return;
        }
        for row in self.data.chunks_exact_mut(self.cols) {
            let n = norm(row);
            if n > 0.0 {
                let s = radius / n;
                row.iter_mut().for_each(|v| *v *= s);
            }
        }
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.row_iter().map(norm).collect()
    }
}

/// A dense vector of `f64` with all entries finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseVector::new"));
        }
        Ok(Self(data))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        Self(data)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        dot(&self.0, &other.0)
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Self {
        v.0
    }
}

/// Unrolled dot product; eight independent accumulators let the compiler vectorize.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += a·x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_bad_length_and_nan() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(DenseVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn products_agree_with_naive_loops() {
        let a = DenseMatrix::from_fn(3, 11, |i, j| (i as f64 + 1.0) * 0.3 - j as f64 * 0.17);
        let b = DenseMatrix::from_fn(4, 11, |i, j| ((i * 7 + j) % 5) as f64 - 2.0);
        let abt = a.matmul_transpose(&b).unwrap();
        let ab_t = a.matmul(&b.transpose()).unwrap();
        let atb = a.transpose().transpose_matmul(&b.transpose()).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let naive: f64 = (0..11).map(|k| a.get(i, k) * b.get(j, k)).sum();
                assert!((abt.get(i, j) - naive).abs() < 1e-12);
                assert!((ab_t.get(i, j) - naive).abs() < 1e-12);
                assert!((atb.get(i, j) - naive).abs() < 1e-12);
            }
        }
        let g = a.gram();
        assert_eq!(g, a.matmul_transpose(&a).unwrap());
    }

    #[test]
    fn matvec_and_transpose_matvec() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.mat_vec(&[1.0, 0.0, -1.0]).unwrap(), vec![-2.0, -2.0]);
        assert_eq!(a.t_mat_vec(&[1.0, -1.0]).unwrap(), vec![-3.0, -3.0, -3.0]);
        assert!(a.mat_vec(&[1.0]).is_err());
    }

    #[test]
    fn normalize_rows_hits_radius() {
        let mut a = DenseMatrix::from_fn(5, 7, |i, j| (i + 2 * j) as f64 - 3.5);
        a.normalize_rows(7f64.sqrt());
        for n in a.row_norms() {
            assert!((n - 7f64.sqrt()).abs() < 1e-12);
        }
    }
}
