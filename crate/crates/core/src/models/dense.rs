//! Row-major f64 matrices and the handful of kernels the models need.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("shape mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix, ShapeError> {
        if data.len() != rows * cols {
            return Err(ShapeError::Mismatch(format!("{} values for {rows}x{cols}", data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix, ShapeError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(ShapeError::Mismatch(format!("ragged row of {} values, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (i, &r) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(r));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn add_row_vector(&mut self, v: &[f64]) {
        for r in 0..self.rows {
            self.row_mut(r).iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            out.iter_mut().zip(self.row(r)).for_each(|(a, b)| *a += b);
        }
        out
    }

    pub fn relu_inplace(&mut self) {
        self.data.iter_mut().for_each(|x| *x = x.max(0.0));
    }

    /// Zeroes entries of `self` wherever `pre` is not positive.
    pub fn relu_backward_inplace(&mut self, pre: &Matrix) {
        self.data.iter_mut().zip(&pre.data).for_each(|(g, &p)| {
            if p <= 0.0 {
                *g = 0.0
            }
        });
    }

    pub fn softmax_rows_inplace(&mut self) {
        for r in 0..self.rows {
            let row = self.row_mut(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                s += *x;
            }
            row.iter_mut().for_each(|x| *x /= s);
        }
    }

    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// `c = a · b` (or `aᵀ · b`, `a · bᵀ` per the flags), overwriting `c`.
pub fn gemm(a: &Matrix, ta: bool, b: &Matrix, tb: bool, c: &mut Matrix) -> Result<(), ShapeError> {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (k2, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    if k != k2 || c.rows != m || c.cols != n {
        return Err(ShapeError::Mismatch(format!(
            "{}x{}{} times {}x{}{} into {}x{}",
            a.rows,
            a.cols,
            if ta { "ᵀ" } else { "" },
            b.rows,
            b.cols,
            if tb { "ᵀ" } else { "" },
            c.rows,
            c.cols
        )));
    }
    if m == 0 || n == 0 {
        return Ok(());
    }
    if k == 0 {
        c.fill(0.0);
        return Ok(());
    }
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: the strides describe exactly the row-major buffers checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
    Ok(())
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix, ShapeError> {
    let mut c = Matrix::zeros(a.rows, b.cols);
    gemm(a, false, b, false, &mut c)?;
    Ok(c)
}

/// Square sparse matrix in compressed row form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Csr {
    pub n: usize,
    pub row_start: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn from_rows(rows: &[Vec<(u32, f64)>]) -> Csr {
        let mut row_start = Vec::with_capacity(rows.len() + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_start.push(0);
        for r in rows {
            for &(c, v) in r {
                col.push(c);
                val.push(v);
            }
            row_start.push(col.len());
        }
        Csr { n: rows.len(), row_start, col, val }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_start[r]..self.row_start[r + 1]).map(|i| (self.col[i] as usize, self.val[i]))
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m.set(r, c, v);
            }
        }
        m
    }

    /// `out += self · x`.
    pub fn mul_add(&self, x: &Matrix, out: &mut Matrix) {
        debug_assert_eq!(x.rows, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                let (src, dst) = (c * x.cols, r * out.cols);
                for j in 0..x.cols {
                    out.data[dst + j] += v * x.data[src + j];
                }
            }
        }
    }

    /// `out += selfᵀ · x`.
    pub fn transpose_mul_add(&self, x: &Matrix, out: &mut Matrix) {
        debug_assert_eq!(x.rows, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                let (src, dst) = (r * x.cols, c * out.cols);
                for j in 0..x.cols {
                    out.data[dst + j] += v * x.data[src + j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for j in 0..b.cols {
                c.set(i, j, (0..a.cols).map(|k| a.get(i, k) * b.get(k, j)).sum());
            }
        }
        c
    }

    fn transpose(a: &Matrix) -> Matrix {
        let mut t = Matrix::zeros(a.cols, a.rows);
        for i in 0..a.rows {
            for j in 0..a.cols {
                t.set(j, i, a.get(i, j));
            }
        }
        t
    }

    #[test]
    fn gemm_variants_match_naive() {
        let a = Matrix::from_vec(3, 4, (0..12).map(|x| x as f64 * 0.5 - 2.0).collect()).unwrap();
        let b = Matrix::from_vec(4, 2, (0..8).map(|x| (x as f64).sin()).collect()).unwrap();
        let want = naive(&a, &b);
        let close = |x: &Matrix, y: &Matrix| x.data.iter().zip(&y.data).all(|(p, q)| (p - q).abs() < 1e-12);
        assert!(close(&matmul(&a, &b).unwrap(), &want));
        let mut c = Matrix::zeros(3, 2);
        gemm(&transpose(&a), true, &b, false, &mut c).unwrap();
        assert!(close(&c, &want));
        gemm(&a, false, &transpose(&b), true, &mut c).unwrap();
        assert!(close(&c, &want));
        assert!(gemm(&a, false, &a, false, &mut c).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut m = Matrix::from_vec(2, 3, vec![1000.0, 0.0, -1000.0, 1.0, 2.0, 3.0]).unwrap();
        m.softmax_rows_inplace();
        for r in 0..2 {
            assert!((m.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(m.argmax_rows(), vec![0, 2]);
    }

    #[test]
    fn sparse_product() {
        let s = Csr::from_rows(&[vec![(1, 2.0)], vec![(0, 0.5), (1, 1.0)]]);
        let x = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut out = Matrix::zeros(2, 2);
        s.mul_add(&x, &mut out);
        assert_eq!(out, naive(&s.to_dense(), &x));
    }
}
