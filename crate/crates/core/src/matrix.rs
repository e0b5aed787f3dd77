//! Dense row-major matrices and the counted products the solvers use.

use std::ops::{Index, IndexMut};

use crate::error::{invalid, shape, Result};
use crate::flops::{cost, FlopLedger};

/// Dense real matrix stored in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape(
                "from_vec",
                format!("{} entries for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(shape("from_rows", format!("row {bad} is ragged")));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
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

    /// Builds a matrix from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(shape("from_columns", "columns of unequal length"));
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        let k = k.min(self.cols);
        Self::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                out.data[j * self.rows + i] = *v;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Multiplies column `j` by `factors[j]`, i.e. `self · diag(factors)`.
    pub fn scale_columns(&self, factors: &[f64]) -> Result<Matrix> {
        if factors.len() != self.cols {
            return Err(shape(
                "scale_columns",
                format!("{} factors for {} columns", factors.len(), self.cols),
            ));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for (v, f) in out.row_mut(i).iter_mut().zip(factors) {
                *v *= f;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(shape(
                "sub",
                format!("{:?} - {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(shape(
                "matmul",
                format!("{:?} · {:?}", self.shape(), other.shape()),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without forming the transpose of `self` explicitly.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(shape(
                "t_matmul",
                format!("{:?}ᵀ · {:?}", self.shape(), other.shape()),
            ));
        }
        let n = other.cols;
        let mut out = Matrix::zeros(self.cols, n);
        for k in 0..self.rows {
            let b_row = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(shape(
                "matvec",
                format!("{:?} · vector of length {}", self.shape(), v.len()),
            ));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ · v`, accumulated row by row.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(shape(
                "t_matvec",
                format!("{:?}ᵀ · vector of length {}", self.shape(), v.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            axpy(vi, self.row(i), &mut out);
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// `A·B`, charging `2·A.rows·A.cols·B.cols` to `phase`.
pub fn matmul_counted(
    a: &Matrix,
    b: &Matrix,
    ledger: &mut FlopLedger,
    phase: &str,
) -> Result<Matrix> {
    let out = a.matmul(b)?;
    ledger.charge(phase, cost::matmul(a.rows, a.cols, b.cols));
    Ok(out)
}

/// `Aᵀ·B`, charged like the equivalent explicit product.
pub fn t_matmul_counted(
    a: &Matrix,
    b: &Matrix,
    ledger: &mut FlopLedger,
    phase: &str,
) -> Result<Matrix> {
    let out = a.t_matmul(b)?;
    ledger.charge(phase, cost::matmul(a.cols, a.rows, b.cols));
    Ok(out)
}

pub fn matvec_counted(
    a: &Matrix,
    v: &[f64],
    ledger: &mut FlopLedger,
    phase: &str,
) -> Result<Vec<f64>> {
    let out = a.matvec(v)?;
    ledger.charge(phase, cost::matvec(a.rows, a.cols));
    Ok(out)
}

pub fn t_matvec_counted(
    a: &Matrix,
    v: &[f64],
    ledger: &mut FlopLedger,
    phase: &str,
) -> Result<Vec<f64>> {
    let out = a.t_matvec(v)?;
    ledger.charge(phase, cost::matvec(a.rows, a.cols));
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha·x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::gaussian_matrix;

    fn triple_loop(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    #[test]
    fn identity_product_and_charge() {
        let b = gaussian_matrix(3, 5, 1);
        let mut ledger = FlopLedger::new();
        let out = matmul_counted(&Matrix::identity(3), &b, &mut ledger, "t").unwrap();
        assert_eq!(out, b);
        assert_eq!(ledger.total(), 2 * 3 * 3 * 5);
    }

    #[test]
    fn two_by_three_times_three_by_four_costs_48() {
        let a = gaussian_matrix(2, 3, 2);
        let b = gaussian_matrix(3, 4, 3);
        let mut ledger = FlopLedger::new();
        matmul_counted(&a, &b, &mut ledger, "t").unwrap();
        assert_eq!(ledger.total(), 48);
    }

    #[test]
    fn random_3x3_matches_triple_loop() {
        let a = gaussian_matrix(3, 3, 10);
        let b = gaussian_matrix(3, 3, 11);
        let fast = a.matmul(&b).unwrap();
        let slow = triple_loop(&a, &b);
        for (x, y) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn matmul_rejects_mismatched_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let mut ledger = FlopLedger::new();
        assert!(matmul_counted(&a, &b, &mut ledger, "t").is_err());
        assert_eq!(ledger.total(), 0);
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let a = gaussian_matrix(7, 4, 5);
        let b = gaussian_matrix(7, 3, 6);
        let v = gaussian_matrix(7, 1, 7).into_vec();
        let explicit = a.transpose().matmul(&b).unwrap();
        let implicit = a.t_matmul(&b).unwrap();
        for (x, y) in explicit.as_slice().iter().zip(implicit.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let tv = a.t_matvec(&v).unwrap();
        let ev = a.transpose().matvec(&v).unwrap();
        for (x, y) in tv.iter().zip(&ev) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(100))]
        #[test]
        fn matmul_agrees_with_triple_loop(
            m in 1usize..=20, k in 1usize..=20, n in 1usize..=20, seed in 0u64..1000
        ) {
            let a = gaussian_matrix(m, k, seed);
            let b = gaussian_matrix(k, n, seed + 7919);
            let mut ledger = FlopLedger::new();
            let fast = matmul_counted(&a, &b, &mut ledger, "t").unwrap();
            let slow = triple_loop(&a, &b);
            let err = fast.sub(&slow).unwrap().frobenius_norm();
            proptest::prop_assert!(err <= 1e-12 * slow.frobenius_norm().max(1e-300));
            proptest::prop_assert_eq!(ledger.total(), (2 * m * k * n) as u64);
        }
    }
}
