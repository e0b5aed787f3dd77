//! Dense factorizations: Householder thin QR, one-sided Jacobi SVD and
//! Cholesky solves.

use crate::error::{shape, Error, Result};
use crate::flops::{cost, FlopLedger};
use crate::matrix::{axpy, dot, norm, Matrix};

/// Relative tolerance below which a QR diagonal entry marks rank deficiency.
pub const RANK_TOL: f64 = 1e-12;

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;

/// Thin QR factorization `A = Q·R` of a tall matrix.
///
/// `R` has a nonnegative diagonal, which makes the factorization unique for
/// full-rank input.
pub fn qr_thin(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let (m, k) = a.shape();
    if k == 0 || m < k {
        return Err(shape("qr_thin", format!("need rows >= cols >= 1, got {m}x{k}")));
    }
    let tol = RANK_TOL * a.frobenius_norm();
    let mut cols = a.columns();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = Matrix::zeros(k, k);

    for j in 0..k {
        let x = &cols[j][j..];
        let x_norm = norm(x);
        if x_norm <= tol || x_norm == 0.0 {
            return Err(Error::RankDeficient {
                column: j,
                pivot: x_norm,
            });
        }
        let alpha = if x[0] >= 0.0 { -x_norm } else { x_norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let v_norm2 = dot(&v, &v);
        for col in cols.iter_mut().skip(j + 1) {
            let tail = &mut col[j..];
            let f = 2.0 * dot(&v, tail) / v_norm2;
            axpy(-f, &v, tail);
        }
        r[(j, j)] = alpha;
        for l in j + 1..k {
            r[(j, l)] = cols[l][j];
        }
        reflectors.push(v);
    }

    // Accumulate Q = H_0 ⋯ H_{k-1} applied to the first k unit vectors.
    let mut q_cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for (j, v) in reflectors.iter().enumerate().rev() {
        let v_norm2 = dot(v, v);
        for col in q_cols.iter_mut().skip(j) {
            let tail = &mut col[j..];
            let f = 2.0 * dot(v, tail) / v_norm2;
            axpy(-f, v, tail);
        }
    }

    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for l in j..k {
                r[(j, l)] = -r[(j, l)];
            }
            q_cols[j].iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok((Matrix::from_columns(&q_cols)?, r))
}

pub fn qr_thin_counted(a: &Matrix, ledger: &mut FlopLedger, phase: &str) -> Result<(Matrix, Matrix)> {
    let out = qr_thin(a)?;
    ledger.charge(phase, cost::qr(a.rows(), a.cols()));
    Ok(out)
}

/// Thin singular value decomposition `B = U·diag(d)·Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows × r` with orthonormal columns, `r = min(rows, cols)`.
    pub u: Matrix,
    /// Descending, nonnegative.
    pub d: Vec<f64>,
    /// `cols × r` with orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let ud = self.u.scale_columns(&self.d).expect("svd factors conform");
        ud.matmul(&self.v.transpose()).expect("svd factors conform")
    }
}

/// Dense SVD by one-sided (Hestenes) Jacobi rotations.
///
/// Intended for matrices that are small along at least one dimension; the
/// rotations act on the shorter side.
pub fn svd_dense(b: &Matrix) -> Result<Svd> {
    let (rows, cols) = b.shape();
    if rows == 0 || cols == 0 {
        return Err(shape("svd_dense", "empty matrix"));
    }
    if rows >= cols {
        jacobi_tall(b)
    } else {
        let t = jacobi_tall(&b.transpose())?;
        Ok(Svd {
            u: t.v,
            d: t.d,
            v: t.u,
        })
    }
}

pub fn svd_dense_counted(b: &Matrix, ledger: &mut FlopLedger, phase: &str) -> Result<Svd> {
    let out = svd_dense(b)?;
    ledger.charge(phase, cost::svd(b.rows(), b.cols()));
    Ok(out)
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

fn pair_mut(v: &mut [Vec<f64>], p: usize, q: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    debug_assert!(p < q);
    let (lo, hi) = v.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

fn jacobi_tall(a: &Matrix) -> Result<Svd> {
    let (m, n) = a.shape();
    let mut cols = a.columns();
    let mut v_cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut norms2: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();

    let mut converged = n == 1;
    let mut worst = 0.0;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        worst = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms2[p];
                let beta = norms2[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                let rel = gamma.abs() / (alpha * beta).sqrt();
                if rel <= JACOBI_TOL {
                    continue;
                }
                worst = worst.max(rel);
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                {
                    let (x, y) = pair_mut(&mut cols, p, q);
                    rotate(x, y, c, s);
                }
                {
                    let (x, y) = pair_mut(&mut v_cols, p, q);
                    rotate(x, y, c, s);
                }
                norms2[p] = dot(&cols[p], &cols[p]);
                norms2[q] = dot(&cols[q], &cols[q]);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "svd_dense",
            iterations: JACOBI_MAX_SWEEPS,
            residual: worst,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sigma: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let sigma_max = sigma[order[0]];
    let zero_tol = (m.max(n) as f64) * f64::EPSILON * sigma_max;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if sigma[j] > zero_tol && sigma[j] > 0.0 {
            u_cols.push(cols[j].iter().map(|x| x / sigma[j]).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            missing.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &missing);

    let d = order.iter().map(|&j| sigma[j]).collect();
    let v_sorted: Vec<Vec<f64>> = order.iter().map(|&j| v_cols[j].clone()).collect();
    Ok(Svd {
        u: Matrix::from_columns(&u_cols)?,
        d,
        v: Matrix::from_columns(&v_sorted)?,
    })
}

/// Fills the columns listed in `missing` with unit vectors orthogonal to
/// every other column (Gram–Schmidt against the standard basis, twice).
fn complete_orthonormal(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let m = cols[0].len();
    let mut candidate = 0;
    for &slot in missing {
        loop {
            assert!(candidate < m, "cannot complete an orthonormal basis");
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (j, c) in cols.iter().enumerate() {
                    if j == slot || c.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let f = dot(c, &e);
                    axpy(-f, c, &mut e);
                }
            }
            let len = norm(&e);
            if len > 0.5 {
                cols[slot] = e.iter().map(|v| v / len).collect();
                break;
            }
        }
    }
}

/// Solves `A·x = b` for symmetric positive definite `A` by Cholesky.
///
/// A pivot at or below `m·ε·max(diag A)` is reported as [`Error::Singular`].
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let m = a.rows();
    if a.cols() != m || b.len() != m {
        return Err(shape(
            "cholesky_solve",
            format!("{:?} system with rhs of length {}", a.shape(), b.len()),
        ));
    }
    let max_diag = (0..m).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    let tol = m as f64 * f64::EPSILON * max_diag;
    let mut l = Matrix::zeros(m, m);
    for j in 0..m {
        let lj = l.row(j)[..j].to_vec();
        let pivot = a[(j, j)] - dot(&lj, &lj);
        if !(pivot > tol) {
            return Err(Error::Singular { row: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..m {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &lj);
            l[(i, j)] = s / ljj;
        }
    }
    // L·z = b
    let mut z = vec![0.0; m];
    for i in 0..m {
        z[i] = (b[i] - dot(&l.row(i)[..i], &z[..i])) / l[(i, i)];
    }
    // Lᵀ·x = z
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = z[i];
        for k in i + 1..m {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

pub fn cholesky_solve_counted(
    a: &Matrix,
    b: &[f64],
    ledger: &mut FlopLedger,
    phase: &str,
) -> Result<Vec<f64>> {
    let x = cholesky_solve(a, b)?;
    let m = a.rows();
    ledger.charge(phase, cost::cholesky(m) + 2 * cost::triangular_solve(m));
    Ok(x)
}
