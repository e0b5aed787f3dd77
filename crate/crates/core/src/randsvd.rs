//! Randomized estimate of the top singular subspace by Gaussian sketching
//! and power iteration.

use crate::decomp::{qr_thin_counted, svd_dense, svd_dense_counted};
use crate::error::{invalid, Result};
use crate::flops::{phase, FlopLedger};
use crate::matrix::{matmul_counted, t_matmul_counted, Matrix};
use crate::random::gaussian_matrix;

/// Power iterations used when the caller does not ask otherwise.
pub const DEFAULT_POWER_ITERS: usize = 1;

/// From this many power steps on, the sketch is re-orthonormalized after
/// every step; fewer steps run unnormalized.
pub const REORTHONORMALIZE_FROM: usize = 3;

/// Estimated top-`k` singular triplets of an `n×p` matrix.
#[derive(Debug, Clone)]
pub struct RandSvdOutput {
    /// `n×k` orthonormal basis of the sketched range.
    pub q1: Matrix,
    /// `n×k` estimated left singular vectors, `q1·U0`.
    pub u1: Matrix,
    /// `k×k` left singular vectors of `Q1ᵀX`; rotates `q1` coordinates into `u1` ones.
    pub u0: Matrix,
    /// Estimated singular values, descending.
    pub d: Vec<f64>,
    /// `p×k` estimated right singular vectors.
    pub v1: Matrix,
    pub power_iterations: usize,
}

impl RandSvdOutput {
    pub fn rank(&self) -> usize {
        self.d.len()
    }
}

fn check_rank(x: &Matrix, k: usize) -> Result<()> {
    let max = x.rows().min(x.cols());
    if k == 0 || k > max {
        return Err(invalid(format!(
            "target rank {k} must lie in 1..={max} for a {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

/// Sketches `(XXᵀ)ⁱ·X·R` with a Gaussian `p×k` matrix `R`, orthonormalizes
/// it, and takes the dense SVD of the `k×p` projection `Q1ᵀX`.
///
/// Every product is charged to the `svd` phase of `ledger`.
pub fn randomized_top_svd(
    x: &Matrix,
    k: usize,
    power_iters: usize,
    seed: u64,
    ledger: &mut FlopLedger,
) -> Result<RandSvdOutput> {
    check_rank(x, k)?;
    let ph = phase::SVD;
    let r1 = gaussian_matrix(x.cols(), k, seed);
    let mut sketch = matmul_counted(x, &r1, ledger, ph)?;
    let reorth = power_iters >= REORTHONORMALIZE_FROM;
    for _ in 0..power_iters {
        if reorth {
            sketch = qr_thin_counted(&sketch, ledger, ph)?.0;
        }
        let back = t_matmul_counted(x, &sketch, ledger, ph)?;
        sketch = matmul_counted(x, &back, ledger, ph)?;
    }
    let (q1, _) = qr_thin_counted(&sketch, ledger, ph)?;
    let projected = t_matmul_counted(&q1, x, ledger, ph)?;
    let small = svd_dense_counted(&projected, ledger, ph)?;
    let u1 = matmul_counted(&q1, &small.u, ledger, ph)?;
    Ok(RandSvdOutput {
        q1,
        u1,
        u0: small.u,
        d: small.d,
        v1: small.v,
        power_iterations: power_iters,
    })
}

/// Top-`k` triplets from a full dense SVD of `x`; the exact counterpart of
/// [`randomized_top_svd`], charged as one dense SVD.
pub fn exact_top_svd(x: &Matrix, k: usize, ledger: &mut FlopLedger) -> Result<RandSvdOutput> {
    check_rank(x, k)?;
    let full = svd_dense_counted(x, ledger, phase::SVD)?;
    let u1 = full.u.leading_columns(k);
    Ok(RandSvdOutput {
        q1: u1.clone(),
        u1,
        u0: Matrix::identity(k),
        d: full.d[..k].to_vec(),
        v1: full.v.leading_columns(k),
        power_iterations: 0,
    })
}

/// Singular values of `x` (uncounted), padded with zeros to length `x.cols()`.
pub fn singular_values_padded(x: &Matrix) -> Result<Vec<f64>> {
    let mut d = svd_dense(x)?.d;
    d.resize(x.cols(), 0.0);
    Ok(d)
}
