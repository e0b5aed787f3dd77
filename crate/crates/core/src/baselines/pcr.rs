use crate::error::{shape, Result};
use crate::flops::{cost, phase, FlopLedger};
use crate::ling::{fold_coefficients, BasisSource};
use crate::matrix::{t_matvec_counted, Matrix};
use crate::randsvd::{exact_top_svd, randomized_top_svd};

/// Regression of `Y` on an estimated top-`k1` principal subspace.
#[derive(Debug, Clone)]
pub struct PcrModel {
    pub k1: usize,
    /// `n×k1` orthonormal basis the response was projected on.
    pub basis: Matrix,
    /// `p×k1` estimated right singular vectors.
    pub v_top: Matrix,
    /// `basisᵀY`.
    pub coeffs: Vec<f64>,
    pub beta_effective: Vec<f64>,
}

impl PcrModel {
    /// `basis·coeffs`, the projection of the training response.
    pub fn training_predictions(&self) -> Result<Vec<f64>> {
        self.basis.matvec(&self.coeffs)
    }

    pub fn predict(&self, x_test: &Matrix) -> Result<Vec<f64>> {
        if x_test.cols() != self.beta_effective.len() {
            return Err(shape(
                "pcr_predict",
                format!("model has {} features, test matrix has {}", self.beta_effective.len(), x_test.cols()),
            ));
        }
        x_test.matvec(&self.beta_effective)
    }
}

/// Projects `Y` on the top-`k1` subspace of `X`; all work is charged to the
/// `pcr` phase.
pub fn pcr_fit(
    x: &Matrix,
    y: &[f64],
    k1: usize,
    power_iters: usize,
    seed: u64,
    basis: BasisSource,
    ledger: &mut FlopLedger,
) -> Result<PcrModel> {
    if y.len() != x.rows() {
        return Err(shape("pcr_fit", format!("X has {} rows, Y has {}", x.rows(), y.len())));
    }
    let ph = phase::PCR;
    let mut svd_ledger = FlopLedger::new();
    let svd = match basis {
        BasisSource::Randomized => randomized_top_svd(x, k1, power_iters, seed, &mut svd_ledger)?,
        BasisSource::Exact => exact_top_svd(x, k1, &mut svd_ledger)?,
    };
    ledger.charge(ph, svd_ledger.total());
    let coeffs = t_matvec_counted(&svd.q1, y, ledger, ph)?;
    let along_u1 = svd.u0.t_matvec(&coeffs)?;
    ledger.charge(ph, cost::matvec(k1, k1));
    let beta_effective = fold_coefficients(&svd.v1, &svd.d, &along_u1, None, ledger, ph)?;
    Ok(PcrModel {
        k1,
        basis: svd.q1,
        v_top: svd.v1,
        coeffs,
        beta_effective,
    })
}
