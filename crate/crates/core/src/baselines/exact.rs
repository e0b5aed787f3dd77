use crate::decomp::cholesky_solve_counted;
use crate::error::{invalid, shape, Result};
use crate::flops::{cost, phase, FlopLedger};
use crate::matrix::{matmul_counted, t_matmul_counted, t_matvec_counted, Matrix};

/// Which normal equations to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RidgeMode {
    /// `(XᵀX + nλI)β = XᵀY`, a `p×p` system.
    Primal,
    /// `β = Xᵀ(XXᵀ + nλI)⁻¹Y`, an `n×n` system.
    Dual,
    /// Whichever system is smaller.
    #[default]
    Auto,
}

/// Closed-form ridge coefficients, charged to the `exact` phase.
pub fn ridge_exact(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    mode: RidgeMode,
    ledger: &mut FlopLedger,
) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(shape("ridge_exact", format!("X has {n} rows, Y has {}", y.len())));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let ph = phase::EXACT;
    let nl = n as f64 * lambda;
    let primal = match mode {
        RidgeMode::Primal => true,
        RidgeMode::Dual => false,
        RidgeMode::Auto => p <= n,
    };
    if primal {
        let mut gram = t_matmul_counted(x, x, ledger, ph)?;
        for i in 0..p {
            gram[(i, i)] += nl;
        }
        ledger.charge(ph, cost::elementwise(p));
        let rhs = t_matvec_counted(x, y, ledger, ph)?;
        cholesky_solve_counted(&gram, &rhs, ledger, ph)
    } else {
        let mut kernel = matmul_counted(x, &x.transpose(), ledger, ph)?;
        for i in 0..n {
            kernel[(i, i)] += nl;
        }
        ledger.charge(ph, cost::elementwise(n));
        let alpha = cholesky_solve_counted(&kernel, y, ledger, ph)?;
        t_matvec_counted(x, &alpha, ledger, ph)
    }
}
