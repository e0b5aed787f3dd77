//! The two-stage LING estimator.
//!
//! Stage one projects `Y` onto an estimated top-`k2` left singular subspace
//! of `X`. Stage two runs exact-line-search gradient descent on the ridge
//! problem for the residuals `Yr = Y − B·BᵀY` and `Xr = X − B·BᵀX`, where
//! `B` is the stage-one basis. Because the top directions are gone, `Xr` is
//! far better conditioned than `X` and stage two needs few iterations.

use crate::error::{invalid, shape, Result};
use crate::flops::{cost, phase, FlopLedger};
use crate::gd::{ridge_gd_in, Checkpoint, GdConfig, SolverTrace};
use crate::matrix::{dot, matmul_counted, matvec_counted, t_matvec_counted, Matrix};
use crate::randsvd::{exact_top_svd, randomized_top_svd, RandSvdOutput, DEFAULT_POWER_ITERS};

/// Where the stage-one basis comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisSource {
    /// Gaussian sketch with power iteration.
    #[default]
    Randomized,
    /// Full dense SVD of `X`; for oracle checks on small problems.
    Exact,
}

#[derive(Debug, Clone)]
pub struct LingConfig {
    pub lambda: f64,
    pub k2: usize,
    pub n2: usize,
    pub power_iters: usize,
    pub seed: u64,
    /// Shrink the stage-one coefficients by `d²/(d² + nλ)`. Selects the
    /// singular-vector basis `U1`; without it the sketch basis `Q1` is used.
    pub shrink: bool,
    /// Gradient-norm early stop for stage two; zero disables it.
    pub stop_tol: f64,
    pub basis: BasisSource,
}

impl LingConfig {
    pub fn new(lambda: f64, k2: usize, n2: usize) -> Self {
        Self {
            lambda,
            k2,
            n2,
            power_iters: DEFAULT_POWER_ITERS,
            seed: 0,
            shrink: false,
            stop_tol: 0.0,
            basis: BasisSource::Randomized,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_power_iters(mut self, power_iters: usize) -> Self {
        self.power_iters = power_iters;
        self
    }

    pub fn with_shrink(mut self, shrink: bool) -> Self {
        self.shrink = shrink;
        self
    }

    pub fn with_stop_tol(mut self, stop_tol: f64) -> Self {
        self.stop_tol = stop_tol;
        self
    }

    pub fn with_basis(mut self, basis: BasisSource) -> Self {
        self.basis = basis;
        self
    }
}

/// A fitted two-stage model.
#[derive(Debug, Clone)]
pub struct LingModel {
    /// `n×k2` stage-one basis (`U1` when shrinking, else `Q1`).
    pub basis: Matrix,
    /// `basisᵀY`.
    pub gamma1: Vec<f64>,
    /// Shrunk stage-one coefficients; equal to `gamma1` without shrinkage.
    pub gamma1_shrunk: Vec<f64>,
    /// Stage-two coefficients, length `p`.
    pub gamma2: Vec<f64>,
    /// Estimated top singular values.
    pub d: Vec<f64>,
    /// `p×k2` estimated right singular vectors.
    pub v1: Matrix,
    /// Single coefficient vector used for out-of-sample prediction.
    pub beta_effective: Vec<f64>,
    pub lambda: f64,
    pub k2: usize,
    pub n2: usize,
    pub shrink: bool,
}

impl LingModel {
    /// The in-sample estimator `basis·γ1,s + Xr·γ2`, uncounted.
    pub fn training_predictions(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.rows() != self.basis.rows() || x.cols() != self.gamma2.len() {
            return Err(shape(
                "training_predictions",
                format!("model fitted on {}x{}, got {:?}", self.basis.rows(), self.gamma2.len(), x.shape()),
            ));
        }
        let mut out = self.basis.matvec(&self.gamma1_shrunk)?;
        let x_g2 = x.matvec(&self.gamma2)?;
        let coords = self.basis.t_matvec(&x_g2)?;
        let proj = self.basis.matvec(&coords)?;
        for ((o, a), b) in out.iter_mut().zip(&x_g2).zip(&proj) {
            *o += a - b;
        }
        Ok(out)
    }

    pub fn predict(&self, x_test: &Matrix) -> Result<Vec<f64>> {
        ling_predict(self, x_test)
    }
}

/// Multiplies each coefficient by its ridge shrinkage factor `d²/(d² + nλ)`.
pub fn shrink_coefficients(gamma1: &[f64], d: &[f64], n: usize, lambda: f64) -> Result<Vec<f64>> {
    if gamma1.len() != d.len() {
        return Err(shape(
            "shrink_coefficients",
            format!("{} coefficients, {} singular values", gamma1.len(), d.len()),
        ));
    }
    let nl = n as f64 * lambda;
    Ok(gamma1
        .iter()
        .zip(d)
        .map(|(g, d)| {
            let d2 = d * d;
            if d2 + nl == 0.0 {
                *g
            } else {
                d2 / (d2 + nl) * g
            }
        })
        .collect())
}

/// `V1·diag(1/d)·c + g − V1·(V1ᵀg)`: the coefficient vector whose product with
/// `X` reproduces `U1·c + Xr·g` when `U1, d, V1` are exact singular triplets.
///
/// Directions with a vanishing singular value contribute nothing.
pub(crate) fn fold_coefficients(
    v1: &Matrix,
    d: &[f64],
    coords: &[f64],
    gamma2: Option<&[f64]>,
    ledger: &mut FlopLedger,
    ph: &str,
) -> Result<Vec<f64>> {
    let (p, k) = v1.shape();
    let d_max = d.iter().cloned().fold(0.0, f64::max);
    let scaled: Vec<f64> = coords
        .iter()
        .zip(d)
        .map(|(c, d)| if *d > 1e-12 * d_max && *d > 0.0 { c / d } else { 0.0 })
        .collect();
    ledger.charge(ph, cost::elementwise(k));
    let mut beta = matvec_counted(v1, &scaled, ledger, ph)?;
    if let Some(g2) = gamma2 {
        let along = t_matvec_counted(v1, g2, ledger, ph)?;
        let proj = matvec_counted(v1, &along, ledger, ph)?;
        for ((b, g), q) in beta.iter_mut().zip(g2).zip(&proj) {
            *b += g - q;
        }
        ledger.charge(ph, cost::elementwise(2 * p));
    }
    Ok(beta)
}

fn validate(x: &Matrix, y: &[f64], cfg: &LingConfig) -> Result<()> {
    if y.len() != x.rows() {
        return Err(shape("ling_fit", format!("X has {} rows, Y has {}", x.rows(), y.len())));
    }
    if !(cfg.lambda >= 0.0) || !cfg.lambda.is_finite() {
        return Err(invalid(format!("lambda must be finite and >= 0, got {}", cfg.lambda)));
    }
    let max = x.rows().min(x.cols());
    if cfg.k2 > max {
        return Err(invalid(format!("k2 = {} exceeds min(n, p) = {max}", cfg.k2)));
    }
    Ok(())
}

/// Fits the two-stage estimator.
///
/// The trace starts with a checkpoint after stage one (its cost includes
/// the whole subspace estimate) followed by one checkpoint per stage-two
/// iteration. Objectives are those of the stage-two ridge problem.
pub fn ling_fit(
    x: &Matrix,
    y: &[f64],
    cfg: &LingConfig,
    ledger: &mut FlopLedger,
) -> Result<(LingModel, SolverTrace)> {
    validate(x, y, cfg)?;
    let (n, p) = x.shape();
    let gd_cfg = GdConfig::new(cfg.n2, cfg.lambda).with_stop_tol(cfg.stop_tol);

    if cfg.k2 == 0 {
        let (gamma2, trace) = ridge_gd_in(x, y, &gd_cfg, ledger, phase::STAGE2)?;
        let model = LingModel {
            basis: Matrix::zeros(n, 0),
            gamma1: Vec::new(),
            gamma1_shrunk: Vec::new(),
            beta_effective: gamma2.clone(),
            gamma2,
            d: Vec::new(),
            v1: Matrix::zeros(p, 0),
            lambda: cfg.lambda,
            k2: 0,
            n2: cfg.n2,
            shrink: cfg.shrink,
        };
        return Ok((model, trace));
    }

    let svd: RandSvdOutput = match cfg.basis {
        BasisSource::Randomized => randomized_top_svd(x, cfg.k2, cfg.power_iters, cfg.seed, ledger)?,
        BasisSource::Exact => exact_top_svd(x, cfg.k2, ledger)?,
    };
    let basis = if cfg.shrink { svd.u1.clone() } else { svd.q1.clone() };
    let k = cfg.k2;

    // Stage one.
    let s1 = phase::STAGE1;
    let gamma1 = t_matvec_counted(&basis, y, ledger, s1)?;
    let fitted1 = matvec_counted(&basis, &gamma1, ledger, s1)?;
    let y_r: Vec<f64> = y.iter().zip(&fitted1).map(|(a, b)| a - b).collect();
    ledger.charge(s1, cost::elementwise(n));
    // B·BᵀX = U1·diag(d)·V1ᵀ for either basis, reusing the SVD of Q1ᵀX.
    let dv = svd.v1.scale_columns(&svd.d)?.transpose();
    ledger.charge(s1, cost::elementwise(k * p));
    let top = matmul_counted(&svd.u1, &dv, ledger, s1)?;
    let x_r = x.sub(&top)?;
    ledger.charge(s1, cost::elementwise(n * p));

    let mut trace = SolverTrace::default();
    trace.checkpoints.push(Checkpoint {
        flops: ledger.total(),
        objective: dot(&y_r, &y_r),
    });

    // Stage two.
    let (gamma2, stage2) = ridge_gd_in(&x_r, &y_r, &gd_cfg, ledger, phase::STAGE2)?;
    trace.checkpoints.extend(stage2.checkpoints);
    trace.final_gradient_norm = stage2.final_gradient_norm;

    let gamma1_shrunk = if cfg.shrink {
        let s = shrink_coefficients(&gamma1, &svd.d, n, cfg.lambda)?;
        ledger.charge(s1, cost::elementwise(3 * k));
        s
    } else {
        gamma1.clone()
    };

    // Coordinates of the stage-one fit in the U1 basis.
    let coords = if cfg.shrink {
        gamma1_shrunk.clone()
    } else {
        let c = svd.u0.t_matvec(&gamma1_shrunk)?;
        ledger.charge(phase::FOLD, cost::matvec(k, k));
        c
    };
    let beta_effective = fold_coefficients(&svd.v1, &svd.d, &coords, Some(&gamma2), ledger, phase::FOLD)?;

    let model = LingModel {
        basis,
        gamma1,
        gamma1_shrunk,
        gamma2,
        d: svd.d,
        v1: svd.v1,
        beta_effective,
        lambda: cfg.lambda,
        k2: k,
        n2: cfg.n2,
        shrink: cfg.shrink,
    };
    Ok((model, trace))
}

/// `X_test · beta_effective`.
pub fn ling_predict(model: &LingModel, x_test: &Matrix) -> Result<Vec<f64>> {
    if x_test.cols() != model.beta_effective.len() {
        return Err(shape(
            "ling_predict",
            format!("model has {} features, test matrix has {}", model.beta_effective.len(), x_test.cols()),
        ));
    }
    x_test.matvec(&model.beta_effective)
}
