//! Gradient descent with exact line search on the ridge objective
//! `‖Xγ − Y‖² + nλ‖γ‖²`.
//!
//! The Hessian `Q = 2XᵀX + 2nλI` is never formed. A step costs three
//! matrix–vector products: `Xγ`, `Xᵀr` and `Xw`, with `wᵀQw` obtained as
//! `2‖Xw‖² + 2nλ‖w‖²`.

use crate::error::{invalid, shape, Error, Result};
use crate::flops::{cost, phase, FlopLedger};
use crate::matrix::{dot, matvec_counted, t_matvec_counted, Matrix};

#[derive(Debug, Clone)]
pub struct GdConfig {
    pub n_iters: usize,
    pub lambda: f64,
    /// Starting point; `None` means the zero vector.
    pub init: Option<Vec<f64>>,
    /// Stop once the gradient norm falls to this value. Zero disables it.
    pub stop_tol: f64,
}

impl GdConfig {
    pub fn new(n_iters: usize, lambda: f64) -> Self {
        Self {
            n_iters,
            lambda,
            init: None,
            stop_tol: 0.0,
        }
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = tol;
        self
    }

    pub fn with_init(mut self, init: Vec<f64>) -> Self {
        self.init = Some(init);
        self
    }

    fn validate(&self, p: usize) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(invalid("stop_tol must be >= 0"));
        }
        if let Some(init) = &self.init {
            if init.len() != p {
                return Err(shape("ridge_gd", format!("initial vector of length {} for p = {p}", init.len())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    /// Ledger total when the checkpoint was taken.
    pub flops: u64,
    pub objective: f64,
}

/// Cost/objective checkpoints recorded by an iterative solver.
#[derive(Debug, Clone, Default)]
pub struct SolverTrace {
    pub checkpoints: Vec<Checkpoint>,
    pub final_gradient_norm: f64,
}

impl SolverTrace {
    pub fn last_objective(&self) -> Option<f64> {
        self.checkpoints.last().map(|c| c.objective)
    }
}

fn check_problem(x: &Matrix, y: &[f64], gamma: &[f64]) -> Result<()> {
    if y.len() != x.rows() || gamma.len() != x.cols() {
        return Err(shape(
            "ridge",
            format!(
                "X is {}x{}, Y has {} entries, coefficients have {}",
                x.rows(),
                x.cols(),
                y.len(),
                gamma.len()
            ),
        ));
    }
    Ok(())
}

/// `‖Xγ − Y‖² + nλ‖γ‖²` with `n = X.rows`.
pub fn ridge_objective(x: &Matrix, y: &[f64], lambda: f64, gamma: &[f64]) -> Result<f64> {
    check_problem(x, y, gamma)?;
    let fit = x.matvec(gamma)?;
    let rss: f64 = fit.iter().zip(y).map(|(f, t)| (f - t).powi(2)).sum();
    Ok(rss + x.rows() as f64 * lambda * dot(gamma, gamma))
}

/// Gradient direction `w = 2XᵀY − Qγ` together with the residual `Xγ − Y`.
struct Descent {
    w: Vec<f64>,
    residual: Vec<f64>,
    norm: f64,
}

fn descent_direction(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    gamma: &[f64],
    ledger: &mut FlopLedger,
    ph: &str,
) -> Result<Descent> {
    let (n, p) = x.shape();
    let mut residual = matvec_counted(x, gamma, ledger, ph)?;
    residual.iter_mut().zip(y).for_each(|(r, t)| *r -= t);
    ledger.charge(ph, cost::elementwise(n));
    let xt_r = t_matvec_counted(x, &residual, ledger, ph)?;
    let nl2 = 2.0 * n as f64 * lambda;
    let w: Vec<f64> = xt_r.iter().zip(gamma).map(|(g, c)| -2.0 * g - nl2 * c).collect();
    ledger.charge(ph, cost::elementwise(3 * p));
    let norm2 = dot(&w, &w);
    ledger.charge(ph, cost::dot(p));
    Ok(Descent {
        w,
        residual,
        norm: norm2.sqrt(),
    })
}

/// Result of one exact-line-search step.
#[derive(Debug, Clone)]
pub struct GdStep {
    pub gamma: Vec<f64>,
    pub step_size: f64,
    /// Norm of the gradient direction at the input point.
    pub grad_norm: f64,
    /// True when the gradient vanished and no step was taken.
    pub converged: bool,
    /// `Xγ_next − Y`, maintained without another product.
    pub residual: Vec<f64>,
}

fn line_step(
    x: &Matrix,
    lambda: f64,
    gamma: &[f64],
    d: Descent,
    ledger: &mut FlopLedger,
    ph: &str,
) -> Result<GdStep> {
    let (n, p) = x.shape();
    if d.norm == 0.0 {
        return Ok(GdStep {
            gamma: gamma.to_vec(),
            step_size: 0.0,
            grad_norm: 0.0,
            converged: true,
            residual: d.residual,
        });
    }
    let xw = matvec_counted(x, &d.w, ledger, ph)?;
    let curvature = 2.0 * dot(&xw, &xw) + 2.0 * n as f64 * lambda * d.norm * d.norm;
    ledger.charge(ph, cost::dot(n) + 3);
    if !(curvature > 0.0) || !curvature.is_finite() {
        return Err(Error::Breakdown(format!(
            "wᵀQw = {curvature:e} with gradient norm {:e}",
            d.norm
        )));
    }
    let step = d.norm * d.norm / curvature;
    let next: Vec<f64> = gamma.iter().zip(&d.w).map(|(g, w)| g + step * w).collect();
    let residual: Vec<f64> = d.residual.iter().zip(&xw).map(|(r, v)| r + step * v).collect();
    ledger.charge(ph, cost::dot(p) + cost::dot(n));
    Ok(GdStep {
        gamma: next,
        step_size: step,
        grad_norm: d.norm,
        converged: false,
        residual,
    })
}

fn gd_step_in(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    gamma: &[f64],
    ledger: &mut FlopLedger,
    ph: &str,
) -> Result<GdStep> {
    check_problem(x, y, gamma)?;
    let d = descent_direction(x, y, lambda, gamma, ledger, ph)?;
    line_step(x, lambda, gamma, d, ledger, ph)
}

/// One step `γ + s·w` with the exact minimizing step `s = wᵀw / wᵀQw`.
pub fn gd_step(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    gamma: &[f64],
    ledger: &mut FlopLedger,
) -> Result<GdStep> {
    gd_step_in(x, y, lambda, gamma, ledger, phase::GD)
}

pub(crate) fn ridge_gd_in(
    x: &Matrix,
    y: &[f64],
    config: &GdConfig,
    ledger: &mut FlopLedger,
    ph: &str,
) -> Result<(Vec<f64>, SolverTrace)> {
    let p = x.cols();
    config.validate(p)?;
    let mut gamma = config.init.clone().unwrap_or_else(|| vec![0.0; p]);
    check_problem(x, y, &gamma)?;
    let n_lambda = x.rows() as f64 * config.lambda;
    let mut trace = SolverTrace::default();
    let mut final_grad = None;

    for _ in 0..config.n_iters {
        let d = descent_direction(x, y, config.lambda, &gamma, ledger, ph)?;
        if d.norm == 0.0 || d.norm <= config.stop_tol {
            final_grad = Some(d.norm);
            break;
        }
        let step = line_step(x, config.lambda, &gamma, d, ledger, ph)?;
        gamma = step.gamma;
        let objective = dot(&step.residual, &step.residual) + n_lambda * dot(&gamma, &gamma);
        trace.checkpoints.push(Checkpoint {
            flops: ledger.total(),
            objective,
        });
    }

    trace.final_gradient_norm = match final_grad {
        Some(g) => g,
        None => {
            // Diagnostic only, not part of the solver's cost.
            let mut scratch = FlopLedger::new();
            descent_direction(x, y, config.lambda, &gamma, &mut scratch, ph)?.norm
        }
    };
    Ok((gamma, trace))
}

/// Runs `config.n_iters` exact-line-search steps from `config.init` (or zero),
/// recording `(ledger total, objective)` after each step.
pub fn ridge_gd(
    x: &Matrix,
    y: &[f64],
    config: &GdConfig,
    ledger: &mut FlopLedger,
) -> Result<(Vec<f64>, SolverTrace)> {
    ridge_gd_in(x, y, config, ledger, phase::GD)
}

/// `((A − a)/(A + a))²` for the extreme eigenvalues `A ≥ a ≥ 0` of a PSD
/// quadratic; zero when both vanish.
pub fn contraction_constant(largest: f64, smallest: f64) -> f64 {
    let denom = largest + smallest;
    if denom == 0.0 {
        return 0.0;
    }
    ((largest - smallest) / denom).powi(2)
}

/// Guaranteed per-iteration contraction of the suboptimality gap.
///
/// With `k2 = 0` this is the plain-GD constant
/// `((d₁² − d_p²)/(d₁² + d_p² + 2nλ))²`, where `d_p` is the last entry of
/// `singular_values` (pad with zeros when `p > n`). With `k2 > 0` it is the
/// constant for the residualized second stage,
/// `(d²_{k2+1}/(d²_{k2+1} + 2nλ))²`.
pub fn convergence_bound(singular_values: &[f64], lambda: f64, n: usize, k2: usize) -> Result<f64> {
    if singular_values.is_empty() {
        return Err(invalid("empty spectrum"));
    }
    if !(lambda >= 0.0) {
        return Err(invalid("lambda must be >= 0"));
    }
    let two_nl = 2.0 * n as f64 * lambda;
    if k2 == 0 {
        let top = singular_values[0].powi(2);
        let bottom = singular_values[singular_values.len() - 1].powi(2);
        Ok(contraction_constant(2.0 * top + two_nl, 2.0 * bottom + two_nl))
    } else {
        let next = singular_values
            .get(k2)
            .ok_or_else(|| invalid(format!("k2 = {k2} leaves no singular value d_(k2+1)")))?
            .powi(2);
        Ok(contraction_constant(2.0 * next + two_nl, two_nl))
    }
}

/// Norm of the ridge gradient `2Xᵀ(Xγ − Y) + 2nλγ`, uncounted.
pub fn gradient_norm(x: &Matrix, y: &[f64], lambda: f64, gamma: &[f64]) -> Result<f64> {
    check_problem(x, y, gamma)?;
    let mut scratch = FlopLedger::new();
    Ok(descent_direction(x, y, lambda, gamma, &mut scratch, phase::GD)?.norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::cholesky_solve;
    use crate::matrix::norm;
    use crate::random::{gaussian_matrix, gaussian_vector, random_orthonormal};

    fn closed_form(x: &Matrix, y: &[f64], lambda: f64) -> Vec<f64> {
        let mut g = x.t_matmul(x).unwrap();
        let nl = x.rows() as f64 * lambda;
        for i in 0..g.rows() {
            g[(i, i)] += nl;
        }
        cholesky_solve(&g, &x.t_matvec(y).unwrap()).unwrap()
    }

    #[test]
    fn objective_hand_values() {
        let x = Matrix::identity(2);
        let y = [1.0, 0.0];
        assert_eq!(ridge_objective(&x, &y, 0.5, &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(ridge_objective(&x, &y, 0.5, &[1.0, 0.0]).unwrap(), 1.0);
        assert!(ridge_objective(&x, &y, 0.5, &[1.0]).is_err());
    }

    #[test]
    fn least_squares_point_has_vanishing_gradient() {
        let x = gaussian_matrix(30, 8, 1);
        let y = gaussian_vector(30, 2);
        let beta = closed_form(&x, &y, 0.0);
        let fit = x.matvec(&beta).unwrap();
        let rss: f64 = fit.iter().zip(&y).map(|(f, t)| (f - t).powi(2)).sum();
        assert!((ridge_objective(&x, &y, 0.0, &beta).unwrap() - rss).abs() < 1e-10);
        assert!(gradient_norm(&x, &y, 0.0, &beta).unwrap() <= 1e-8);
    }

    #[test]
    fn isotropic_problem_converges_in_one_step() {
        let x = random_orthonormal(12, 5, 3).unwrap();
        let y = gaussian_vector(12, 4);
        let mut ledger = FlopLedger::new();
        let step = gd_step(&x, &y, 0.0, &[0.0; 5], &mut ledger).unwrap();
        assert!((step.step_size - 0.5).abs() < 1e-12);
        let xty = x.t_matvec(&y).unwrap();
        for (g, t) in step.gamma.iter().zip(&xty) {
            assert!((g - t).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_point_is_a_fixed_point() {
        let x = Matrix::identity(3);
        let y = [1.0, 2.0, 3.0];
        let lambda = 1.0 / 3.0;
        let opt = [0.5, 1.0, 1.5];
        let mut ledger = FlopLedger::new();
        let step = gd_step(&x, &y, lambda, &opt, &mut ledger).unwrap();
        assert!(step.converged);
        assert_eq!(step.step_size, 0.0);
        assert_eq!(step.gamma, opt);
    }

    #[test]
    fn step_is_the_line_minimizer() {
        let x = gaussian_matrix(50, 20, 9);
        let y = gaussian_vector(50, 10);
        let lambda = 0.05;
        let gamma = gaussian_vector(20, 11);
        let mut ledger = FlopLedger::new();
        let step = gd_step(&x, &y, lambda, &gamma, &mut ledger).unwrap();
        let f0 = ridge_objective(&x, &y, lambda, &gamma).unwrap();
        let at = |scale: f64| {
            let w: Vec<f64> = step.gamma.iter().zip(&gamma).map(|(a, b)| (a - b) / step.step_size).collect();
            let g: Vec<f64> = gamma.iter().zip(&w).map(|(g, w)| g + scale * step.step_size * w).collect();
            ridge_objective(&x, &y, lambda, &g).unwrap()
        };
        let f1 = at(1.0);
        assert!(f1 < f0);
        assert!(f1 <= at(0.9));
        assert!(f1 <= at(1.1));
        let (n, p) = x.shape();
        assert_eq!(ledger.total(), (6 * n * p + 5 * n + 7 * p + 3) as u64);
    }

    #[test]
    fn zero_iterations_returns_start() {
        let x = gaussian_matrix(10, 4, 1);
        let y = gaussian_vector(10, 1);
        let mut ledger = FlopLedger::new();
        let (g, trace) = ridge_gd(&x, &y, &GdConfig::new(0, 0.1), &mut ledger).unwrap();
        assert_eq!(g, vec![0.0; 4]);
        assert!(trace.checkpoints.is_empty());
        assert_eq!(ledger.total(), 0);
    }

    #[test]
    fn converges_to_closed_form() {
        let x = gaussian_matrix(100, 30, 21);
        let y = gaussian_vector(100, 22);
        let lambda = 0.1;
        let mut ledger = FlopLedger::new();
        let (g, trace) = ridge_gd(&x, &y, &GdConfig::new(500, lambda), &mut ledger).unwrap();
        let exact = closed_form(&x, &y, lambda);
        let err = norm(&crate::matrix::sub_vec(&g, &exact)) / norm(&exact);
        assert!(err <= 1e-6, "relative error {err}");
        assert!(trace.checkpoints.windows(2).all(|w| w[1].flops > w[0].flops));
        assert!(trace
            .checkpoints
            .windows(2)
            .all(|w| w[1].objective <= w[0].objective * (1.0 + 1e-12)));
        let direct = ridge_objective(&x, &y, lambda, &g).unwrap();
        assert!((trace.last_objective().unwrap() - direct).abs() <= 1e-8 * direct);
    }

    #[test]
    fn early_stop_honours_tolerance() {
        let x = gaussian_matrix(40, 10, 2);
        let y = gaussian_vector(40, 3);
        let mut ledger = FlopLedger::new();
        let cfg = GdConfig::new(10_000, 0.5).with_stop_tol(1e-6);
        let (_, trace) = ridge_gd(&x, &y, &cfg, &mut ledger).unwrap();
        assert!(trace.final_gradient_norm <= 1e-6);
        assert!(trace.checkpoints.len() < 10_000);
    }

    #[test]
    fn bound_substitutions() {
        assert_eq!(convergence_bound(&[2.0, 2.0, 2.0], 0.3, 10, 0).unwrap(), 0.0);
        let c = convergence_bound(&[10.0, 1.0], 0.0, 5, 0).unwrap();
        assert!((c - (99.0f64 / 101.0).powi(2)).abs() < 1e-15);
        // d²_(k2+1) = 2nλ: n = 4, λ = 0.5 → 2nλ = 4, d_(k2+1) = 2.
        let c = convergence_bound(&[9.0, 5.0, 2.0, 1.0], 0.5, 4, 2).unwrap();
        assert!((c - 0.25).abs() < 1e-15);
        assert!(convergence_bound(&[], 0.1, 3, 0).is_err());
        assert!(convergence_bound(&[3.0, 1.0], 0.1, 3, 2).is_err());
    }

    #[test]
    fn rejects_invalid_config() {
        let x = gaussian_matrix(5, 3, 1);
        let y = gaussian_vector(5, 1);
        let mut ledger = FlopLedger::new();
        assert!(ridge_gd(&x, &y, &GdConfig::new(3, -1.0), &mut ledger).is_err());
        assert!(ridge_gd(&x, &y, &GdConfig::new(3, 1.0).with_init(vec![0.0; 2]), &mut ledger).is_err());
    }
}
