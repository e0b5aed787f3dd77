//! SVRG on the ridge objective, written as an average of per-sample losses
//! `fᵢ(β) = n(xᵢᵀβ − yᵢ)² + nλ‖β‖²` so the full gradient and minimizer match
//! the closed form.

use crate::error::{invalid, shape, Error, Result};
use crate::flops::{cost, phase, FlopLedger};
use crate::gd::{ridge_objective, Checkpoint, SolverTrace};
use crate::matrix::{dot, matvec_counted, t_matvec_counted, Matrix};
use crate::random::{derive_seed, Rng};

/// Objective growth beyond this multiple of the starting value is divergence.
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct SvrgConfig {
    /// Passes over the data; each is one snapshot plus `n` inner updates.
    pub passes: usize,
    pub step_size: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl SvrgConfig {
    pub fn new(passes: usize, step_size: f64, lambda: f64, seed: u64) -> Self {
        Self {
            passes,
            step_size,
            lambda,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(invalid(format!("step size must be finite and > 0, got {}", self.step_size)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Full gradient `2Xᵀ(Xβ − Y) + 2nλβ` and the fitted values `Xβ`.
fn full_gradient(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    beta: &[f64],
    ledger: &mut FlopLedger,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, p) = x.shape();
    let ph = phase::SVRG;
    let fitted = matvec_counted(x, beta, ledger, ph)?;
    let residual: Vec<f64> = fitted.iter().zip(y).map(|(f, t)| f - t).collect();
    ledger.charge(ph, cost::elementwise(n));
    let xt_r = t_matvec_counted(x, &residual, ledger, ph)?;
    let nl2 = 2.0 * n as f64 * lambda;
    let grad = xt_r.iter().zip(beta).map(|(g, b)| 2.0 * g + nl2 * b).collect();
    ledger.charge(ph, cost::elementwise(3 * p));
    Ok((grad, fitted))
}

/// Variance-reduced stochastic gradient for sample `i`:
/// `∇fᵢ(β) − ∇fᵢ(β̃) + μ`, with `snap_fit_i = xᵢᵀβ̃`.
fn corrected_gradient(
    xi: &[f64],
    beta: &[f64],
    snapshot: &[f64],
    snap_fit_i: f64,
    mu: &[f64],
    n: usize,
    lambda: f64,
) -> Vec<f64> {
    let nf = n as f64;
    let coef = 2.0 * nf * (dot(xi, beta) - snap_fit_i);
    let nl2 = 2.0 * nf * lambda;
    xi.iter()
        .zip(beta)
        .zip(snapshot)
        .zip(mu)
        .map(|(((x, b), s), m)| coef * x + nl2 * (b - s) + m)
        .collect()
}

/// Runs `passes` outer loops of SVRG from zero.
///
/// Each pass charges one full gradient (two matrix–vector products) and `n`
/// inner updates of `8p` each. The snapshot for the next pass is the last
/// inner iterate. A checkpoint with the (uncounted) objective is recorded
/// after every pass.
pub fn svrg_ridge(
    x: &Matrix,
    y: &[f64],
    config: &SvrgConfig,
    ledger: &mut FlopLedger,
) -> Result<(Vec<f64>, SolverTrace)> {
    config.validate()?;
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(shape("svrg_ridge", format!("X has {n} rows, Y has {}", y.len())));
    }
    let ph = phase::SVRG;
    let eta = config.step_size;
    let mut rng = Rng::new(derive_seed(config.seed, 0x5f5));
    let mut beta = vec![0.0; p];
    let initial = ridge_objective(x, y, config.lambda, &beta)?;
    let mut trace = SolverTrace::default();

    for _ in 0..config.passes {
        let snapshot = beta.clone();
        let (mu, snap_fit) = full_gradient(x, y, config.lambda, &snapshot, ledger)?;
        for _ in 0..n {
            let i = rng.below(n);
            let g = corrected_gradient(x.row(i), &beta, &snapshot, snap_fit[i], &mu, n, config.lambda);
            beta.iter_mut().zip(&g).for_each(|(b, g)| *b -= eta * g);
            ledger.charge(ph, cost::dot(p) + 3 * cost::dot(p));
        }
        let objective = ridge_objective(x, y, config.lambda, &beta)?;
        if !objective.is_finite() || objective > DIVERGENCE_FACTOR * initial.max(f64::MIN_POSITIVE) {
            return Err(Error::StepTooLarge { objective, initial });
        }
        trace.checkpoints.push(Checkpoint {
            flops: ledger.total(),
            objective,
        });
    }
    trace.final_gradient_norm = crate::gd::gradient_norm(x, y, config.lambda, &beta)?;
    Ok((beta, trace))
}

/// Mean per-sample smoothness `2n·mean‖xᵢ‖² + 2nλ`, the natural unit for
/// SVRG step sizes.
pub fn mean_smoothness(x: &Matrix, lambda: f64) -> f64 {
    let n = x.rows() as f64;
    let mean_sq = x.frobenius_norm().powi(2) / n;
    2.0 * n * (mean_sq + lambda)
}

/// Candidate relative steps `{1, 2, 5}·10ᵏ` from `1e-8` up to `1`.
pub fn svrg_step_grid() -> Vec<f64> {
    (-8..=0)
        .flat_map(|e| {
            let base = 10f64.powi(e);
            if e < 0 {
                vec![base, 2.0 * base, 5.0 * base]
            } else {
                vec![base]
            }
        })
        .collect()
}

/// Picks the step `c / L̄` (see [`mean_smoothness`], `c` from
/// [`svrg_step_grid`]) with the lowest held-out squared error after `passes`
/// passes, training on a seeded 80% of the rows.
///
/// The search is not charged to any ledger. Diverging steps are skipped.
pub fn tune_svrg_step(x: &Matrix, y: &[f64], lambda: f64, passes: usize, seed: u64) -> Result<f64> {
    let n = x.rows();
    if y.len() != n {
        return Err(shape("tune_svrg_step", format!("X has {n} rows, Y has {}", y.len())));
    }
    let n_fit = (n * 4) / 5;
    if n_fit == 0 || n_fit == n {
        return Err(invalid(format!("need at least 2 rows to hold one out, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(derive_seed(seed, 0x7e5)).shuffle(&mut order);
    let (fit_idx, held_idx) = order.split_at(n_fit);
    let x_fit = x.select_rows(fit_idx);
    let y_fit: Vec<f64> = fit_idx.iter().map(|&i| y[i]).collect();
    let x_held = x.select_rows(held_idx);
    let y_held: Vec<f64> = held_idx.iter().map(|&i| y[i]).collect();
    let unit = 1.0 / mean_smoothness(x, lambda);

    let mut best: Option<(f64, f64)> = None;
    for c in svrg_step_grid() {
        let step = c * unit;
        let mut scratch = FlopLedger::new();
        // Per-sample losses carry a factor n, so the step rescales with the fold size.
        let scaled = step * n as f64 / n_fit as f64;
        let cfg = SvrgConfig::new(passes, scaled, lambda, seed);
        let Ok((beta, _)) = svrg_ridge(&x_fit, &y_fit, &cfg, &mut scratch) else {
            continue;
        };
        let pred = x_held.matvec(&beta)?;
        let err: f64 = pred.iter().zip(&y_held).map(|(a, b)| (a - b).powi(2)).sum();
        if err.is_finite() && best.map_or(true, |(_, e)| err < e) {
            best = Some((step, err));
        }
    }
    best.map(|(s, _)| s)
        .ok_or_else(|| invalid("every candidate SVRG step size diverged"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{ridge_exact, RidgeMode};
    use crate::matrix::{norm, sub_vec};
    use crate::random::{gaussian_matrix, gaussian_vector};

    #[test]
    fn zero_passes_returns_zero() {
        let x = gaussian_matrix(10, 4, 1);
        let y = gaussian_vector(10, 2);
        let mut ledger = FlopLedger::new();
        let (beta, trace) = svrg_ridge(&x, &y, &SvrgConfig::new(0, 1e-3, 0.1, 0), &mut ledger).unwrap();
        assert_eq!(beta, vec![0.0; 4]);
        assert!(trace.checkpoints.is_empty());
        assert_eq!(ledger.total(), 0);
    }

    #[test]
    fn corrected_gradient_at_snapshot_is_full_gradient() {
        let x = gaussian_matrix(15, 6, 3);
        let y = gaussian_vector(15, 4);
        let snap = gaussian_vector(6, 5);
        let mut ledger = FlopLedger::new();
        let (mu, fit) = full_gradient(&x, &y, 0.3, &snap, &mut ledger).unwrap();
        for i in 0..15 {
            let g = corrected_gradient(x.row(i), &snap, &snap, fit[i], &mu, 15, 0.3);
            assert!(norm(&sub_vec(&g, &mu)) <= 1e-12 * norm(&mu));
        }
    }

    #[test]
    fn per_sample_gradients_average_to_the_full_gradient() {
        let (n, p) = (12, 5);
        let x = gaussian_matrix(n, p, 6);
        let y = gaussian_vector(n, 7);
        let beta = gaussian_vector(p, 8);
        let lambda = 0.2;
        let mut avg = vec![0.0; p];
        for i in 0..n {
            let xi = x.row(i);
            let r = dot(xi, &beta) - y[i];
            for j in 0..p {
                avg[j] += (2.0 * n as f64 * xi[j] * r + 2.0 * n as f64 * lambda * beta[j]) / n as f64;
            }
        }
        let mut ledger = FlopLedger::new();
        let (full, _) = full_gradient(&x, &y, lambda, &beta, &mut ledger).unwrap();
        assert!(norm(&sub_vec(&avg, &full)) <= 1e-12 * norm(&full));
    }

    #[test]
    fn tuned_run_approaches_closed_form() {
        let x = gaussian_matrix(200, 50, 10);
        let truth = gaussian_vector(50, 9);
        let noise = gaussian_vector(200, 11);
        let y: Vec<f64> = x.matvec(&truth).unwrap().iter().zip(&noise).map(|(a, b)| a + b).collect();
        let lambda = 0.1;
        let step = tune_svrg_step(&x, &y, lambda, 30, 1).unwrap();
        let mut ledger = FlopLedger::new();
        let (beta, _) = svrg_ridge(&x, &y, &SvrgConfig::new(30, step, lambda, 2), &mut ledger).unwrap();
        let exact = ridge_exact(&x, &y, lambda, RidgeMode::Primal, &mut FlopLedger::new()).unwrap();
        let err = norm(&sub_vec(&beta, &exact)) / norm(&exact);
        assert!(err <= 1e-3, "relative error {err:e} with step {step:e}");
    }

    #[test]
    fn ledger_is_affine_in_passes() {
        let x = gaussian_matrix(30, 8, 12);
        let y = gaussian_vector(30, 13);
        let totals: Vec<u64> = (0..5)
            .map(|passes| {
                let mut ledger = FlopLedger::new();
                svrg_ridge(&x, &y, &SvrgConfig::new(passes, 1e-4, 0.1, 3), &mut ledger).unwrap();
                ledger.total()
            })
            .collect();
        let slope = totals[1] - totals[0];
        assert!(totals.windows(2).all(|w| w[1] - w[0] == slope));
        // Snapshot: two products plus O(n + p); inner loop: 8p per sample.
        assert_eq!(slope, (4 * 30 * 8 + 30 + 3 * 8 + 30 * 8 * 8) as u64);
    }

    #[test]
    fn large_step_is_reported_as_divergence() {
        let x = gaussian_matrix(40, 10, 14);
        let y = gaussian_vector(40, 15);
        let mut ledger = FlopLedger::new();
        assert!(matches!(
            svrg_ridge(&x, &y, &SvrgConfig::new(20, 1.0, 0.1, 0), &mut ledger),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(svrg_ridge(&x, &y, &SvrgConfig::new(1, 0.0, 0.1, 0), &mut ledger).is_err());
    }

    #[test]
    fn median_objective_decreases_over_passes() {
        let x = gaussian_matrix(60, 15, 16);
        let y = gaussian_vector(60, 17);
        let passes = 6;
        let mut per_pass: Vec<Vec<f64>> = vec![Vec::new(); passes];
        for seed in 0..20 {
            let mut ledger = FlopLedger::new();
            let (_, trace) = svrg_ridge(&x, &y, &SvrgConfig::new(passes, 1e-5, 0.1, seed), &mut ledger).unwrap();
            for (t, c) in trace.checkpoints.iter().enumerate() {
                per_pass[t].push(c.objective);
            }
        }
        let medians: Vec<f64> = per_pass
            .into_iter()
            .map(|mut v| {
                v.sort_by(f64::total_cmp);
                v[v.len() / 2]
            })
            .collect();
        assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
    }
}
