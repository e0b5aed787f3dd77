//! Fixed-design risk: closed forms in the singular basis of `X`, Monte-Carlo
//! estimates over noise draws, and test-set metrics.
//!
//! With `X = U·diag(d)·Vᵀ`, `α = Vᵀβ` and shrinkage `d²/(d² + nλ)`, ridge
//! regression has risk
//! `(1/n)·Σᵢ (dᵢ⁴σ² + n²λ²dᵢ²αᵢ²)/(dᵢ² + nλ)²`.
//! The two-stage estimator with an exact top-`k2` basis splits the sum at
//! `k2`; since the first-stage truth is `γ₁ⱼ = dⱼαⱼ` both pieces recombine
//! into the same value for every `k2`.

use crate::decomp::svd_dense;
use crate::error::{invalid, shape, Result};
use crate::matrix::Matrix;
use crate::random::{derive_seed, Rng};

/// Spectral description of a fixed-design problem `Y = Xβ + ε`.
#[derive(Debug, Clone)]
pub struct SpectralGroundTruth {
    /// Singular values of `X`, descending, length `min(n, p)`.
    pub d: Vec<f64>,
    /// `Vᵀβ` along the right singular vectors that carry `d`.
    pub alpha: Vec<f64>,
    /// `dⱼ·αⱼ`, the coefficients of `E[Y]` in the left singular basis.
    pub gamma1_true: Vec<f64>,
    pub sigma: f64,
    pub n: usize,
    pub lambda: f64,
}

impl SpectralGroundTruth {
    pub fn new(d: Vec<f64>, alpha: Vec<f64>, sigma: f64, n: usize, lambda: f64) -> Result<Self> {
        if d.len() != alpha.len() {
            return Err(shape(
                "SpectralGroundTruth",
                format!("{} singular values, {} coordinates", d.len(), alpha.len()),
            ));
        }
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        if !(sigma >= 0.0) || !(lambda >= 0.0) {
            return Err(invalid(format!("sigma and lambda must be >= 0, got {sigma} and {lambda}")));
        }
        if d.windows(2).any(|w| w[0] < w[1]) || d.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("singular values must be nonnegative and descending"));
        }
        let gamma1_true = d.iter().zip(&alpha).map(|(d, a)| d * a).collect();
        Ok(Self {
            d,
            alpha,
            gamma1_true,
            sigma,
            n,
            lambda,
        })
    }

    /// Reads the spectrum off a dense SVD of `x`.
    pub fn from_design(x: &Matrix, beta: &[f64], sigma: f64, lambda: f64) -> Result<Self> {
        if beta.len() != x.cols() {
            return Err(shape("from_design", format!("X has {} columns, beta has {}", x.cols(), beta.len())));
        }
        let svd = svd_dense(x)?;
        let alpha = svd.v.t_matvec(beta)?;
        Self::new(svd.d, alpha, sigma, x.rows(), lambda)
    }

    fn nl(&self) -> f64 {
        self.n as f64 * self.lambda
    }

    fn check_split(&self, k2: usize) -> Result<()> {
        if k2 > self.d.len() {
            return Err(invalid(format!("k2 = {k2} exceeds the {} available directions", self.d.len())));
        }
        Ok(())
    }
}

/// `(d⁴σ² + n²λ²·b²)/(d² + nλ)²` where `b` is the direction's mean signal.
/// A direction with `d = 0` and `λ = 0` is unidentified and contributes 0.
fn direction_risk(d: f64, signal: f64, sigma: f64, nl: f64) -> f64 {
    let d2 = d * d;
    let denom = (d2 + nl).powi(2);
    if denom == 0.0 {
        return 0.0;
    }
    (d2 * d2 * sigma * sigma + nl * nl * signal * signal) / denom
}

/// Risk of the shrunk first-stage fit on the top `k2` directions,
/// `(1/n)·E‖U₁γ₁ − U₁γ̂₁,ₛ‖²`.
pub fn lemma1_term(truth: &SpectralGroundTruth, k2: usize) -> Result<f64> {
    truth.check_split(k2)?;
    let nl = truth.nl();
    let s: f64 = (0..k2)
        .map(|j| direction_risk(truth.d[j], truth.gamma1_true[j], truth.sigma, nl))
        .sum();
    Ok(s / truth.n as f64)
}

/// Risk of the converged second stage on the remaining directions,
/// `(1/n)·E‖X_rγ₂ − X_rγ̂₂‖²`.
pub fn lemma2_term(truth: &SpectralGroundTruth, k2: usize) -> Result<f64> {
    truth.check_split(k2)?;
    let nl = truth.nl();
    let s: f64 = (k2..truth.d.len())
        .map(|i| direction_risk(truth.d[i], truth.d[i] * truth.alpha[i], truth.sigma, nl))
        .sum();
    Ok(s / truth.n as f64)
}

/// Risk of the two-stage estimator with an exact basis and converged second
/// stage: the sum of the two terms above.
pub fn ling_risk_analytic(truth: &SpectralGroundTruth, k2: usize) -> Result<f64> {
    Ok(lemma1_term(truth, k2)? + lemma2_term(truth, k2)?)
}

/// Ridge regression risk as a single sum over all directions.
pub fn rr_risk_analytic(truth: &SpectralGroundTruth) -> f64 {
    let nl = truth.nl();
    let s: f64 = truth
        .d
        .iter()
        .zip(&truth.alpha)
        .map(|(d, a)| direction_risk(*d, d * a, truth.sigma, nl))
        .sum();
    s / truth.n as f64
}

/// Mean of a Monte-Carlo sample and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

impl MonteCarloEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        let k = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / k;
        let std_error = if samples.len() > 1 {
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            draws: samples.len(),
        }
    }

    /// Whether `value` lies within `z` standard errors of the mean.
    pub fn brackets(&self, value: f64, z: f64) -> bool {
        (self.mean - value).abs() <= z * self.std_error
    }
}

/// `(1/n)·‖Xβ − Ŷ‖²`.
pub fn realized_risk(x: &Matrix, beta: &[f64], predictions: &[f64]) -> Result<f64> {
    let signal = x.matvec(beta)?;
    if predictions.len() != signal.len() {
        return Err(shape(
            "realized_risk",
            format!("{} predictions for {} rows", predictions.len(), signal.len()),
        ));
    }
    let s: f64 = signal.iter().zip(predictions).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(s / signal.len() as f64)
}

/// Averages `loss(Y)` over `draws` responses `Y = Xβ + ε`, `ε ~ N(0, σ²I)`.
///
/// Draw `t` uses the seed `derive_seed(seed, t)`, so results do not depend on
/// evaluation order.
pub fn monte_carlo_loss<F>(
    x: &Matrix,
    beta: &[f64],
    sigma: f64,
    draws: usize,
    seed: u64,
    mut loss: F,
) -> Result<MonteCarloEstimate>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if draws == 0 {
        return Err(invalid("draws must be positive"));
    }
    if !(sigma >= 0.0) {
        return Err(invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let signal = x.matvec(beta)?;
    let mut samples = Vec::with_capacity(draws);
    for t in 0..draws {
        let mut rng = Rng::new(derive_seed(seed, t as u64));
        let y: Vec<f64> = signal.iter().map(|s| s + sigma * rng.normal()).collect();
        samples.push(loss(&y)?);
    }
    Ok(MonteCarloEstimate::from_samples(&samples))
}

/// Monte-Carlo fixed-design risk of an estimator mapping `(X, Y)` to
/// training predictions.
pub fn monte_carlo_risk<F>(
    x: &Matrix,
    beta: &[f64],
    sigma: f64,
    draws: usize,
    seed: u64,
    mut estimator: F,
) -> Result<MonteCarloEstimate>
where
    F: FnMut(&Matrix, &[f64]) -> Result<Vec<f64>>,
{
    monte_carlo_loss(x, beta, sigma, draws, seed, |y| {
        let fit = estimator(x, y)?;
        realized_risk(x, beta, &fit)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Mse,
    /// Fraction of rows where the sign of the prediction (zero counts as
    /// `+1`) differs from a `±1` label.
    ClassificationError,
}

impl std::str::FromStr for MetricKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Self::Mse),
            "classification_error" => Ok(Self::ClassificationError),
            other => Err(invalid(format!("unknown metric '{other}'"))),
        }
    }
}

pub fn evaluate_metric(predictions: &[f64], targets: &[f64], kind: MetricKind) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(shape(
            "evaluate_metric",
            format!("{} predictions, {} targets", predictions.len(), targets.len()),
        ));
    }
    if predictions.is_empty() {
        return Err(invalid("cannot evaluate a metric on zero rows"));
    }
    let m = predictions.len() as f64;
    match kind {
        MetricKind::Mse => Ok(predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / m),
        MetricKind::ClassificationError => {
            let mut wrong = 0usize;
            for (p, t) in predictions.iter().zip(targets) {
                if *t != 1.0 && *t != -1.0 {
                    return Err(invalid(format!("classification label {t} is not ±1")));
                }
                let sign = if *p >= 0.0 { 1.0 } else { -1.0 };
                if sign != *t {
                    wrong += 1;
                }
            }
            Ok(wrong as f64 / m)
        }
    }
}
