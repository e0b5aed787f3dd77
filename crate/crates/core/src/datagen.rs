//! Synthetic fixed-design problems with controlled spectra, and the
//! quadratic feature expansion used for real regression data.
//!
//! All three models are defined at `2000×1500` and scale proportionally
//! with `p`:
//!
//! * Model 1, steep: the top `30p/1500` singular values decay geometrically
//!   from `1.3⁴⁰` to `1.3¹¹`; the rest sit at `1.3¹⁰`.
//! * Model 2, flat: every singular value is uniform on `[√n/2, √n]`.
//! * Model 3, bimodal: as Model 2, but the top `15p/1500` values are boosted
//!   tenfold, `X = U·D` has orthogonal columns, and `β` is supported only on
//!   the boosted columns and the last `1000p/1500` columns.
//!
//! `β` is uniform on `[−2.5, 2.5]` over its support.

use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::random::{derive_seed, random_orthonormal, Rng};
use crate::risk::SpectralGroundTruth;

const REFERENCE_P: f64 = 1500.0;
const STEEP_COUNT: f64 = 30.0;
const BOOSTED_COUNT: f64 = 15.0;
const TRAILING_SUPPORT: usize = 1000;
const BETA_BOUND: f64 = 2.5;
const BOOST: f64 = 10.0;
/// Geometric base and exponent range of the Model 1 head.
pub const STEEP_BASE: f64 = 1.3;
pub const STEEP_TOP_EXPONENT: f64 = 40.0;
pub const STEEP_BOTTOM_EXPONENT: f64 = 11.0;
/// Exponent of the constant Model 1 tail.
pub const STEEP_TAIL_EXPONENT: f64 = 10.0;

/// Default noise standard deviation.
pub const DEFAULT_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelId {
    Steep = 1,
    Flat = 2,
    Bimodal = 3,
}

impl ModelId {
    pub fn number(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for ModelId {
    type Error = crate::Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Self::Steep),
            2 => Ok(Self::Flat),
            3 => Ok(Self::Bimodal),
            other => Err(invalid(format!("unknown model {other}; expected 1, 2 or 3"))),
        }
    }
}

/// A generated design with its true coefficients.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub x: Matrix,
    pub beta: Vec<f64>,
    pub sigma: f64,
    /// Singular values of `x`, descending.
    pub spectrum: Vec<f64>,
    /// Right singular vectors of `x`; `None` means the identity (Model 3).
    pub right_basis: Option<Matrix>,
    pub model: ModelId,
    pub seed: u64,
}

impl SyntheticTruth {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// Spectral ground truth read off the construction, without an SVD.
    pub fn ground_truth(&self, lambda: f64) -> Result<SpectralGroundTruth> {
        let alpha = match &self.right_basis {
            Some(v) => v.t_matvec(&self.beta)?,
            None => self.beta.clone(),
        };
        SpectralGroundTruth::new(self.spectrum.clone(), alpha, self.sigma, self.n(), lambda)
    }

    pub fn sample(&self, seed: u64) -> Result<Vec<f64>> {
        fixed_design_sample(self, seed)
    }
}

fn scaled_count(reference: f64, p: usize) -> usize {
    (reference * p as f64 / REFERENCE_P).round() as usize
}

/// Number of steep singular values in Model 1 at width `p`.
pub fn steep_count(p: usize) -> usize {
    scaled_count(STEEP_COUNT, p)
}

/// Number of boosted singular values in Model 3 at width `p`.
pub fn boosted_count(p: usize) -> usize {
    scaled_count(BOOSTED_COUNT, p)
}

/// Length of the trailing `β` support in Model 3 at width `p`.
pub fn trailing_support(p: usize) -> usize {
    TRAILING_SUPPORT * p / REFERENCE_P as usize
}

/// Model 1 spectrum: `m` geometric values with exponents evenly spaced from
/// 40 down to 11 (the integers 40…11 when `m = 30`), then a flat tail.
pub fn steep_spectrum(p: usize) -> Result<Vec<f64>> {
    let m = steep_count(p);
    if m < 2 {
        return Err(invalid(format!("p = {p} is too small for the steep spectrum (needs >= 2 steep values)")));
    }
    let span = STEEP_TOP_EXPONENT - STEEP_BOTTOM_EXPONENT;
    let mut d: Vec<f64> = (0..m)
        .map(|j| {
            let e = STEEP_TOP_EXPONENT - span * j as f64 / (m - 1) as f64;
            STEEP_BASE.powf(e)
        })
        .collect();
    d.resize(p, STEEP_BASE.powf(STEEP_TAIL_EXPONENT));
    Ok(d)
}

fn flat_spectrum(n: usize, p: usize, rng: &mut Rng) -> Vec<f64> {
    let hi = (n as f64).sqrt();
    let mut d: Vec<f64> = (0..p).map(|_| rng.uniform_in(hi / 2.0, hi)).collect();
    d.sort_by(|a, b| b.total_cmp(a));
    d
}

/// Builds one of the three simulated designs with `σ = 1`.
pub fn gen_synthetic(model: ModelId, n: usize, p: usize, seed: u64) -> Result<SyntheticTruth> {
    if p == 0 || n < p {
        return Err(invalid(format!("need n >= p >= 1, got n = {n}, p = {p}")));
    }
    let mut spec_rng = Rng::new(derive_seed(seed, 3));
    let mut beta_rng = Rng::new(derive_seed(seed, 4));
    let spectrum = match model {
        ModelId::Steep => steep_spectrum(p)?,
        ModelId::Flat => flat_spectrum(n, p, &mut spec_rng),
        ModelId::Bimodal => {
            let m = boosted_count(p);
            if m < 1 || m + trailing_support(p) > p {
                return Err(invalid(format!("p = {p} is too small for the bimodal model")));
            }
            let mut d = flat_spectrum(n, p, &mut spec_rng);
            d[..m].iter_mut().for_each(|v| *v *= BOOST);
            d
        }
    };
    let u = random_orthonormal(n, p, derive_seed(seed, 1))?;
    let us = u.scale_columns(&spectrum)?;
    let (x, right_basis, beta) = match model {
        ModelId::Steep | ModelId::Flat => {
            let v = random_orthonormal(p, p, derive_seed(seed, 2))?;
            let x = us.matmul(&v.transpose())?;
            let beta = (0..p).map(|_| beta_rng.uniform_in(-BETA_BOUND, BETA_BOUND)).collect();
            (x, Some(v), beta)
        }
        ModelId::Bimodal => {
            let head = boosted_count(p);
            let tail_start = p - trailing_support(p);
            let beta = (0..p)
                .map(|j| {
                    if j < head || j >= tail_start {
                        beta_rng.uniform_in(-BETA_BOUND, BETA_BOUND)
                    } else {
                        0.0
                    }
                })
                .collect();
            (us, None, beta)
        }
    };
    Ok(SyntheticTruth {
        x,
        beta,
        sigma: DEFAULT_SIGMA,
        spectrum,
        right_basis,
        model,
        seed,
    })
}

/// `Y = Xβ + ε` with `ε ~ N(0, σ²I)`.
pub fn fixed_design_sample(truth: &SyntheticTruth, seed: u64) -> Result<Vec<f64>> {
    let mut y = truth.x.matvec(&truth.beta)?;
    if truth.sigma > 0.0 {
        let mut rng = Rng::new(derive_seed(seed, 5));
        y.iter_mut().for_each(|v| *v += truth.sigma * rng.normal());
    }
    Ok(y)
}

/// Appends every product `x_a·x_b` with `a ≤ b` to each row, ordered by `a`
/// then `b`.
pub fn quadratic_expand(x: &Matrix) -> Matrix {
    let m = x.cols();
    let width = m + m * (m + 1) / 2;
    let mut out = Matrix::zeros(x.rows(), width);
    for i in 0..x.rows() {
        let src = x.row(i);
        let dst = out.row_mut(i);
        dst[..m].copy_from_slice(src);
        let mut k = m;
        for a in 0..m {
            for b in a..m {
                dst[k] = src[a] * src[b];
                k += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::svd_dense;

    #[test]
    fn steep_spectrum_at_reference_width() {
        let d = steep_spectrum(1500).unwrap();
        assert_eq!(d.len(), 1500);
        for (j, v) in d[..30].iter().enumerate() {
            let want = 1.3f64.powi(40 - j as i32);
            assert!((v - want).abs() <= 1e-12 * want, "j = {j}");
        }
        assert!(d[30..].iter().all(|v| (v - 1.3f64.powi(10)).abs() < 1e-12));
        assert!(steep_spectrum(40).is_err());
    }

    #[test]
    fn counts_scale_with_width() {
        assert_eq!((steep_count(1500), boosted_count(1500), trailing_support(1500)), (30, 15, 1000));
        assert_eq!((steep_count(300), boosted_count(300), trailing_support(300)), (6, 3, 200));
    }

    #[test]
    fn spectrum_is_realized_by_the_design() {
        for model in [ModelId::Steep, ModelId::Flat, ModelId::Bimodal] {
            let t = gen_synthetic(model, 120, 90, 7).unwrap();
            let d = svd_dense(&t.x).unwrap().d;
            for (got, want) in d.iter().zip(&t.spectrum) {
                assert!((got - want).abs() <= 1e-8 * t.spectrum[0], "{model:?}");
            }
            assert!(t.beta.iter().all(|b| b.abs() <= 2.5));
            assert!(t.spectrum.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn flat_spectrum_stays_in_range() {
        let t = gen_synthetic(ModelId::Flat, 200, 60, 1).unwrap();
        let hi = 200f64.sqrt();
        assert!(t.spectrum.iter().all(|d| *d >= hi / 2.0 && *d <= hi));
    }

    #[test]
    fn bimodal_structure() {
        let (n, p) = (150, 150);
        let t = gen_synthetic(ModelId::Bimodal, n, p, 3).unwrap();
        let g = t.x.t_matmul(&t.x).unwrap();
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    assert!(g[(i, j)].abs() <= 1e-8 * g[(0, 0)]);
                }
            }
        }
        let head = boosted_count(p);
        let tail = p - trailing_support(p);
        assert!(t.beta[head..tail].iter().all(|b| *b == 0.0));
        assert!(t.beta[..head].iter().chain(&t.beta[tail..]).all(|b| *b != 0.0));
        let floor = 5.0 * (n as f64).sqrt();
        assert_eq!(t.spectrum.iter().filter(|d| **d >= floor).count(), head);
    }

    #[test]
    fn ground_truth_matches_an_svd() {
        let t = gen_synthetic(ModelId::Flat, 60, 30, 2).unwrap();
        let a = t.ground_truth(0.1).unwrap();
        let b = SpectralGroundTruth::from_design(&t.x, &t.beta, 1.0, 0.1).unwrap();
        let ra = crate::risk::rr_risk_analytic(&a);
        let rb = crate::risk::rr_risk_analytic(&b);
        assert!((ra - rb).abs() <= 1e-10 * ra);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(gen_synthetic(ModelId::Flat, 10, 20, 0).is_err());
        assert!(gen_synthetic(ModelId::Bimodal, 40, 40, 0).is_err());
        assert!(ModelId::try_from(4).is_err());
    }

    #[test]
    fn sampling() {
        let mut t = gen_synthetic(ModelId::Flat, 100, 100, 5).unwrap();
        let signal = t.x.matvec(&t.beta).unwrap();
        assert_eq!(t.sample(1).unwrap(), t.sample(1).unwrap());
        assert_ne!(t.sample(1).unwrap(), t.sample(2).unwrap());
        let mut resid = Vec::new();
        for s in 0..100 {
            let y = t.sample(s).unwrap();
            resid.extend(y.iter().zip(&signal).map(|(a, b)| a - b));
        }
        let var = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
        assert!((var - 1.0).abs() <= 0.05, "{var}");
        t.sigma = 0.0;
        assert_eq!(t.sample(3).unwrap(), signal);
    }

    #[test]
    fn quadratic_expansion() {
        let x = Matrix::from_rows(&[vec![2.0, 5.0]]).unwrap();
        assert_eq!(quadratic_expand(&x).as_slice(), &[2.0, 5.0, 4.0, 10.0, 25.0]);
        let x = Matrix::from_rows(&[vec![3.0]]).unwrap();
        assert_eq!(quadratic_expand(&x).as_slice(), &[3.0, 9.0]);
        assert_eq!(quadratic_expand(&Matrix::zeros(2, 77)).cols(), 3080);
    }
}
