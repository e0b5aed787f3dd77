//! Seeded random generation.
//!
//! All draws come from ChaCha8 streams. Uniforms take the top 53 bits of a
//! `u64` word; standard normals use the Box–Muller transform on pairs of
//! uniforms. Both steps are written out here so results do not depend on the
//! sampling internals of any particular `rand` release.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomp::qr_thin;
use crate::error::{invalid, Result};
use crate::matrix::Matrix;

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..bound` (Lemire's widening multiply, unbiased).
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0);
        let bound = bound as u64;
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = (self.inner.next_u64() as u128) * (bound as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// I.i.d. standard normal matrix.
///
/// Entries are drawn column by column, so the first `k` columns of a wider
/// draw with the same seed equal the narrower draw.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    let mut out = Matrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            out[(i, j)] = rng.normal();
        }
    }
    out
}

pub fn gaussian_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    (0..len).map(|_| rng.normal()).collect()
}

/// Matrix with orthonormal columns: the Q factor of a Gaussian draw.
pub fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> Result<Matrix> {
    if cols == 0 || rows < cols {
        return Err(invalid(format!(
            "random_orthonormal needs rows >= cols >= 1, got {rows}x{cols}"
        )));
    }
    let (q, _) = qr_thin(&gaussian_matrix(rows, cols, seed))?;
    Ok(q)
}
