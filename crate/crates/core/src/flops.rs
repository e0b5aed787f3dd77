//! Model-based floating-point operation accounting.
//!
//! The ledger is not a profiler. Every counted routine charges a fixed
//! amount from the table below, so two runs with the same inputs and
//! seeds always produce identical totals.
//!
//! | operation                         | charge        |
//! |-----------------------------------|---------------|
//! | `m×k · k×n` product               | `2mkn`        |
//! | `m×n` matrix–vector product       | `2mn`         |
//! | dot / axpy on length `n`          | `2n`          |
//! | elementwise scale/add on `n`      | `n`           |
//! | thin QR of `m×k`                  | `4mk²`        |
//! | dense SVD of `k×p` (`k ≤ p`)      | `10k²p`       |
//! | Cholesky of `m×m`                 | `m³/3`        |
//! | triangular solve `m×m`            | `m²`          |

use std::collections::BTreeMap;

/// Phase labels used by the solvers in this crate.
pub mod phase {
    pub const SVD: &str = "svd";
    pub const STAGE1: &str = "stage1";
    pub const STAGE2: &str = "stage2";
    /// Folding a fitted model into a single coefficient vector.
    pub const FOLD: &str = "fold";
    pub const GD: &str = "gd";
    pub const EXACT: &str = "exact";
    pub const PCR: &str = "pcr";
    pub const SVRG: &str = "svrg";
}

/// Monotone FLOP counter, tagged by phase.
///
/// Concurrent tasks each own a ledger and combine them with [`FlopLedger::merge`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlopLedger {
    total: u64,
    per_phase: BTreeMap<String, u64>,
}

impl FlopLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, phase: &str, flops: u64) {
        if flops == 0 {
            return;
        }
        self.total += flops;
        *self.per_phase.entry(phase.to_owned()).or_insert(0) += flops;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn phase(&self, phase: &str) -> u64 {
        self.per_phase.get(phase).copied().unwrap_or(0)
    }

    pub fn phases(&self) -> impl Iterator<Item = (&str, u64)> {
        self.per_phase.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn merge(&mut self, other: &FlopLedger) {
        for (phase, flops) in other.phases() {
            self.charge(phase, flops);
        }
    }
}

pub(crate) mod cost {
    pub fn matmul(m: usize, k: usize, n: usize) -> u64 {
        2 * (m * k * n) as u64
    }

    pub fn matvec(m: usize, n: usize) -> u64 {
        2 * (m * n) as u64
    }

    pub fn dot(n: usize) -> u64 {
        2 * n as u64
    }

    pub fn elementwise(n: usize) -> u64 {
        n as u64
    }

    pub fn qr(m: usize, k: usize) -> u64 {
        4 * (m * k * k) as u64
    }

    /// Dense SVD charge; the small dimension enters squared.
    pub fn svd(rows: usize, cols: usize) -> u64 {
        let (k, p) = if rows <= cols { (rows, cols) } else { (cols, rows) };
        10 * (k * k * p) as u64
    }

    pub fn cholesky(m: usize) -> u64 {
        (m * m * m / 3) as u64
    }

    pub fn triangular_solve(m: usize) -> u64 {
        (m * m) as u64
    }
}
