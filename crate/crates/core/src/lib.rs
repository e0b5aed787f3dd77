//! Two-stage ridge regression (LING) and the solvers it is benchmarked
//! against, on top of a small dense linear-algebra layer with deterministic
//! FLOP accounting.

pub mod baselines;
pub mod bench;
pub mod datagen;
pub mod dataset;
pub mod decomp;
pub mod error;
pub mod flops;
pub mod gd;
pub mod ling;
pub mod matrix;
pub mod random;
pub mod randsvd;
pub mod risk;

pub use error::{Error, Result};
pub use flops::FlopLedger;
pub use matrix::Matrix;
