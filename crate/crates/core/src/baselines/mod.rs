//! Reference solvers: closed-form ridge, principal component regression and
//! SVRG.

mod exact;
mod pcr;
mod svrg;

pub use exact::{ridge_exact, RidgeMode};
pub use pcr::{pcr_fit, PcrModel};
pub use svrg::{mean_smoothness, svrg_ridge, svrg_step_grid, tune_svrg_step, SvrgConfig};
