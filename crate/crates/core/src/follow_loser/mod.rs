//! Mean-reversion strategies that move capital toward recent losers.

pub mod anticor;
pub mod cwmr;
pub mod median;
pub mod olmar;
pub mod pamr;
pub mod rmr;

pub use anticor::{anticor_claims, anticor_update, Anticor};
pub use cwmr::{confidence_to_phi, cwmr_update, Cwmr, GaussianPortfolio};
pub use median::{l1_median, l1_median_trace, l1_objective, MedianTrace};
pub use olmar::{olmar_predict, reversion_pa_step, Olmar};
pub use pamr::{pamr_loss, pamr_update, Pamr, PamrSpec, PamrVariant};
pub use rmr::{rmr_predict, Rmr};
