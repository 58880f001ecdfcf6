//! Full-conditional updates for the Gibbs cycle and the univariate slice
//! sampler they rely on.

mod phi;
mod regression;
mod slice;
pub(crate) mod z;

pub use phi::sample_phi_row;
pub use regression::{beta_log_fcd, sample_beta, sample_overdispersion, RegressionContext, LINEAR_PREDICTOR_CAP};
pub use slice::{slice_sample, SliceConfig};
pub use z::{categorical_from_log, sample_z_sweep, z_fcd_weights, z_log_weights};
