//! Time-series designs, the linear Granger baseline and Monte Carlo studies.

pub mod dgp;
pub mod granger;
pub mod monte_carlo;

pub use dgp::{generate, generate_seeded, DgpKind, DgpSpec};
pub use granger::{lagged_triples, linear_granger_test, log_diff_transform, LinearGrangerResult};
pub use monte_carlo::{monte_carlo, DrBasis, McConfig, McReport, McRow, TestKind};
