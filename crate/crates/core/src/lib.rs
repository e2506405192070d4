//! Density-ratio regression test of conditional independence X ⊥ Y | Z.
//!
//! The unconditional ratio r(y, z) and the conditional ratio π(x, y, z) are
//! estimated by sieve least squares on polynomial bases; under the null π ≡ 1
//! and the weighted squared deviation of π̂ from one, centered and scaled,
//! is asymptotically standard normal.
//!
//! Modules:
//! - [`basis`]: monomial sieve bases and the candidate grid
//! - [`sample`]: aligned observations and the rank transform
//! - [`ratio`]: two-stage ratio estimation and balancing diagnostics
//! - [`statistic`]: Î, B̂, σ̂ and the test decision
//! - [`tuning`]: smoothed-bootstrap basis selection
//! - [`simulation`]: time-series designs, the linear Granger baseline and
//!   Monte Carlo size/power studies
//!
//! Replications in [`tuning`] and [`simulation`] run on rayon when the
//! `parallel` feature is enabled (the default); results do not depend on the
//! execution mode.

pub mod basis;
pub mod design;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod normal;
pub mod ratio;
pub mod rng;
pub mod sample;
pub mod simulation;
pub mod statistic;
pub mod tuning;

pub use basis::{candidate_grid, eval_u, eval_v, BasisSpec, Monomial};
pub use error::{Error, Result};
pub use exec::ExecMode;
pub use ratio::{
    balance_residuals, eval_pi, eval_r, fit_conditional, fit_unconditional, fit_unconditional_with,
    CondRatioFit, FitOptions, UncondRatioFit, Warning,
};
pub use sample::{rank_transform, Sample};
pub use statistic::{
    compute_b, compute_i, compute_sigma, evaluate_candidates, influence_matrix,
    influence_matrix_with, run_test, run_test_recombined, InfluenceForm, InfluenceMatrix,
    TestOptions, TestResult,
};
pub use tuning::{choose_candidate, select_basis, BootstrapScale, TuningConfig, TuningReport};
