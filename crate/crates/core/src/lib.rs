//! H2-optimal and LQR-optimal PID tuning for the vertical (altitude) channel
//! of a quadcopter.
//!
//! The pipeline is:
//!
//! 1. [`models`] builds the plant and augments it with an integrator state.
//! 2. [`synthesis`] computes an optimal state-feedback gain for the augmented
//!    plant (LQR or H2, both through the Riccati equation) and certifies it
//!    against the LMI characterizations.
//! 3. [`pidtune`] maps that state gain back to scalar `K_P`, `K_I`, `K_D`.
//! 4. [`simkit`] runs the PID loop against Dryden vertical turbulence and
//!    reports input statistics and step metrics.
//!
//! [`cli`] wires these into the `h2pid` binary.

pub mod cli;
pub mod lincore;
pub mod models;
pub mod pidtune;
pub mod simkit;
pub mod synthesis;
pub mod tolerances;

pub use lincore::{LinalgError, Matrix};
pub use models::StateSpaceModel;
pub use pidtune::PidGains;
