//! Numerical tolerances shared by the solvers and certificates.
//!
//! Every threshold that decides success or failure lives here so that the
//! whole toolkit can be audited in one place.

/// Max Newton–Kleinman iterations before the Riccati solve gives up.
pub const CARE_MAX_ITERATIONS: usize = 200;

/// Relative CARE residual the final solution must satisfy.
pub const CARE_RESIDUAL_TOL: f64 = 1e-8;

/// Relative change in `P` between Newton steps that ends the iteration.
pub const CARE_STEP_TOL: f64 = 1e-14;

/// Relative Lyapunov residual bound: `‖aᵀP + Pa + q‖ < tol·(‖a‖‖P‖ + ‖q‖)`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-9;

/// Eigenvalues with real part above `-HURWITZ_MARGIN·max(1, ρ)` are treated as
/// not strictly stable (`ρ` is the spectral radius).
pub const HURWITZ_MARGIN: f64 = 1e-12;

/// Schur iteration budget for the eigenvalue routine.
pub const EIGEN_MAX_ITERATIONS: usize = 10_000;

/// Slack allowed on the Riccati LMI, which the optimal gain attains with equality.
pub const LQR_LMI_SLACK: f64 = 1e-6;

/// Strictness injected into the H2 certificate witnesses, relative to the
/// magnitude of the quantity being perturbed.
pub const H2_LMI_STRICTNESS: f64 = 1e-6;

/// Upper bound on the relative growth of `trace(Z)` caused by the strictness
/// perturbation of `X`.
pub const H2_LMI_TRACE_BUDGET: f64 = 1e-4;

/// A block is declared negative definite when its largest eigenvalue is below
/// `-H2_LMI_MARGIN·scale`, `scale` being the largest norm among the terms that
/// make up the block.
pub const H2_LMI_MARGIN: f64 = 1e-12;

/// Least-squares PID extraction residual (relative to `‖M‖`) above which a
/// warning is attached to the result.
pub const EXTRACTION_WARN_RESIDUAL: f64 = 1e-6;

/// Singular values below `tol·σ_max` count as zero in rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Any state magnitude above this aborts a simulation as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e9;
