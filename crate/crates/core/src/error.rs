use thiserror::Error;

/// Errors raised anywhere in the solver and verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative radius {0}")]
    NegativeRadius(f64),

    #[error("no limit at infinity detected (tail oscillation {oscillation:.3e} > {tolerance:.3e}); supply the essential-spectrum floor manually")]
    NoLimitDetected { oscillation: f64, tolerance: f64 },

    #[error("field has zero mass")]
    ZeroMass,

    #[error("mass-supercritical window violated: need 2 + 4/N < q < 2N/(N-2), got N = {dimension}, q = {q}")]
    WindowViolation { dimension: usize, q: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("first eigenvalue not converged in r_max: {value} at r_max, {doubled} at 2 r_max")]
    TruncationUnstable { value: f64, doubled: f64 },

    #[error("GN quotient ascent stalled after {iterations} iterations (gradient {gradient:.3e})")]
    AscentStall { iterations: usize, gradient: f64 },

    #[error("GN constant methods disagree: ascent {ascent}, ground state {ground_state} (rel. {relative:.3e})")]
    MethodDisagreement {
        ascent: f64,
        ground_state: f64,
        relative: f64,
    },

    #[error("potential gap V_inf - lambda_ess = {0} must be <= 0")]
    PositiveGap(f64),

    #[error("mountain-pass geometry violated: {0}")]
    GeometryViolated(String),

    #[error("iterate {iteration} left the gradient ball: |grad u| = {grad_norm} >= t_mu = {t_mu}")]
    LeftSigma {
        iteration: usize,
        grad_norm: f64,
        t_mu: f64,
        exit_iterate: Vec<f64>,
    },

    #[error("mountain-pass path collapsed: maximal knot {index} is an endpoint")]
    PathCollapse { index: usize },

    #[error("constrained Newton diverged after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("interval [{a}, {b}] outside [0, {r_max}] or empty")]
    IntervalOutOfRange { a: f64, b: f64, r_max: f64 },

    #[error("shooting bracket not found for the ground state (N = {dimension}, q = {q})")]
    BracketNotFound { dimension: usize, q: f64 },

    #[error("no interior local maximum found")]
    NoMaximaFound,

    #[error("far set is empty for R = {0}")]
    FarSetEmpty(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
