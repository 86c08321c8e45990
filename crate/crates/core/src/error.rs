use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration did not converge: {0}")]
    NonConvergence(String),

    #[error("quadrature accuracy not met: estimated error {estimate:e} exceeds tolerance {tolerance:e}")]
    QuadratureAccuracy { estimate: f64, tolerance: f64 },

    /// No finite shooting parameter produces the requested half-aperture.
    #[error("half-angle {target} is out of range: the critical half-angle for p = {p} is {critical}")]
    OutOfRange { target: f64, critical: f64, p: f64 },

    #[error("degenerate start: local expansion and ODE disagree by {relative_gap:e} at theta = {theta}")]
    DegenerateStart { theta: f64, relative_gap: f64 },

    #[error("gradient magnitude {0:e} is too small to evaluate the infinity Laplacian")]
    CriticalPoint(f64),

    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),

    #[error("strategy violation: {0}")]
    StrategyViolation(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
