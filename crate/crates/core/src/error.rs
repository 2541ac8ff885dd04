use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("medium fully absorbing in closed-form regime (alpha0*L = {alpha0_l})")]
    FullyAbsorbing { alpha0_l: f64 },

    #[error("steady state is not unique (null space dimension > 1, smallest pivot {pivot:e})")]
    DegenerateSteadyState { pivot: f64 },

    #[error("steady-state residual {residual:e} exceeds {limit:e}")]
    SteadyStateResidual { residual: f64, limit: f64 },

    #[error("step size underflow at z = {z} cm")]
    StepUnderflow { z: f64 },

    #[error("power increased by {relative:e} (relative) at z = {z} cm; response provider is not passive")]
    PowerIncrease { z: f64, relative: f64 },

    #[error("velocity class {node} (kv = {kv:e} rad/s) failed: {source}")]
    VelocityNode {
        node: usize,
        kv: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("Doppler average did not converge within {max_nodes} nodes (last change {change:e})")]
    QuadratureNotConverged { max_nodes: usize, change: f64 },

    #[error("insufficient rows in linear zone: need {needed}, have {found}")]
    InsufficientRows { needed: usize, found: usize },

    #[error("infinite shot noise: transmitted power is zero")]
    ZeroTransmittedPower,

    #[error("optimization: {0}")]
    Optimization(String),

    #[error("level scheme table, line {line}: {reason}")]
    SchemeTable { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
