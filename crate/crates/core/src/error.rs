use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// The metric degenerates at the boundary circle of the orbit disk.
    #[error("radius {rho} entered the singular guard band (limit {limit})")]
    SingularBoundary { rho: f64, limit: f64 },

    #[error("integration exceeded {0} steps")]
    MaxSteps(usize),

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("conservation drift {drift:e} of {quantity} exceeds limit {limit:e} at t = {t}")]
    ConservationDrift {
        quantity: &'static str,
        drift: f64,
        limit: f64,
        t: f64,
    },

    #[error("no sign change on [{lo}, {hi}] (f = {f_lo:e}, {f_hi:e})")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("trajectory is not closed (|f| = {0:e})")]
    NotClosed(f64),

    #[error("branch invariants changed: {0}")]
    BranchJump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and positive",
        })
    }
}
