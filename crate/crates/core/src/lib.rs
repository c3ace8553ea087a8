//! S¹-invariant minimal tori in the ellipsoids `|z|²/a² + |w|² = 1`, studied
//! through closed geodesics of the two-dimensional orbit disk.
//!
//! * [`profile`] builds the reduced metric `dρ² + φ(ρ)² dθ²`.
//! * [`flow`] integrates its geodesics and detects diameter crossings.
//! * [`shooting`] finds closed geodesics as zeros of the shooting function.
//! * [`bifurcation`] predicts bifurcation instants and continues branches.
//! * [`lift`] maps closed geodesics back to tori in `ℝ⁴`.

pub mod acceptance;
pub mod bifurcation;
pub mod error;
pub mod export;
pub mod flow;
pub mod lift;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod shooting;

pub use error::{Error, Result};
pub use flow::{FlowConfig, GeodesicState, Trajectory};
pub use profile::EllipsoidGeometry;
