//! Trap-frequency ramps for fast, low-excitation expansions and compressions
//! of one-dimensional trapped-ion chains.
//!
//! The pipeline is:
//!
//! 1. [`chain_model`]: equilibrium geometry and the dynamical normal-mode basis.
//! 2. [`protocol_design`]: scaling-factor ansätze, recovery of the trap
//!    frequency ω₁(t) from the lowest mode, and the naive baseline ramps.
//! 3. [`auxiliary_dynamics`]: Ermakov/Newton auxiliary equations per normal
//!    mode, expansion-mode energies, and the shooting optimizer over the
//!    ansatz free parameters.
//! 4. [`lab_dynamics`]: full classical Coulomb-chain simulation of a ramp and
//!    the final excitation report.
//! 5. [`sweep`]: batch evaluation over final times, parallel when the
//!    `parallel` feature is enabled.

// `!(x > 0.0)` is used on purpose so NaN is rejected along with non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auxiliary_dynamics;
pub mod chain_model;
pub mod constants;
pub mod eigen;
mod error;
pub mod lab_dynamics;
pub mod ode;
pub mod protocol_design;
pub mod simplex;
pub mod sweep;

pub use error::{Error, Result};
