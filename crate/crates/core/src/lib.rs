//! Decentralized optimal merging control for connected automated vehicles.
//!
//! Each vehicle entering a control zone of length `L` plans an analytic
//! trajectory minimizing `β (t_m - t0) + ∫ ½u² dt` subject to double-integrator
//! dynamics, a speed-dependent rear-end headway `x_p - x ≥ φ v + δ` against
//! its same-lane predecessor, and the same headway at the merging point
//! against its FIFO predecessor.
//!
//! * [`model`]: parameters, records and piecewise-analytic trajectories.
//! * [`unconstrained`]: closed-form plans when no constraint is active.
//! * [`safety`]: headway slack evaluation and sufficient guard conditions.
//! * [`constrained`]: plans whose headway constraint becomes active.
//! * [`sim`]: event-driven two-lane simulation with a FIFO coordinator.
//! * [`metrics`]: objective, fuel and run summaries.
//! * [`oracle`]: direct-collocation validator.
//! * [`cli`]: configuration, exports and canned examples.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constrained;
pub mod error;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod poly;
pub mod roots;
pub mod safety;
pub mod sim;
pub mod unconstrained;

pub use error::{Error, Result};
