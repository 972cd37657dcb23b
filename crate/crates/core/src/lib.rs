//! Quantized feedback for nonlinear systems with a constant input delay.
//!
//! * [`quantizer`]: hysteretic logarithmic quantizer.
//! * [`systems`]: plant, feedback and Lyapunov data, with two worked examples.
//! * [`design`]: redesigned feedbacks and the chain of comparison functions
//!   that yields `u0`, `mu` and the number of levels.
//! * [`sim`]: method-of-steps simulation of the closed loop with exact
//!   switching instants.
//! * [`metrics`]: Lyapunov-Krasovskii functional along trajectories and
//!   bound checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod metrics;
pub mod quantizer;
pub mod sampling;
pub mod sim;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
