//! Simulated remote palpation of a neck phantom.
//!
//! The crate models a three-axis Cartesian robot pressing on a soft phantom,
//! drives it with a hybrid force-motion controller, relays it to a master
//! device, estimates tissue stiffness from probe motion and force, and runs
//! the four localisation modes through scripted virtual users.

// `!(x > 0.0)` is the NaN-rejecting form used by every validator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autoscan;
pub mod controller;
pub mod error;
pub mod harness;
pub mod phantom;
pub mod robot_sim;
pub mod stiffness;
pub mod teleop;

pub use error::*;
