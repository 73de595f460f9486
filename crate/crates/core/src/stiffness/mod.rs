//! Stiffness estimation: force excitation, per-cycle directional regression
//! and gridding of the scattered estimates into a map.

pub mod excitation;
pub mod gridding;
pub mod online;
pub mod regression;

pub use excitation::{sinusoid_reference, ExcitationParams};
pub use gridding::{update_map, LiveMap, MapSnapshot, StiffnessMap};
pub use online::{EstimatorConfig, PalpationEstimator, StiffnessSample};
pub use regression::{estimate_stiffness, fit_line, fit_motion_direction, palpation_depths, projected_forces};
