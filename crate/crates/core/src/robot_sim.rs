//! Three-axis Cartesian stage plant. Joint space equals Cartesian space, so
//! "torque" is an axis force in N. Positions are in mm, forces in N.

use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::phantom::{contact_force, PhantomModel, Workspace};

/// Force the contact detector latches on, N.
pub const CONTACT_ON_THRESHOLD: f64 = 0.5;
/// Force below which a latched contact is released, N.
pub const CONTACT_OFF_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    /// mm
    pub p: Point3<f64>,
    /// mm/s
    pub p_dot: Vector3<f64>,
    /// mm/s²
    pub p_ddot: Vector3<f64>,
    /// Measured contact force acting on the robot, N.
    pub f_c: Vector3<f64>,
    pub in_contact: bool,
}

impl RobotState {
    pub fn at_rest(p: Point3<f64>) -> Self {
        Self {
            p,
            p_dot: Vector3::zeros(),
            p_ddot: Vector3::zeros(),
            f_c: Vector3::zeros(),
            in_contact: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    /// Diagonal of the mass matrix, kg.
    pub mass: [f64; 3],
    /// Diagonal viscous friction, N·s/m.
    pub friction: [f64; 3],
    /// Gravitational force acting on the carriage, N.
    pub gravity_force: [f64; 3],
    /// Standard deviation of additive force-sensor noise per axis, N.
    pub sensor_noise_sigma: f64,
    pub step_rate: f64,
    /// Per-axis saturation of the commanded force, N.
    pub torque_limit: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            mass: [8.0, 6.0, 4.0],
            friction: [15.0, 15.0, 15.0],
            gravity_force: [0.0, 0.0, -39.2],
            sensor_noise_sigma: 0.02,
            step_rate: 1000.0,
            torque_limit: 200.0,
        }
    }
}

impl PlantParams {
    pub fn dt(&self) -> f64 {
        1.0 / self.step_rate
    }

    pub fn mass_vec(&self) -> Vector3<f64> {
        Vector3::from(self.mass)
    }

    pub fn friction_vec(&self) -> Vector3<f64> {
        Vector3::from(self.friction)
    }

    /// Load the controller must supply to hold the carriage against gravity.
    pub fn gravity_load(&self) -> Vector3<f64> {
        -Vector3::from(self.gravity_force)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.mass.iter().any(|m| !(*m > 0.0)) {
            return Err(SimError::InvalidPlant("mass entries must be positive".into()));
        }
        if self.friction.iter().any(|b| !(*b >= 0.0)) {
            return Err(SimError::InvalidPlant("friction entries must be non-negative".into()));
        }
        if !(self.step_rate > 0.0) {
            return Err(SimError::InvalidPlant("step_rate must be positive".into()));
        }
        if !(self.sensor_noise_sigma >= 0.0) {
            return Err(SimError::InvalidPlant("sensor noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// One semi-implicit Euler step of `D p̈ = τ − B ṗ + g_force + f_contact`.
///
/// `limits` are the hard stops of the stages; hitting one zeroes the velocity
/// along that axis. The returned `f_c` is the phantom force plus sensor noise;
/// `in_contact` is carried over unchanged (see [`ContactDetector`]).
pub fn step_dynamics(
    state: &RobotState,
    tau: &Vector3<f64>,
    plant: &PlantParams,
    phantom: &PhantomModel,
    limits: &Workspace,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<RobotState, SimError> {
    if !tau.iter().all(|v| v.is_finite()) {
        return Err(SimError::NonFiniteTorque([tau.x, tau.y, tau.z]));
    }
    let tau = tau.map(|v| v.clamp(-plant.torque_limit, plant.torque_limit));
    let f_env = contact_force(phantom, &state.p);
    // mm/s -> m/s for the friction term
    let friction = plant.friction_vec().component_mul(&state.p_dot) * 1e-3;
    let net = tau - friction + Vector3::from(plant.gravity_force) + f_env;
    // m/s² -> mm/s²
    let p_ddot = net.component_div(&plant.mass_vec()) * 1e3;

    let mut p_dot = state.p_dot + p_ddot * dt;
    let mut p = state.p + p_dot * dt;
    let lows = [limits.x.min(), limits.y.min(), limits.z.min()];
    let highs = [limits.x.max(), limits.y.max(), limits.z.max()];
    for axis in 0..3 {
        if p[axis] < lows[axis] {
            p[axis] = lows[axis];
            p_dot[axis] = 0.0;
        } else if p[axis] > highs[axis] {
            p[axis] = highs[axis];
            p_dot[axis] = 0.0;
        }
    }

    let mut f_c = contact_force(phantom, &p);
    if plant.sensor_noise_sigma > 0.0 {
        let noise = Normal::new(0.0, plant.sensor_noise_sigma).expect("sigma validated");
        f_c += Vector3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
    }

    Ok(RobotState {
        p,
        p_dot,
        p_ddot,
        f_c,
        in_contact: state.in_contact,
    })
}

/// Contact flag with hysteresis: latches at 0.5 N, releases below 0.25 N.
pub fn detect_contact(f_c: &Vector3<f64>, latched: bool) -> bool {
    let mag = f_c.norm();
    if latched {
        mag >= CONTACT_OFF_THRESHOLD
    } else {
        mag >= CONTACT_ON_THRESHOLD
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ContactDetector {
    latched: bool,
}

impl ContactDetector {
    pub fn update(&mut self, f_c: &Vector3<f64>) -> bool {
        self.latched = detect_contact(f_c, self.latched);
        self.latched
    }

    pub fn is_latched(&self) -> bool {
        self.latched
    }

    pub fn reset(&mut self) {
        self.latched = false;
    }
}

/// Owns the plant state, the phantom and the sensor-noise stream.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub phantom: Arc<PhantomModel>,
    pub plant: PlantParams,
    pub limits: Workspace,
    state: RobotState,
    detector: ContactDetector,
    rng: ChaCha8Rng,
    t: f64,
    ticks: u64,
}

impl Simulator {
    pub fn new(
        phantom: Arc<PhantomModel>,
        plant: PlantParams,
        start: Point3<f64>,
        rng: ChaCha8Rng,
    ) -> Result<Self, SimError> {
        plant.validate()?;
        let limits = phantom.workspace;
        Ok(Self {
            phantom,
            plant,
            limits,
            state: RobotState::at_rest(start),
            detector: ContactDetector::default(),
            rng,
            t: 0.0,
            ticks: 0,
        })
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Noise-free contact force at the current probe position.
    pub fn true_contact_force(&self) -> Vector3<f64> {
        contact_force(&self.phantom, &self.state.p)
    }

    pub fn step(&mut self, tau: &Vector3<f64>) -> Result<&RobotState, SimError> {
        let dt = self.plant.dt();
        let mut next = step_dynamics(&self.state, tau, &self.plant, &self.phantom, &self.limits, dt, &mut self.rng)?;
        next.in_contact = self.detector.update(&next.f_c);
        self.state = next;
        self.ticks += 1;
        self.t = self.ticks as f64 * dt;
        Ok(&self.state)
    }
}
