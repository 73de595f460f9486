//! Hybrid force-motion control.
//!
//! The joint command is `τ = τ_m − τ_f + g − B ṗ`, where the motion term acts
//! in the tangent plane of the contact and the force term along the estimated
//! surface normal. Before the first contact the motion term runs alone with
//! `Ω_m = I`.
//!
//! Units: positions mm, velocities mm/s, forces N. Gains `Kp_m` (1/s²) and
//! `Kd_m` (1/s) act on mm-valued errors and are converted to m/s² before
//! multiplication with the mass matrix; `Kv` and `B` are in N·s/m.

use std::collections::VecDeque;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::ControlError;
use crate::robot_sim::{PlantParams, RobotState};

const MM_TO_M: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub kp_m: [f64; 3],
    pub kd_m: [f64; 3],
    pub kp_f: [f64; 3],
    pub ki_f: [f64; 3],
    pub kv: [f64; 3],
    /// Normal force held in contact, N.
    pub f_hold: f64,
    /// Length of the moving-average window used for the surface normal.
    pub normal_window: usize,
    /// Bound on the magnitude of the integral term `K_i ∫ f_e`, N.
    pub integral_clamp: f64,
    /// Commanding the reference this far out of the surface (mm, along the
    /// normal) hands the axis back to the motion controller so the probe can lift.
    pub retract_distance: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kp_m: [400.0; 3],
            kd_m: [40.0; 3],
            kp_f: [1.0; 3],
            ki_f: [8.0; 3],
            kv: [100.0; 3],
            f_hold: 1.35,
            normal_window: 100,
            integral_clamp: 3.0,
            retract_distance: 5.0,
        }
    }
}

fn diag(v: &[f64; 3]) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::from(*v))
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.kp_m, self.kd_m, self.kp_f, self.ki_f, self.kv];
        if all.iter().flatten().any(|g| !(*g >= 0.0)) {
            return Err("controller gains must be non-negative".into());
        }
        if self.kp_m.iter().chain(&self.kd_m).any(|g| *g <= 0.0) {
            return Err("motion gains must be positive definite".into());
        }
        if self.normal_window == 0 {
            return Err("normal_window must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FreeMotion,
    Hybrid,
}

/// Desired trajectory and force for one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct References {
    pub p_d: Point3<f64>,
    pub p_dot_d: Vector3<f64>,
    pub p_ddot_d: Vector3<f64>,
    /// Desired force on the robot. `None` holds `f_hold` along the normal.
    pub f_d: Option<Vector3<f64>>,
}

impl References {
    pub fn hold_at(p_d: Point3<f64>) -> Self {
        Self {
            p_d,
            p_dot_d: Vector3::zeros(),
            p_ddot_d: Vector3::zeros(),
            f_d: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    /// Integral of the projected force error, N·s.
    pub f_e_integral: Vector3<f64>,
    pub normal_history: VecDeque<Vector3<f64>>,
    pub n_hat: Vector3<f64>,
    pub active_regime: Regime,
}

impl ControllerState {
    pub fn new(window: usize) -> Self {
        Self {
            f_e_integral: Vector3::zeros(),
            normal_history: VecDeque::with_capacity(window),
            n_hat: Vector3::z(),
            active_regime: Regime::FreeMotion,
        }
    }
}

/// `Ω_f = n̂ n̂ᵀ`, `Ω_m = I − Ω_f`.
pub fn projection_matrices(n_hat: &Vector3<f64>) -> Result<(Matrix3<f64>, Matrix3<f64>), ControlError> {
    let norm = n_hat.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(ControlError::NonUnitNormal(norm));
    }
    let omega_f = n_hat * n_hat.transpose();
    Ok((omega_f, Matrix3::identity() - omega_f))
}

/// Normalized mean of the buffered environment-on-probe forces.
pub fn estimate_surface_normal<'a>(
    history: impl IntoIterator<Item = &'a Vector3<f64>>,
) -> Result<Vector3<f64>, ControlError> {
    let (sum, n) = history
        .into_iter()
        .fold((Vector3::zeros(), 0usize), |(s, n), f| (s + f, n + 1));
    if n == 0 {
        return Err(ControlError::UndefinedNormal);
    }
    let mean = sum / n as f64;
    if mean.norm() < 1e-6 {
        return Err(ControlError::UndefinedNormal);
    }
    Ok(mean.normalize())
}

/// `τ_m = Ω_m D [Kp_m (p_d − p) + Kd_m (ṗ_d − ṗ) + p̈_d]`.
pub fn motion_torque(
    state: &RobotState,
    refs: &References,
    cfg: &ControllerConfig,
    omega_m: &Matrix3<f64>,
    mass: &Vector3<f64>,
) -> Vector3<f64> {
    let accel_mm = diag(&cfg.kp_m) * (refs.p_d - state.p)
        + diag(&cfg.kd_m) * (refs.p_dot_d - state.p_dot)
        + refs.p_ddot_d;
    omega_m * Matrix3::from_diagonal(mass) * (accel_mm * MM_TO_M)
}

/// `τ_f = Ω_f (f_d + Kp_f f_e + Ki_f ∫ f_e + Kv ṗ)` with `f_e = f_d − f_c`.
///
/// The velocity term carries a plus sign here because `τ_f` enters the joint
/// command negated, so `−τ_f` contributes `−Kv ṗ` as a damping force. Only the
/// constrained component `Ω_f f_e` is integrated; the integral is rescaled so
/// that `‖Ki_f ∫ f_e‖` never exceeds `cfg.integral_clamp`.
pub fn force_torque(
    f_d: &Vector3<f64>,
    f_c: &Vector3<f64>,
    st: &mut ControllerState,
    cfg: &ControllerConfig,
    omega_f: &Matrix3<f64>,
    p_dot: &Vector3<f64>,
    dt: f64,
) -> Vector3<f64> {
    let ki = diag(&cfg.ki_f);
    let f_e = f_d - f_c;
    st.f_e_integral += omega_f * f_e * dt;
    let contribution = (ki * st.f_e_integral).norm();
    if contribution > cfg.integral_clamp {
        st.f_e_integral *= cfg.integral_clamp / contribution;
    }
    omega_f
        * (f_d + diag(&cfg.kp_f) * f_e + ki * st.f_e_integral + diag(&cfg.kv) * (p_dot * MM_TO_M))
}

/// Controller with its plant model (mass, friction, gravity estimates).
#[derive(Debug, Clone)]
pub struct HybridController {
    pub cfg: ControllerConfig,
    pub model: PlantParams,
    pub state: ControllerState,
}

/// Diagnostic values of the last control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub tau: Vector3<f64>,
    pub tau_m: Vector3<f64>,
    pub tau_f: Vector3<f64>,
    pub regime: Regime,
}

impl HybridController {
    pub fn new(cfg: ControllerConfig, model: PlantParams) -> Self {
        let state = ControllerState::new(cfg.normal_window);
        Self { cfg, model, state }
    }

    pub fn regime(&self) -> Regime {
        self.state.active_regime
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.state.n_hat
    }

    fn enter_hybrid(&mut self, f_c: &Vector3<f64>) {
        let st = &mut self.state;
        st.normal_history.clear();
        st.f_e_integral = Vector3::zeros();
        if f_c.norm() > 1e-6 {
            st.n_hat = f_c.normalize();
        }
        st.active_regime = Regime::Hybrid;
    }

    fn leave_hybrid(&mut self) {
        let st = &mut self.state;
        st.normal_history.clear();
        st.f_e_integral = Vector3::zeros();
        st.active_regime = Regime::FreeMotion;
    }

    /// One control tick. Uses `state.in_contact` for the regime switch.
    pub fn step(&mut self, state: &RobotState, refs: &References) -> ControlOutput {
        let wants_lift = self.state.n_hat.dot(&(refs.p_d - state.p)) > self.cfg.retract_distance;
        let hybrid = state.in_contact && !wants_lift;
        match (self.state.active_regime, hybrid) {
            (Regime::FreeMotion, true) => self.enter_hybrid(&state.f_c),
            (Regime::Hybrid, false) => self.leave_hybrid(),
            _ => {}
        }

        let mass = self.model.mass_vec();
        let compensation = self.model.gravity_load() - self.model.friction_vec().component_mul(&state.p_dot) * MM_TO_M;

        if self.state.active_regime == Regime::FreeMotion {
            let tau_m = motion_torque(state, refs, &self.cfg, &Matrix3::identity(), &mass);
            return ControlOutput {
                tau: tau_m + compensation,
                tau_m,
                tau_f: Vector3::zeros(),
                regime: Regime::FreeMotion,
            };
        }

        let st = &mut self.state;
        if st.normal_history.len() == self.cfg.normal_window {
            st.normal_history.pop_front();
        }
        st.normal_history.push_back(state.f_c);
        if let Ok(n) = estimate_surface_normal(st.normal_history.iter()) {
            st.n_hat = n;
        }
        let n_hat = st.n_hat;
        let (omega_f, omega_m) = projection_matrices(&n_hat).expect("normal estimate is unit length");
        let f_d = refs.f_d.unwrap_or(n_hat * self.cfg.f_hold);
        let tau_m = motion_torque(state, refs, &self.cfg, &omega_m, &mass);
        let tau_f = force_torque(&f_d, &state.f_c, &mut self.state, &self.cfg, &omega_f, &state.p_dot, self.model.dt());
        ControlOutput {
            tau: tau_m - tau_f + compensation,
            tau_m,
            tau_f,
            regime: Regime::Hybrid,
        }
    }
}
