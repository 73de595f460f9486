//! Streaming estimator: turns the 1 kHz probe stream into stiffness samples.
//!
//! Every `hop` ticks the last `window` samples are fitted. The motion
//! direction comes from positions with a quadratic time trend removed, so a
//! lateral sweep, including its start and stop, does not masquerade as the
//! palpation axis. Depths and projected forces are partialled on the same
//! trend before the slope is taken.

use std::collections::VecDeque;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::regression::{estimate_stiffness, fit_motion_direction, palpation_depths, projected_forces};
use crate::error::EstimationError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Regression window, ticks.
    pub window: usize,
    /// Ticks between evaluations.
    pub hop: usize,
    /// Recent positions averaged into `μ_p`.
    pub mean_window: usize,
    /// Largest accepted angle between `û` and the mean applied load, degrees.
    pub max_misalignment_deg: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            window: 500,
            hop: 250,
            mean_window: 250,
            max_misalignment_deg: 30.0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.window < super::regression::MIN_WINDOW {
            return Err("estimator window is too short".into());
        }
        if self.hop == 0 || self.mean_window == 0 || self.mean_window > self.window {
            return Err("estimator hop must be positive and mean_window within the window".into());
        }
        if !(self.max_misalignment_deg > 0.0 && self.max_misalignment_deg <= 90.0) {
            return Err("max_misalignment_deg must lie in (0, 90]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessSample {
    /// x/y of `μ_p`, mm.
    pub location: [f64; 2],
    /// N/mm.
    pub kappa: f64,
    /// s.
    pub timestamp: f64,
    /// Unloaded surface point under `μ_p` along `û`, mm.
    pub surface_point: [f64; 3],
    pub u_hat: [f64; 3],
}

#[derive(Debug, Clone, Copy)]
struct Tick {
    t: f64,
    p: Point3<f64>,
    f_env: Vector3<f64>,
    in_contact: bool,
}

/// Why the last evaluation emitted nothing.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    ContactLost,
    Fit(EstimationError),
    /// Residual motion is not along the load, e.g. a turn in the sweep path.
    Misaligned,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct PalpationEstimator {
    cfg: EstimatorConfig,
    buf: VecDeque<Tick>,
    since_eval: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub last_rejection: Option<Rejection>,
}

/// Least-squares removal of a quadratic time trend. By Frisch–Waugh, the OLS
/// slope between two partialled series equals the slope of the joint fit with
/// the trend terms, so `w = κ d + poly(t)` still yields exactly `κ`.
struct TimeTrend {
    basis: Vec<Vector3<f64>>,
    gram_inv: Matrix3<f64>,
}

impl TimeTrend {
    fn new(t: &[f64]) -> Option<Self> {
        let (lo, hi) = (t[0], t[t.len() - 1]);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        if !(half > 0.0) {
            return None;
        }
        let basis: Vec<Vector3<f64>> = t
            .iter()
            .map(|x| {
                let u = (x - mid) / half;
                Vector3::new(1.0, u, u * u)
            })
            .collect();
        let gram = basis.iter().fold(Matrix3::zeros(), |g, b| g + b * b.transpose());
        Some(Self {
            gram_inv: gram.try_inverse()?,
            basis,
        })
    }

    fn remove(&self, v: &mut [f64]) {
        let rhs = self.basis.iter().zip(v.iter()).fold(Vector3::zeros(), |r, (b, y)| r + b * *y);
        let c = self.gram_inv * rhs;
        for (b, y) in self.basis.iter().zip(v.iter_mut()) {
            *y -= c.dot(b);
        }
    }
}

impl PalpationEstimator {
    pub fn new(cfg: EstimatorConfig) -> Self {
        Self {
            cfg,
            buf: VecDeque::with_capacity(cfg.window),
            since_eval: 0,
            accepted: 0,
            rejected: 0,
            last_rejection: None,
        }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    /// Drops buffered history, e.g. when the excitation is stopped.
    pub fn reset(&mut self) {
        self.buf.clear();
        self.since_eval = 0;
    }

    /// Feeds one tick. `f_c` is the measured environment-on-probe force.
    pub fn push(&mut self, t: f64, p: Point3<f64>, f_c: Vector3<f64>, in_contact: bool) -> Option<StiffnessSample> {
        if self.buf.len() == self.cfg.window {
            self.buf.pop_front();
        }
        self.buf.push_back(Tick {
            t,
            p,
            f_env: -f_c,
            in_contact,
        });
        self.since_eval += 1;
        if self.buf.len() < self.cfg.window || self.since_eval < self.cfg.hop {
            return None;
        }
        self.since_eval = 0;
        match self.evaluate() {
            Ok(s) => {
                self.accepted += 1;
                self.last_rejection = None;
                Some(s)
            }
            Err(r) => {
                self.rejected += 1;
                self.last_rejection = Some(r);
                None
            }
        }
    }

    fn evaluate(&self) -> Result<StiffnessSample, Rejection> {
        if self.buf.iter().any(|s| !s.in_contact) {
            return Err(Rejection::ContactLost);
        }
        let times: Vec<f64> = self.buf.iter().map(|s| s.t).collect();
        let positions: Vec<Point3<f64>> = self.buf.iter().map(|s| s.p).collect();
        let forces: Vec<Vector3<f64>> = self.buf.iter().map(|s| s.f_env).collect();

        let trend = TimeTrend::new(&times).ok_or(Rejection::NonFinite)?;
        let mut detrended = positions.clone();
        for axis in 0..3 {
            let mut col: Vec<f64> = positions.iter().map(|p| p[axis]).collect();
            trend.remove(&mut col);
            for (p, v) in detrended.iter_mut().zip(col) {
                p[axis] = v;
            }
        }
        let (u_hat, _) = fit_motion_direction(&detrended).map_err(Rejection::Fit)?;
        let load = forces.iter().sum::<Vector3<f64>>();
        if u_hat.dot(&load) < load.norm() * self.cfg.max_misalignment_deg.to_radians().cos() {
            return Err(Rejection::Misaligned);
        }

        let recent = &positions[positions.len() - self.cfg.mean_window..];
        let mu_p = Point3::from(recent.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / recent.len() as f64);

        let mut d = palpation_depths(&positions, &u_hat, &mu_p);
        let mut w = projected_forces(&forces, &u_hat);
        let w_recent = w[w.len() - self.cfg.mean_window..].iter().sum::<f64>() / self.cfg.mean_window as f64;
        trend.remove(&mut d);
        trend.remove(&mut w);
        let kappa = estimate_stiffness(&d, &w).map_err(Rejection::Fit)?;
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(Rejection::NonFinite);
        }
        // μ_p sits w̄/κ beneath the unloaded surface along û.
        let surface = mu_p - u_hat * (w_recent / kappa);
        Ok(StiffnessSample {
            location: [mu_p.x, mu_p.y],
            kappa,
            timestamp: *times.last().expect("window is full"),
            surface_point: [surface.x, surface.y, surface.z],
            u_hat: [u_hat.x, u_hat.y, u_hat.z],
        })
    }
}
