//! Simulation stack for one trial: plant, controller, excitation, estimator
//! and live map, advanced one control tick at a time.

use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::controller::{ControlOutput, HybridController, References, Regime};
use crate::error::SimError;
use crate::phantom::PhantomModel;
use crate::robot_sim::{RobotState, Simulator};
use crate::stiffness::{ExcitationParams, LiveMap, PalpationEstimator, StiffnessMap, StiffnessSample};

use super::config::RunConfig;

/// One logged control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TickRecord {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub pdx: f64,
    pub pdy: f64,
    pub pdz: f64,
    pub fcx: f64,
    pub fcy: f64,
    pub fcz: f64,
    pub fdz: f64,
    pub in_contact: bool,
    pub hybrid: bool,
    pub excite: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TickOutcome {
    pub sample: Option<StiffnessSample>,
    pub map_refreshed: bool,
}

#[derive(Debug)]
pub struct Rig {
    pub sim: Simulator,
    pub ctrl: HybridController,
    pub excitation: ExcitationParams,
    pub estimator: PalpationEstimator,
    pub map: Option<LiveMap>,
    excite_since: Option<f64>,
    map_every: u64,
    last: Option<ControlOutput>,
    last_refs: References,
    last_fd: f64,
}

impl Rig {
    /// Builds the stack with the probe at rest at `start`. A live map covering
    /// the phantom's fixture box is attached when `with_map` is set.
    pub fn new(
        phantom: Arc<PhantomModel>,
        cfg: &RunConfig,
        start: Point3<f64>,
        seed: u64,
        with_map: bool,
    ) -> Result<Self, SimError> {
        let map = with_map.then(|| {
            let grid = StiffnessMap::covering(&phantom.fixture_box, cfg.map.step, cfg.map.lambda);
            LiveMap::new(grid, cfg.map.support_radius)
        });
        let sim = Simulator::new(phantom, cfg.plant.clone(), start, ChaCha8Rng::seed_from_u64(seed))?;
        let map_every = ((cfg.plant.step_rate / cfg.map.update_rate).round() as u64).max(1);
        Ok(Self {
            sim,
            ctrl: HybridController::new(cfg.controller.clone(), cfg.plant.clone()),
            excitation: cfg.excitation,
            estimator: PalpationEstimator::new(cfg.estimator),
            map,
            excite_since: None,
            map_every,
            last: None,
            last_refs: References::hold_at(start),
            last_fd: 0.0,
        })
    }

    pub fn state(&self) -> &RobotState {
        self.sim.state()
    }

    pub fn time(&self) -> f64 {
        self.sim.time()
    }

    pub fn dt(&self) -> f64 {
        self.sim.plant.dt()
    }

    pub fn phantom(&self) -> &PhantomModel {
        &self.sim.phantom
    }

    pub fn regime(&self) -> Regime {
        self.ctrl.regime()
    }

    pub fn is_exciting(&self) -> bool {
        self.excite_since.is_some()
    }

    pub fn last_control(&self) -> Option<&ControlOutput> {
        self.last.as_ref()
    }

    /// Advances one tick. While `excite` is set the normal force follows the
    /// excitation along z and the estimator is fed; clearing it drops the
    /// estimator's history.
    pub fn tick(&mut self, refs: References, excite: bool) -> Result<TickOutcome, SimError> {
        let now = self.sim.time();
        let mut refs = refs;
        match (excite, self.excite_since) {
            (true, None) => self.excite_since = Some(now),
            (false, Some(_)) => {
                self.excite_since = None;
                self.estimator.reset();
            }
            _ => {}
        }
        if let Some(t0) = self.excite_since {
            refs.f_d = Some(Vector3::new(0.0, 0.0, self.excitation.command(now - t0)));
        }
        self.last_fd = refs.f_d.map_or(self.ctrl.cfg.f_hold, |f| f.z);
        let out = self.ctrl.step(self.sim.state(), &refs);
        self.last = Some(out);
        self.last_refs = refs;
        let s = *self.sim.step(&out.tau)?;

        let mut outcome = TickOutcome::default();
        if self.excite_since.is_some() {
            outcome.sample = self.estimator.push(self.sim.time(), s.p, s.f_c, s.in_contact);
            if let (Some(sample), Some(map)) = (outcome.sample, self.map.as_mut()) {
                map.add(sample);
            }
        }
        if self.sim.ticks().is_multiple_of(self.map_every) {
            if let Some(map) = self.map.as_mut() {
                outcome.map_refreshed = map.refresh();
            }
        }
        Ok(outcome)
    }

    pub fn record(&self) -> TickRecord {
        let s = self.sim.state();
        TickRecord {
            t: self.sim.time(),
            px: s.p.x,
            py: s.p.y,
            pz: s.p.z,
            pdx: self.last_refs.p_d.x,
            pdy: self.last_refs.p_d.y,
            pdz: self.last_refs.p_d.z,
            fcx: s.f_c.x,
            fcy: s.f_c.y,
            fcz: s.f_c.z,
            fdz: self.last_fd,
            in_contact: s.in_contact,
            hybrid: self.ctrl.regime() == Regime::Hybrid,
            excite: self.excite_since.is_some(),
        }
    }
}
