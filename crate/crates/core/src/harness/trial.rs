//! Headless execution of one localisation trial.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{Point2, Point3, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoscan::{execute_scan, locate_minimum, plan_scan_line, ScanOutcome, ScanProfile};
use crate::controller::References;
use crate::error::HarnessError;
use crate::phantom::PhantomModel;
use crate::stiffness::MapSnapshot;
use crate::teleop::{FixtureBox, Teleoperator};

use super::config::RunConfig;
use super::rig::{Rig, TickRecord};
use super::users::{raster, spiral, Action, Hand, PokeReading, Strategy, UserModel, VirtualUser};

/// Probe start height above the plateau, mm.
const START_HEIGHT: f64 = 20.0;
const SETTLE_BAND: f64 = 0.08;
const SETTLE_DWELL: f64 = 0.15;
const SETTLE_TIMEOUT: f64 = 3.0;
/// Soft nodes farther than this from the map minimum are not part of its blob, mm.
const SOFT_REGION_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub mode: u8,
    pub trial: usize,
    pub seed: u64,
    pub estimate: [f64; 3],
    pub ground_truth: [f64; 3],
    pub error_norm: f64,
    /// Simulated seconds from hand-over to the recorded estimate.
    pub completion_time: f64,
    pub complete: bool,
    pub log_path: Option<String>,
}

impl ExperimentRecord {
    /// Estimate minus ground truth, mm.
    pub fn error(&self) -> [f64; 3] {
        [
            self.estimate[0] - self.ground_truth[0],
            self.estimate[1] - self.ground_truth[1],
            self.estimate[2] - self.ground_truth[2],
        ]
    }

    pub fn recomputed_error_norm(&self) -> f64 {
        let e = self.error();
        (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
    }
}

/// Everything a trial produced besides its record.
#[derive(Debug, Clone, Default)]
pub struct TrialArtifacts {
    pub ticks: Vec<TickRecord>,
    pub profile: Option<ScanProfile>,
    pub map: Option<MapSnapshot>,
    pub landmarks: Vec<[f64; 3]>,
    pub pokes: Vec<PokeReading>,
    pub scan_outcome: Option<ScanOutcome>,
}

#[derive(Debug, Clone, Copy)]
enum Active {
    Wait { until: f64 },
    Lift,
    Hover { goal: Point3<f64> },
    Descend { onset: Option<(f64, f64)>, onset_t: f64, settled_since: Option<f64> },
    Slide { goal: Point2<f64>, speed: f64, reached_at: Option<f64> },
}

/// Drives the rig through the teleoperation chain on behalf of a user.
pub struct Operator {
    pub rig: Rig,
    pub teleop: Teleoperator,
    pub hand: Hand,
    pub model: UserModel,
    target: Point3<f64>,
    excite: bool,
    timeout: f64,
    decimation: usize,
    pub artifacts: TrialArtifacts,
    pub started_at: f64,
}

/// Where the probe waits when control is handed over: above the plateau,
/// 20 mm inferior to the prominence.
pub fn start_position(phantom: &PhantomModel) -> Point3<f64> {
    let lm = phantom.landmarks.prominence();
    let y = lm.y - 20.0;
    Point3::new(lm.x, y, phantom.surface_height(lm.x, y) + START_HEIGHT)
}

fn move_towards(from: Point3<f64>, to: Point3<f64>, step: f64) -> Point3<f64> {
    let d = to - from;
    if d.norm() <= step {
        to
    } else {
        from + d.normalize() * step
    }
}

impl Operator {
    pub fn new(phantom: Arc<PhantomModel>, cfg: &RunConfig, model: UserModel, seed: u64, with_map: bool) -> Result<Self, HarnessError> {
        let start = start_position(&phantom);
        let fixture = FixtureBox::from_phantom_box(&phantom.fixture_box, cfg.teleop.k_wall);
        let rig = Rig::new(phantom, cfg, start, seed, with_map)?;
        let teleop = Teleoperator::new(cfg.teleop.clone(), Some(fixture), Point3::origin(), start);
        Ok(Self {
            rig,
            teleop,
            hand: Hand::new(Point3::origin()),
            model,
            target: start,
            excite: false,
            timeout: cfg.harness.timeout_s,
            decimation: cfg.harness.log_decimation,
            artifacts: TrialArtifacts::default(),
            started_at: 0.0,
        })
    }

    pub fn probe(&self) -> Point3<f64> {
        self.rig.state().p
    }

    pub fn elapsed(&self) -> f64 {
        self.rig.time() - self.started_at
    }

    fn surface(&self, xy: Point2<f64>) -> f64 {
        self.rig.phantom().surface_height(xy.x, xy.y)
    }

    fn log_tick(&mut self) {
        if self.decimation > 0 && self.rig.sim.ticks().is_multiple_of(self.decimation as u64) {
            self.artifacts.ticks.push(self.rig.record());
        }
    }

    fn tick_teleop(&mut self) -> Result<(), HarnessError> {
        let dt = self.rig.dt();
        self.hand.drive(self.teleop.master(), self.teleop.cfg.scale, &self.target, &self.model, dt);
        let s = *self.rig.state();
        let out = self.teleop.update(self.hand.pos, self.hand.clutch, &s.f_c, s.in_contact, dt);
        self.rig.tick(References::hold_at(out.p_d), self.excite)?;
        self.log_tick();
        Ok(())
    }

    fn start(&mut self, a: Action) -> Option<Active> {
        let t = self.rig.time();
        match a {
            Action::Wait(d) => Some(Active::Wait { until: t + d }),
            Action::Lift => Some(Active::Lift),
            Action::Hover(xy) => {
                let z = (self.surface(xy) + self.model.clearance).max(self.target.z);
                Some(Active::Hover {
                    goal: Point3::new(xy.x, xy.y, z),
                })
            }
            Action::Descend => Some(Active::Descend {
                onset: None,
                onset_t: t,
                settled_since: None,
            }),
            Action::Slide(goal, speed) => Some(Active::Slide {
                goal,
                speed,
                reached_at: None,
            }),
            Action::Excite(on) => {
                self.excite = on;
                None
            }
        }
    }

    /// Updates the target for one tick; returns true when the action is complete.
    fn advance(&mut self, a: &mut Active) -> bool {
        let dt = self.rig.dt();
        let t = self.rig.time();
        let s = *self.rig.state();
        match a {
            Active::Wait { until } => t >= *until,
            Active::Lift => {
                let goal_z = self.surface(self.target.xy()) + self.model.clearance;
                if self.target.z < goal_z {
                    self.target.z = (self.target.z.max(s.p.z) + self.model.travel_speed * dt).min(goal_z);
                }
                !s.in_contact && s.p.z >= goal_z - 1.0
            }
            Active::Hover { goal } => {
                self.target = move_towards(self.target, *goal, self.model.travel_speed * dt);
                self.target == *goal && (s.p - *goal).norm() < 0.5
            }
            Active::Descend {
                onset,
                onset_t,
                settled_since,
            } => {
                match onset {
                    None => {
                        if s.in_contact {
                            *onset = Some((s.p.z, s.f_c.norm()));
                            *onset_t = t;
                            self.target.z = s.p.z - self.model.press_depth;
                        } else {
                            self.target.z -= self.model.descend_speed * dt;
                        }
                        false
                    }
                    Some((z0, f0)) => {
                        let f = s.f_c.dot(&self.rig.ctrl.normal());
                        let in_band = s.in_contact && (f - self.rig.ctrl.cfg.f_hold).abs() < SETTLE_BAND;
                        *settled_since = if in_band { settled_since.or(Some(t)) } else { None };
                        let settled = settled_since.is_some_and(|t0| t - t0 >= SETTLE_DWELL);
                        if settled || t - *onset_t > SETTLE_TIMEOUT {
                            let xy = s.p.xy();
                            self.artifacts.pokes.push(PokeReading {
                                xy,
                                z_onset: *z0,
                                f_onset: *f0,
                                z_hold: s.p.z,
                                f_hold: s.f_c.norm(),
                            });
                            true
                        } else {
                            false
                        }
                    }
                }
            }
            Active::Slide { goal, speed, reached_at } => {
                let cur = self.target.xy();
                let d: Vector2<f64> = *goal - cur;
                let step = *speed * dt;
                let next = if d.norm() <= step { *goal } else { cur + d.normalize() * step };
                self.target = Point3::new(next.x, next.y, s.p.z - self.model.press_depth);
                if next == *goal && reached_at.is_none() {
                    *reached_at = Some(t);
                }
                match reached_at {
                    Some(t0) => (s.p.xy() - *goal).norm() < 0.3 || t - *t0 > 1.0,
                    None => false,
                }
            }
        }
    }

    fn perform(&mut self, actions: &[Action]) -> Result<(), HarnessError> {
        let mut queue: VecDeque<Action> = actions.iter().copied().collect();
        while let Some(a) = queue.pop_front() {
            let Some(mut active) = self.start(a) else { continue };
            loop {
                if self.elapsed() > self.timeout {
                    return Err(HarnessError::Timeout);
                }
                let done = self.advance(&mut active);
                self.tick_teleop()?;
                if done {
                    break;
                }
            }
        }
        Ok(())
    }

    fn last_poke(&self) -> PokeReading {
        *self.artifacts.pokes.last().expect("a descent was performed")
    }

    /// Touches the surface at `xy` and returns the resulting reading.
    fn poke(&mut self, xy: Point2<f64>) -> Result<PokeReading, HarnessError> {
        self.perform(&[Action::Lift, Action::Hover(xy), Action::Descend])?;
        Ok(self.last_poke())
    }
}

/// Perceived membrane location from the scene: prominence read with noise,
/// shifted by the anatomical offset with sagittal prior noise.
fn visual_guess(phantom: &PhantomModel, user: &UserModel, rng: &mut ChaCha8Rng) -> Point2<f64> {
    let prom = phantom.landmarks.prominence();
    let truth = phantom.ground_truth().center;
    let seen = user.perceive(rng, prom.xy(), user.perception_noise_sigma);
    let offset = truth.xy() - prom.xy();
    Point2::new(seen.x + offset.x, seen.y + offset.y + user.gaussian(rng, user.prior_sigma))
}

fn mode1(op: &mut Operator, rng: &mut ChaCha8Rng) -> Result<Point3<f64>, HarnessError> {
    let guess = visual_guess(op.rig.phantom(), &op.model, rng);
    op.perform(&[Action::Wait(op.model.reaction_delay), Action::Hover(guess), Action::Descend, Action::Wait(0.2)])?;
    Ok(op.probe())
}

fn mode2(op: &mut Operator, rng: &mut ChaCha8Rng) -> Result<Point3<f64>, HarnessError> {
    let m = op.model.clone();
    let guess = visual_guess(op.rig.phantom(), &m, rng);
    op.perform(&[Action::Wait(m.reaction_delay)])?;
    let felt = |r: &PokeReading, rng: &mut ChaCha8Rng| r.stiffness() * m.gaussian(rng, m.haptic_log_sigma).exp();
    let mut tried: Vec<(Point2<f64>, f64)> = Vec::new();
    let mut found = None;
    for site in spiral(guess, m.poke_spacing, m.poke_rings) {
        let r = op.poke(site)?;
        let k = felt(&r, rng);
        tried.push((site, k));
        if k < m.soft_threshold {
            found = Some(site);
            break;
        }
    }
    if let Some(c) = found {
        for d in [Vector2::x(), -Vector2::x(), Vector2::y(), -Vector2::y()] {
            let site = c + d * m.refine_spacing;
            let r = op.poke(site)?;
            tried.push((site, felt(&r, rng)));
        }
    }
    let best = tried.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("spiral is non-empty").0;
    op.poke(best)?;
    op.perform(&[Action::Wait(0.2)])?;
    Ok(op.probe())
}

fn raster_patch(op: &mut Operator, c: Point2<f64>) -> Result<(), HarnessError> {
    let m = op.model.clone();
    let path = raster(c, m.raster_half_width, m.raster_line_spacing);
    op.perform(&[Action::Lift, Action::Hover(path[0]), Action::Descend, Action::Excite(true)])?;
    let slides: Vec<Action> = path[1..].iter().map(|p| Action::Slide(*p, m.raster_speed)).collect();
    op.perform(&slides)?;
    // let the last window complete
    op.perform(&[Action::Wait(0.6), Action::Excite(false)])?;
    Ok(())
}

fn mode3(op: &mut Operator, rng: &mut ChaCha8Rng) -> Result<Point3<f64>, HarnessError> {
    let m = op.model.clone();
    let guess = visual_guess(op.rig.phantom(), &m, rng);
    op.perform(&[Action::Wait(m.reaction_delay)])?;
    raster_patch(op, guess)?;
    let argmin = |op: &mut Operator| {
        let live = op.rig.map.as_mut().expect("mode 3 runs with a map");
        live.refresh();
        soft_region_center(&live.snapshot(None))
    };
    let mut spot = argmin(op).unwrap_or(guess);
    let border = m.raster_half_width - m.raster_line_spacing;
    if (spot.x - guess.x).abs() > border || (spot.y - guess.y).abs() > border {
        raster_patch(op, spot)?;
        spot = argmin(op).unwrap_or(spot);
    }
    let read = m.perceive(rng, spot, m.map_read_sigma);
    let s = *op.rig.state();
    let mut actions = vec![];
    if !s.in_contact {
        actions.extend([Action::Lift, Action::Hover(read), Action::Descend]);
    }
    actions.extend([Action::Slide(read, m.slide_speed), Action::Wait(0.5)]);
    op.perform(&actions)?;
    Ok(op.probe())
}

/// Where a user looking at the heat map would put the soft spot: the centroid
/// of supported nodes near the lowest one that are softer than halfway
/// between the minimum and the median of the supported values.
pub fn soft_region_center(map: &MapSnapshot) -> Option<Point2<f64>> {
    let dx = (map.x_bounds[1] - map.x_bounds[0]) / (map.nx - 1) as f64;
    let dy = (map.y_bounds[1] - map.y_bounds[0]) / (map.ny - 1) as f64;
    let node = |k: usize| Point2::new(map.x_bounds[0] + (k % map.nx) as f64 * dx, map.y_bounds[0] + (k / map.nx) as f64 * dy);
    let mut vals: Vec<(usize, f64)> = (0..map.values.len())
        .filter(|&k| map.supported[k])
        .map(|k| (k, map.values[k]))
        .collect();
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (k_min, v_min) = vals[0];
    let cut = v_min + 0.5 * (vals[vals.len() / 2].1 - v_min);
    let c = node(k_min);
    let (mut sum, mut n) = (Vector2::zeros(), 0.0);
    for &(k, v) in &vals {
        let p = node(k);
        if v <= cut && (p - c).norm() <= SOFT_REGION_RADIUS {
            sum += p.coords;
            n += 1.0;
        }
    }
    Some(Point2::from(sum / n))
}

/// Landmarks as digitized by touching them: prominence, left, right.
fn digitize(op: &mut Operator, targets: [Point2<f64>; 3]) -> Result<[Point3<f64>; 3], HarnessError> {
    let mut out = [Point3::origin(); 3];
    for (k, xy) in targets.into_iter().enumerate() {
        op.poke(xy)?;
        out[k] = op.probe();
        op.artifacts.landmarks.push([out[k].x, out[k].y, out[k].z]);
    }
    op.perform(&[Action::Lift])?;
    Ok(out)
}

fn mode4(op: &mut Operator, cfg: &RunConfig, rng: &mut ChaCha8Rng, lateral_offset: f64) -> Result<Point3<f64>, HarnessError> {
    let m = op.model.clone();
    let lm = op.rig.phantom().landmarks;
    let shift = Vector2::new(lateral_offset, 0.0);
    let seen = [lm.prominence(), lm.sc_left(), lm.sc_right()]
        .map(|p| m.perceive(rng, p.xy(), m.perception_noise_sigma) + shift);
    op.perform(&[Action::Wait(m.reaction_delay)])?;
    let [prom, left, right] = digitize(op, seen)?;
    let hop_s = cfg.estimator.hop as f64 / cfg.plant.step_rate;
    let plan = plan_scan_line(&left, &right, &prom, cfg.scan.speed, hop_s)?;
    plan.check_fixture(&FixtureBox::from_phantom_box(&op.rig.phantom().fixture_box, 1.0))?;
    let remaining = op.timeout - op.elapsed();
    let decimation = op.decimation;
    let mut ticks = Vec::new();
    let (profile, outcome) = execute_scan(&plan, &cfg.scan, &mut op.rig, remaining, |k, rec| {
        if decimation > 0 && k % decimation as u64 == 0 {
            ticks.push(rec);
        }
    })?;
    op.artifacts.ticks.extend(ticks);
    op.teleop.reanchor(op.rig.state().p);
    op.artifacts.scan_outcome = Some(outcome);
    let est = locate_minimum(&profile, cfg.scan.refine);
    op.artifacts.profile = Some(profile);
    if !outcome.completed {
        return Err(HarnessError::Timeout);
    }
    Ok(est?.point)
}

/// Runs one trial of `mode` with a scripted user.
pub fn run_mode(
    mode: u8,
    phantom: Arc<PhantomModel>,
    user: &VirtualUser,
    cfg: &RunConfig,
    trial: usize,
) -> Result<(ExperimentRecord, TrialArtifacts), HarnessError> {
    run_mode_with_offset(mode, phantom, user, cfg, trial, 0.0)
}

/// As [`run_mode`]; in Mode 4 every digitized landmark is additionally
/// displaced by `lateral_offset` mm along x.
pub fn run_mode_with_offset(
    mode: u8,
    phantom: Arc<PhantomModel>,
    user: &VirtualUser,
    cfg: &RunConfig,
    trial: usize,
    lateral_offset: f64,
) -> Result<(ExperimentRecord, TrialArtifacts), HarnessError> {
    let strategy = Strategy::for_mode(mode).ok_or_else(|| HarnessError::Config(format!("unknown mode {mode}")))?;
    if strategy != user.strategy {
        return Err(HarnessError::Config(format!(
            "mode {mode} expects a {strategy:?} user, got {:?}",
            user.strategy
        )));
    }
    let ground_truth = phantom.ground_truth().center;
    let mut cfg = cfg.clone();
    cfg.teleop.force_feedback = mode >= 2;
    let mut op = Operator::new(phantom, &cfg, user.model.clone(), user.seed, mode == 3)?;
    // user-side randomness is independent of the sensor-noise stream
    let mut rng = ChaCha8Rng::seed_from_u64(user.seed ^ 0x5eed_0f05_e700);
    let result = match mode {
        1 => mode1(&mut op, &mut rng),
        2 => mode2(&mut op, &mut rng),
        3 => mode3(&mut op, &mut rng),
        _ => mode4(&mut op, &cfg, &mut rng, lateral_offset),
    };
    let (estimate, complete) = match result {
        Ok(p) => (p, true),
        Err(HarnessError::Timeout) => (op.probe(), false),
        Err(e) => return Err(e),
    };
    let p = op.rig.state().p;
    if let Some(live) = op.rig.map.as_mut() {
        live.refresh();
        op.artifacts.map = Some(live.snapshot(Some([p.x, p.y])));
    }
    let mut record = ExperimentRecord {
        mode,
        trial,
        seed: user.seed,
        estimate: [estimate.x, estimate.y, estimate.z],
        ground_truth: [ground_truth.x, ground_truth.y, ground_truth.z],
        error_norm: 0.0,
        completion_time: op.elapsed(),
        complete,
        log_path: None,
    };
    record.error_norm = record.recomputed_error_norm();
    Ok((record, op.artifacts))
}
