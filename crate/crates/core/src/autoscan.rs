//! Landmark-initialized line scan.
//!
//! The line runs from the laryngeal prominence to the sternoclavicular
//! midpoint. The scan is a tick-driven state machine that owns the reference
//! while active: approach above the start, descend to contact, settle, then
//! sweep at constant speed with the force excitation on. Contact loss pauses
//! the sweep, re-acquires and resumes from the same arc position.

use nalgebra::{Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::controller::References;
use crate::error::{HarnessError, ScanError};
use crate::harness::rig::{Rig, TickRecord};
use crate::robot_sim::RobotState;
use crate::stiffness::StiffnessSample;
use crate::teleop::FixtureBox;

/// Profiles shorter than this cannot be refined.
pub const MIN_PROFILE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// mm/s.
    pub speed: f64,
    /// Height above the start landmark for the approach, mm.
    pub approach_height: f64,
    /// Reference depth below the last known surface while seeking contact, mm.
    pub press_depth: f64,
    /// Dwell after contact before the sweep starts, s.
    pub settle_time: f64,
    /// Parabolic sub-sample refinement of the minimum; off gives the raw argmin.
    pub refine: bool,
    pub max_reacquisitions: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            speed: 4.0,
            approach_height: 5.0,
            press_depth: 3.0,
            settle_time: 0.25,
            refine: true,
            max_reacquisitions: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub start: Point3<f64>,
    pub end: Point3<f64>,
    /// mm/s.
    pub speed: f64,
    /// Expected arc distance between stiffness samples, mm.
    pub sample_spacing: f64,
}

impl ScanPlan {
    pub fn length_xy(&self) -> f64 {
        (self.end.xy() - self.start.xy()).norm()
    }

    pub fn direction_xy(&self) -> Vector2<f64> {
        (self.end.xy() - self.start.xy()).normalize()
    }

    pub fn point_at(&self, arc: f64) -> Vector2<f64> {
        self.start.xy().coords + self.direction_xy() * arc
    }

    /// Arc coordinate of the orthogonal projection of `(x, y)` on the line.
    pub fn arc_of(&self, x: f64, y: f64) -> f64 {
        (Vector2::new(x, y) - self.start.xy().coords).dot(&self.direction_xy())
    }

    pub fn check_fixture(&self, b: &FixtureBox) -> Result<(), ScanError> {
        for p in [self.start, self.end] {
            if !b.contains(&p) {
                return Err(ScanError::OutsideFixture(p.x, p.y));
            }
        }
        Ok(())
    }
}

/// Line from the prominence to the midpoint of the two sternoclavicular joints.
/// `sample_spacing` follows from the estimator hop: one sample per `hop_s` seconds.
pub fn plan_scan_line(
    sc_left: &Point3<f64>,
    sc_right: &Point3<f64>,
    prominence: &Point3<f64>,
    speed: f64,
    hop_s: f64,
) -> Result<ScanPlan, ScanError> {
    let mid = Point3::from((sc_left.coords + sc_right.coords) / 2.0);
    if (mid.xy() - prominence.xy()).norm() < 1e-6 {
        return Err(ScanError::DegenerateLine);
    }
    Ok(ScanPlan {
        start: *prominence,
        end: mid,
        speed,
        sample_spacing: speed * hop_s,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanProfile {
    /// Strictly increasing, mm.
    pub arc_positions: Vec<f64>,
    /// N/mm.
    pub kappas: Vec<f64>,
    /// Reconstructed surface points, mm.
    pub xy_points: Vec<[f64; 3]>,
}

impl ScanProfile {
    pub fn len(&self) -> usize {
        self.arc_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arc_positions.is_empty()
    }

    /// Inserts keeping arc order; a sample whose arc is not beyond the last one is dropped.
    pub fn push(&mut self, arc: f64, kappa: f64, point: [f64; 3]) -> bool {
        if self.arc_positions.last().is_some_and(|last| arc <= *last) {
            return false;
        }
        self.arc_positions.push(arc);
        self.kappas.push(kappa);
        self.xy_points.push(point);
        true
    }

    /// Linear interpolation of the surface points at `arc`.
    pub fn point_at(&self, arc: f64) -> Point3<f64> {
        let a = &self.arc_positions;
        let k = a.partition_point(|v| *v < arc);
        if k == 0 {
            return Point3::from(self.xy_points[0]);
        }
        if k >= a.len() {
            return Point3::from(self.xy_points[a.len() - 1]);
        }
        let t = (arc - a[k - 1]) / (a[k] - a[k - 1]);
        let (p, q) = (Vector3::from(self.xy_points[k - 1]), Vector3::from(self.xy_points[k]));
        Point3::from(p + (q - p) * t)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("arc_mm,kappa,x,y,z\n");
        for ((a, k), p) in self.arc_positions.iter().zip(&self.kappas).zip(&self.xy_points) {
            out.push_str(&format!("{a},{k},{},{},{}\n", p[0], p[1], p[2]));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimumEstimate {
    pub point: Point3<f64>,
    pub arc: f64,
    pub index: usize,
    /// The lowest sample is the first or last one; the membrane may lie outside the scan.
    pub at_endpoint: bool,
}

/// Vertex abscissa of the parabola through three points, clamped to their span.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let (a, b) = (x[1] - x[0], x[1] - x[2]);
    let (fa, fb) = (y[1] - y[2], y[1] - y[0]);
    let den = a * fa - b * fb;
    if den.abs() < 1e-15 {
        return x[1];
    }
    (x[1] - 0.5 * (a * a * fa - b * b * fb) / den).clamp(x[0], x[2])
}

/// Lowest-stiffness location along the profile.
///
/// Adjacent tied minima resolve to their midpoint. Otherwise, with `refine`,
/// the arc is the vertex of the parabola through the minimum and its two
/// neighbours.
pub fn locate_minimum(profile: &ScanProfile, refine: bool) -> Result<MinimumEstimate, ScanError> {
    let n = profile.len();
    if n < MIN_PROFILE {
        return Err(ScanError::ProfileTooShort(n));
    }
    let k = &profile.kappas;
    let a = &profile.arc_positions;
    let idx = (0..n).min_by(|i, j| k[*i].total_cmp(&k[*j])).expect("non-empty");
    let at_endpoint = idx == 0 || idx == n - 1;
    let tie = (idx + 1 < n && k[idx + 1] == k[idx]).then_some(idx + 1);
    let arc = if let Some(j) = tie {
        0.5 * (a[idx] + a[j])
    } else if refine && !at_endpoint {
        parabola_vertex([a[idx - 1], a[idx], a[idx + 1]], [k[idx - 1], k[idx], k[idx + 1]])
    } else {
        a[idx]
    };
    Ok(MinimumEstimate {
        point: profile.point_at(arc),
        arc,
        index: idx,
        at_endpoint,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPhase {
    Approach,
    Descend,
    Settle,
    Sweep,
    Reacquire,
    Done,
    Aborted,
}

/// Reference and excitation request for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanCommand {
    pub refs: References,
    pub excite: bool,
}

#[derive(Debug, Clone)]
pub struct Autoscan {
    pub plan: ScanPlan,
    pub cfg: ScanConfig,
    phase: ScanPhase,
    arc: f64,
    phase_since: f64,
    last_contact_z: f64,
    reacquisitions: usize,
    profile: ScanProfile,
}

impl Autoscan {
    pub fn new(plan: ScanPlan, cfg: ScanConfig) -> Self {
        Self {
            plan,
            cfg,
            phase: ScanPhase::Approach,
            arc: 0.0,
            phase_since: 0.0,
            last_contact_z: plan.start.z,
            reacquisitions: 0,
            profile: ScanProfile::default(),
        }
    }

    pub fn phase(&self) -> ScanPhase {
        self.phase
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.phase, ScanPhase::Done | ScanPhase::Aborted)
    }

    /// Fraction of the line covered, in [0, 1].
    pub fn progress(&self) -> f64 {
        (self.arc / self.plan.length_xy()).clamp(0.0, 1.0)
    }

    pub fn reacquisitions(&self) -> usize {
        self.reacquisitions
    }

    pub fn profile(&self) -> &ScanProfile {
        &self.profile
    }

    pub fn into_profile(self) -> ScanProfile {
        self.profile
    }

    fn enter(&mut self, phase: ScanPhase, t: f64) {
        self.phase = phase;
        self.phase_since = t;
    }

    fn seek(&self) -> References {
        let xy = self.plan.point_at(self.arc);
        References::hold_at(Point3::new(xy.x, xy.y, self.last_contact_z - self.cfg.press_depth))
    }

    /// Records a sample taken while sweeping.
    pub fn on_sample(&mut self, s: &StiffnessSample) {
        if self.phase == ScanPhase::Sweep {
            let arc = self.plan.arc_of(s.location[0], s.location[1]);
            self.profile.push(arc, s.kappa, s.surface_point);
        }
    }

    pub fn step(&mut self, state: &RobotState, t: f64, dt: f64) -> ScanCommand {
        if state.in_contact {
            self.last_contact_z = state.p.z;
        }
        let hold = References::hold_at(state.p);
        match self.phase {
            ScanPhase::Approach => {
                let target = Point3::new(self.plan.start.x, self.plan.start.y, self.plan.start.z + self.cfg.approach_height);
                if (state.p - target).norm() < 1.0 {
                    self.enter(ScanPhase::Descend, t);
                }
                ScanCommand {
                    refs: References::hold_at(target),
                    excite: false,
                }
            }
            ScanPhase::Descend | ScanPhase::Reacquire => {
                if state.in_contact {
                    self.enter(ScanPhase::Settle, t);
                }
                ScanCommand {
                    refs: self.seek(),
                    excite: false,
                }
            }
            ScanPhase::Settle => {
                if !state.in_contact {
                    self.enter(ScanPhase::Reacquire, t);
                } else if t - self.phase_since >= self.cfg.settle_time {
                    self.enter(ScanPhase::Sweep, t);
                }
                let xy = self.plan.point_at(self.arc);
                ScanCommand {
                    refs: References::hold_at(Point3::new(xy.x, xy.y, state.p.z)),
                    excite: true,
                }
            }
            ScanPhase::Sweep => {
                if !state.in_contact {
                    self.reacquisitions += 1;
                    let next = if self.reacquisitions > self.cfg.max_reacquisitions {
                        ScanPhase::Aborted
                    } else {
                        ScanPhase::Reacquire
                    };
                    self.enter(next, t);
                    return ScanCommand {
                        refs: self.seek(),
                        excite: false,
                    };
                }
                let length = self.plan.length_xy();
                self.arc = (self.arc + self.plan.speed * dt).min(length);
                let xy = self.plan.point_at(self.arc);
                let v = self.plan.direction_xy() * self.plan.speed;
                if self.arc >= length {
                    self.enter(ScanPhase::Done, t);
                }
                ScanCommand {
                    refs: References {
                        p_d: Point3::new(xy.x, xy.y, state.p.z),
                        p_dot_d: Vector3::new(v.x, v.y, 0.0),
                        ..hold
                    },
                    excite: true,
                }
            }
            ScanPhase::Done | ScanPhase::Aborted => ScanCommand { refs: hold, excite: false },
        }
    }
}

/// Summary of an executed scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub final_phase: ScanPhase,
    pub completed: bool,
    pub reacquisitions: usize,
    /// Simulated seconds.
    pub duration: f64,
    pub samples: usize,
}

/// Runs the scan state machine on `rig` until it finishes or `timeout`
/// simulated seconds elapse. `on_tick` sees every tick with its index.
pub fn execute_scan(
    plan: &ScanPlan,
    cfg: &ScanConfig,
    rig: &mut Rig,
    timeout: f64,
    mut on_tick: impl FnMut(u64, TickRecord),
) -> Result<(ScanProfile, ScanOutcome), HarnessError> {
    let mut scan = Autoscan::new(*plan, *cfg);
    let t0 = rig.time();
    let dt = rig.dt();
    let mut k = 0u64;
    while !scan.is_finished() && rig.time() - t0 <= timeout {
        let cmd = scan.step(rig.state(), rig.time(), dt);
        let out = rig.tick(cmd.refs, cmd.excite)?;
        if let Some(s) = out.sample {
            scan.on_sample(&s);
        }
        on_tick(k, rig.record());
        k += 1;
    }
    // hand the probe back at rest, unexcited
    let hold = References::hold_at(rig.state().p);
    rig.tick(hold, false)?;
    let outcome = ScanOutcome {
        final_phase: scan.phase(),
        completed: scan.phase() == ScanPhase::Done,
        reacquisitions: scan.reacquisitions(),
        duration: rig.time() - t0,
        samples: scan.profile().len(),
    };
    Ok((scan.into_profile(), outcome))
}
