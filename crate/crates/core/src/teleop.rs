//! Master-side teleoperation: scaled reference with clutch, relayed force
//! feedback and the forbidden-region virtual fixture.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::phantom::{BoxXY, Bounds};

/// Default master-to-slave motion scale.
pub const DEFAULT_SCALE: f64 = 0.8;
/// Default master-side viscous damping, N·s/mm.
pub const DEFAULT_DAMPING: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterState {
    pub master_pos: Point3<f64>,
    pub clutch_closed: bool,
    pub anchor_master: Point3<f64>,
    pub anchor_slave: Point3<f64>,
}

impl MasterState {
    pub fn new(master_pos: Point3<f64>, slave_ref: Point3<f64>) -> Self {
        Self {
            master_pos,
            clutch_closed: false,
            anchor_master: master_pos,
            anchor_slave: slave_ref,
        }
    }
}

/// Axis-aligned x/y box with wall stiffness in N/mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureBox {
    pub b_min: [f64; 2],
    pub b_max: [f64; 2],
    pub k_wall: f64,
}

impl FixtureBox {
    pub fn new(b_min: [f64; 2], b_max: [f64; 2], k_wall: f64) -> Result<Self, String> {
        if !(b_min[0] < b_max[0] && b_min[1] < b_max[1]) {
            return Err(format!("fixture box needs b_min < b_max per axis, got {b_min:?} / {b_max:?}"));
        }
        if !(k_wall >= 0.0) {
            return Err("fixture wall stiffness must be non-negative".into());
        }
        Ok(Self { b_min, b_max, k_wall })
    }

    pub fn from_phantom_box(b: &BoxXY, k_wall: f64) -> Self {
        Self {
            b_min: [b.x.min(), b.y.min()],
            b_max: [b.x.max(), b.y.max()],
            k_wall,
        }
    }

    pub fn bounds(&self, axis: usize) -> Bounds {
        Bounds([self.b_min[axis], self.b_max[axis]])
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..2).all(|i| p[i] >= self.b_min[i] && p[i] <= self.b_max[i])
    }

    /// Projects `p` into the box in x/y; z is passed through.
    pub fn clamp(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::new(self.bounds(0).clamp(p.x), self.bounds(1).clamp(p.y), p.z)
    }
}

/// `p_d = anchor_slave + scale (master − anchor_master)` while the clutch is
/// closed; `held` is returned unchanged while it is open.
pub fn map_master_to_slave(ms: &MasterState, scale: f64, held: &Point3<f64>) -> Point3<f64> {
    if ms.clutch_closed {
        ms.anchor_slave + (ms.master_pos - ms.anchor_master) * scale
    } else {
        *held
    }
}

/// Force rendered on the master. `damping` is in N·s/mm, `master_vel` in mm/s.
pub fn feedback_force(f_c: &Vector3<f64>, master_vel: &Vector3<f64>, damping: f64, clutch: bool) -> Vector3<f64> {
    if clutch {
        f_c - master_vel * damping
    } else {
        Vector3::zeros()
    }
}

/// Wall force on the commanded point, x and y only. Continuous and zero inside.
pub fn virtual_fixture_force(p_d: &Point3<f64>, b: &FixtureBox) -> Vector3<f64> {
    let mut f = Vector3::zeros();
    for i in 0..2 {
        if p_d[i] > b.b_max[i] {
            f[i] = b.k_wall * (b.b_max[i] - p_d[i]);
        } else if p_d[i] < b.b_min[i] {
            f[i] = b.k_wall * (b.b_min[i] - p_d[i]);
        }
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureMode {
    /// Scripted users: the reference is clamped into the box and the wall
    /// force is only reported.
    #[default]
    Headless,
    /// A hand is on the master: the wall force is rendered and summed with the
    /// relayed contact force.
    Interactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeleopConfig {
    pub scale: f64,
    /// N·s/mm.
    pub damping: f64,
    pub fixture_enabled: bool,
    pub k_wall: f64,
    /// Overrides the phantom's fixture box.
    pub fixture_box: Option<FixtureBox>,
    pub fixture_mode: FixtureMode,
    /// Relay contact force to the master.
    pub force_feedback: bool,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        Self {
            scale: DEFAULT_SCALE,
            damping: DEFAULT_DAMPING,
            fixture_enabled: true,
            k_wall: 1.0,
            fixture_box: None,
            fixture_mode: FixtureMode::Headless,
            force_feedback: true,
        }
    }
}

/// Outputs of one teleoperation update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleopOutput {
    pub p_d: Point3<f64>,
    /// Force rendered on the master (zero while the clutch is open).
    pub master_force: Vector3<f64>,
    /// Wall force computed from the unclamped reference.
    pub fixture_force: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct Teleoperator {
    pub cfg: TeleopConfig,
    pub fixture: Option<FixtureBox>,
    ms: MasterState,
    p_d: Point3<f64>,
    last_master: Point3<f64>,
}

impl Teleoperator {
    pub fn new(cfg: TeleopConfig, fixture: Option<FixtureBox>, master: Point3<f64>, slave_ref: Point3<f64>) -> Self {
        let fixture = cfg.fixture_box.or(fixture).filter(|_| cfg.fixture_enabled);
        Self {
            cfg,
            fixture,
            ms: MasterState::new(master, slave_ref),
            p_d: slave_ref,
            last_master: master,
        }
    }

    pub fn master(&self) -> &MasterState {
        &self.ms
    }

    pub fn reference(&self) -> Point3<f64> {
        self.p_d
    }

    /// Re-anchors the slave side, e.g. after an automated segment moved the robot.
    pub fn reanchor(&mut self, slave_ref: Point3<f64>) {
        self.p_d = slave_ref;
        self.ms.anchor_master = self.ms.master_pos;
        self.ms.anchor_slave = slave_ref;
    }

    /// Advances one tick with a new master pose and clutch state.
    pub fn update(
        &mut self,
        master_pos: Point3<f64>,
        clutch: bool,
        f_c: &Vector3<f64>,
        in_contact: bool,
        dt: f64,
    ) -> TeleopOutput {
        if clutch && !self.ms.clutch_closed {
            self.ms.anchor_master = master_pos;
            self.ms.anchor_slave = self.p_d;
        }
        self.ms.clutch_closed = clutch;
        self.ms.master_pos = master_pos;
        let master_vel = if dt > 0.0 {
            (master_pos - self.last_master) / dt
        } else {
            Vector3::zeros()
        };
        self.last_master = master_pos;

        let raw = map_master_to_slave(&self.ms, self.cfg.scale, &self.p_d);
        let fixture_force = match (&self.fixture, in_contact) {
            (Some(b), true) => virtual_fixture_force(&raw, b),
            _ => Vector3::zeros(),
        };
        self.p_d = match (&self.fixture, self.cfg.fixture_mode, in_contact) {
            (Some(b), FixtureMode::Headless, true) => b.clamp(&raw),
            _ => raw,
        };

        let relayed = if self.cfg.force_feedback { *f_c } else { Vector3::zeros() };
        let mut master_force = feedback_force(&relayed, &master_vel, self.cfg.damping, clutch);
        if clutch && self.cfg.fixture_mode == FixtureMode::Interactive {
            master_force += fixture_force;
        }
        TeleopOutput {
            p_d: self.p_d,
            master_force,
            fixture_force,
        }
    }
}
