//! Interactive sessions for the operator console.
//!
//! The console drives a virtual master with relative motion commands and
//! receives [`StateFrame`]s. Commands carry a client sequence number; one
//! already seen is acknowledged again without effect, so retransmits never
//! duplicate motion. Only `mode_select` is valid before a session exists.

use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoscan::{locate_minimum, plan_scan_line, Autoscan, ScanPhase};
use crate::controller::{References, Regime};
use crate::error::{ScanError, SimError};
use crate::phantom::PhantomModel;
use crate::stiffness::MapSnapshot;
use crate::teleop::{FixtureBox, Teleoperator};

use super::config::RunConfig;
use super::rig::Rig;
use super::trial::{start_position, ExperimentRecord};

pub const PROTOCOL_VERSION: u32 = 1;
/// Upper bound on the frame rate, Hz.
pub const MAX_FRAME_RATE: f64 = 50.0;
pub const LANDMARKS_REQUIRED: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientCommand {
    /// Relative master motion, mm, with the clutch state during the motion.
    MasterDelta { seq: u64, dx: f64, dy: f64, dz: f64, clutch: bool },
    Clutch { seq: u64, closed: bool },
    RecordLandmark { seq: u64 },
    ModeSelect { seq: u64, mode: u8 },
    StartScan { seq: u64 },
}

impl ClientCommand {
    pub fn seq(&self) -> u64 {
        match *self {
            Self::MasterDelta { seq, .. }
            | Self::Clutch { seq, .. }
            | Self::RecordLandmark { seq }
            | Self::ModeSelect { seq, .. }
            | Self::StartScan { seq } => seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanStatus {
    pub phase: ScanPhase,
    /// Fraction of the line covered, in [0, 1].
    pub progress: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub schema_version: u32,
    /// Frame counter, strictly increasing.
    pub frame: u64,
    /// Simulated time, s.
    pub t: f64,
    pub mode: u8,
    pub probe: [f64; 3],
    /// Environment-on-probe force, N.
    pub contact_force: [f64; 3],
    /// Virtual-fixture force from the unclamped reference, N.
    pub fixture_force: [f64; 3],
    /// Force the master would render, N.
    pub master_force: [f64; 3],
    pub in_contact: bool,
    pub hybrid: bool,
    pub clutch: bool,
    /// Present in Modes 3 and 4 only.
    pub map: Option<MapSnapshot>,
    pub scan: Option<ScanStatus>,
    pub landmarks: Vec<[f64; 3]>,
    pub estimate: Option<[f64; 3]>,
    pub last_ack: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(Box<StateFrame>),
    Ack { seq: u64, duplicate: bool },
    Error { seq: Option<u64>, message: String },
    TrialComplete { record: ExperimentRecord },
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no active session; send mode_select first")]
    NoActiveSession,
    #[error("unknown mode {0}")]
    InvalidMode(u8),
    #[error("malformed command: {0}")]
    BadMessage(String),
    #[error("all {LANDMARKS_REQUIRED} landmarks are already recorded")]
    TooManyLandmarks,
    #[error("start_scan needs Mode 4 and {LANDMARKS_REQUIRED} landmarks (have {0})")]
    NotReadyToScan(usize),
    #[error("the probe is under autoscan control")]
    ScanInProgress,
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One interactive trial.
pub struct Session {
    pub mode: u8,
    rig: Rig,
    teleop: Teleoperator,
    master: Point3<f64>,
    clutch: bool,
    landmarks: Vec<Point3<f64>>,
    scan: Option<Autoscan>,
    estimate: Option<Point3<f64>>,
    fixture_force: Vector3<f64>,
    master_force: Vector3<f64>,
    seed: u64,
    scan_cfg: crate::autoscan::ScanConfig,
    hop_s: f64,
}

impl Session {
    pub fn new(phantom: Arc<PhantomModel>, cfg: &RunConfig, mode: u8, seed: u64) -> Result<Self, SessionError> {
        if !(1..=4).contains(&mode) {
            return Err(SessionError::InvalidMode(mode));
        }
        let start = start_position(&phantom);
        let fixture = FixtureBox::from_phantom_box(&phantom.fixture_box, cfg.teleop.k_wall);
        let mut tcfg = cfg.teleop.clone();
        tcfg.force_feedback = mode >= 2;
        let rig = Rig::new(phantom, cfg, start, seed, mode >= 3)?;
        Ok(Self {
            mode,
            rig,
            teleop: Teleoperator::new(tcfg, Some(fixture), Point3::origin(), start),
            master: Point3::origin(),
            clutch: false,
            landmarks: Vec::new(),
            scan: None,
            estimate: None,
            fixture_force: Vector3::zeros(),
            master_force: Vector3::zeros(),
            seed,
            scan_cfg: cfg.scan,
            hop_s: cfg.estimator.hop as f64 / cfg.plant.step_rate,
        })
    }

    pub fn time(&self) -> f64 {
        self.rig.time()
    }

    pub fn probe(&self) -> Point3<f64> {
        self.rig.state().p
    }

    pub fn scanning(&self) -> bool {
        self.scan.as_ref().is_some_and(|s| !s.is_finished())
    }

    fn record(&self, estimate: Point3<f64>) -> ExperimentRecord {
        let gt = self.rig.phantom().ground_truth().center;
        let mut r = ExperimentRecord {
            mode: self.mode,
            trial: 0,
            seed: self.seed,
            estimate: [estimate.x, estimate.y, estimate.z],
            ground_truth: [gt.x, gt.y, gt.z],
            error_norm: 0.0,
            completion_time: self.rig.time(),
            complete: true,
            log_path: None,
        };
        r.error_norm = r.recomputed_error_norm();
        r
    }

    fn apply(&mut self, cmd: &ClientCommand) -> Result<Option<ExperimentRecord>, SessionError> {
        match *cmd {
            ClientCommand::MasterDelta { dx, dy, dz, clutch, .. } => {
                if self.scanning() {
                    return Err(SessionError::ScanInProgress);
                }
                if clutch && !self.clutch {
                    // engage at the pre-motion pose so the delta itself is relayed
                    let s = *self.rig.state();
                    self.teleop.update(self.master, true, &s.f_c, s.in_contact, 0.0);
                }
                self.master += Vector3::new(dx, dy, dz);
                self.clutch = clutch;
                Ok(None)
            }
            ClientCommand::Clutch { closed, .. } => {
                self.clutch = closed;
                Ok(None)
            }
            ClientCommand::RecordLandmark { .. } => {
                if self.scanning() {
                    return Err(SessionError::ScanInProgress);
                }
                let p = self.probe();
                if self.mode == 4 {
                    if self.landmarks.len() >= LANDMARKS_REQUIRED {
                        return Err(SessionError::TooManyLandmarks);
                    }
                    self.landmarks.push(p);
                    Ok(None)
                } else {
                    self.estimate = Some(p);
                    Ok(Some(self.record(p)))
                }
            }
            ClientCommand::StartScan { .. } => {
                if self.scanning() {
                    return Err(SessionError::ScanInProgress);
                }
                if self.mode != 4 || self.landmarks.len() < LANDMARKS_REQUIRED {
                    return Err(SessionError::NotReadyToScan(self.landmarks.len()));
                }
                let [prom, left, right] = [self.landmarks[0], self.landmarks[1], self.landmarks[2]];
                let plan = plan_scan_line(&left, &right, &prom, self.scan_cfg.speed, self.hop_s)?;
                plan.check_fixture(&FixtureBox::from_phantom_box(&self.rig.phantom().fixture_box, 1.0))?;
                self.scan = Some(Autoscan::new(plan, self.scan_cfg));
                Ok(None)
            }
            ClientCommand::ModeSelect { .. } => unreachable!("handled by the host"),
        }
    }

    /// Advances `ticks` control ticks. Returns the record when an autoscan
    /// finishes during this call.
    pub fn advance(&mut self, ticks: usize) -> Result<Option<ExperimentRecord>, SessionError> {
        let dt = self.rig.dt();
        let mut done = None;
        for _ in 0..ticks {
            if let Some(scan) = self.scan.as_mut().filter(|s| !s.is_finished()) {
                let cmd = scan.step(self.rig.state(), self.rig.time(), dt);
                let out = self.rig.tick(cmd.refs, cmd.excite)?;
                if let Some(s) = out.sample {
                    scan.on_sample(&s);
                }
                if scan.is_finished() {
                    let p = self.rig.state().p;
                    self.teleop.reanchor(p);
                    if let Ok(m) = locate_minimum(scan.profile(), self.scan_cfg.refine) {
                        self.estimate = Some(m.point);
                        done = Some(self.record(m.point));
                    }
                }
                continue;
            }
            let s = *self.rig.state();
            let out = self.teleop.update(self.master, self.clutch, &s.f_c, s.in_contact, dt);
            self.fixture_force = out.fixture_force;
            self.master_force = out.master_force;
            let excite = self.mode == 3 && s.in_contact && self.rig.regime() == Regime::Hybrid;
            self.rig.tick(References::hold_at(out.p_d), excite)?;
        }
        Ok(done)
    }

    pub fn frame(&self, frame: u64, last_ack: Option<u64>) -> StateFrame {
        let s = self.rig.state();
        let v = |v: &Vector3<f64>| [v.x, v.y, v.z];
        StateFrame {
            schema_version: PROTOCOL_VERSION,
            frame,
            t: self.rig.time(),
            mode: self.mode,
            probe: [s.p.x, s.p.y, s.p.z],
            contact_force: v(&s.f_c),
            fixture_force: v(&self.fixture_force),
            master_force: v(&self.master_force),
            in_contact: s.in_contact,
            hybrid: self.rig.regime() == Regime::Hybrid,
            clutch: self.clutch,
            map: self.rig.map.as_ref().map(|m| m.snapshot(Some([s.p.x, s.p.y]))),
            scan: self.scan.as_ref().map(|sc| ScanStatus {
                phase: sc.phase(),
                progress: sc.progress(),
                samples: sc.profile().len(),
            }),
            landmarks: self.landmarks.iter().map(|p| [p.x, p.y, p.z]).collect(),
            estimate: self.estimate.map(|p| [p.x, p.y, p.z]),
            last_ack,
        }
    }
}

/// Owns the current session and the protocol state shared by all clients.
pub struct SessionHost {
    phantom: Arc<PhantomModel>,
    cfg: RunConfig,
    seed: u64,
    session: Option<Session>,
    last_seq: Option<u64>,
    frames: u64,
}

impl SessionHost {
    pub fn new(phantom: Arc<PhantomModel>, cfg: RunConfig, seed: u64) -> Self {
        Self {
            phantom,
            cfg,
            seed,
            session: None,
            last_seq: None,
            frames: 0,
        }
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    /// Applies a command. `Ok(Some(record))` when it completed a trial.
    pub fn handle(&mut self, cmd: &ClientCommand) -> Result<(Option<ExperimentRecord>, bool), SessionError> {
        let seq = cmd.seq();
        if self.last_seq.is_some_and(|s| seq <= s) {
            return Ok((None, true));
        }
        let result = match *cmd {
            ClientCommand::ModeSelect { mode, .. } => {
                self.session = Some(Session::new(self.phantom.clone(), &self.cfg, mode, self.seed)?);
                Ok(None)
            }
            _ => self.session.as_mut().ok_or(SessionError::NoActiveSession)?.apply(cmd),
        }?;
        self.last_seq = Some(seq);
        Ok((result, false))
    }

    /// Parses and applies one text message, producing the replies for the sender.
    pub fn handle_text(&mut self, text: &str) -> Vec<ServerMessage> {
        let cmd: ClientCommand = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => {
                return vec![ServerMessage::Error {
                    seq: None,
                    message: SessionError::BadMessage(e.to_string()).to_string(),
                }]
            }
        };
        let seq = cmd.seq();
        match self.handle(&cmd) {
            Ok((record, duplicate)) => {
                let mut out = vec![ServerMessage::Ack { seq, duplicate }];
                out.extend(record.map(|record| ServerMessage::TrialComplete { record }));
                out
            }
            Err(e) => vec![ServerMessage::Error {
                seq: Some(seq),
                message: e.to_string(),
            }],
        }
    }

    /// Advances the active session, if any.
    pub fn advance(&mut self, ticks: usize) -> Result<Option<ExperimentRecord>, SessionError> {
        match self.session.as_mut() {
            Some(s) => s.advance(ticks),
            None => Ok(None),
        }
    }

    /// Next frame of the active session.
    pub fn frame(&mut self) -> Option<StateFrame> {
        let s = self.session.as_ref()?;
        self.frames += 1;
        Some(s.frame(self.frames, self.last_seq))
    }
}
