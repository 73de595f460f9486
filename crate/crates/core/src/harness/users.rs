//! Scripted stand-ins for human operators.
//!
//! A user works in slave space: each [`Action`] moves a desired probe target,
//! and a [`Hand`] turns that target into master motion through the clutch and
//! the teleoperation scale, recentering the master when it would leave its
//! reach. Perception is modelled as Gaussian noise on what the user reads off
//! the scene, the haptic channel, or the live map.

use nalgebra::{Point2, Point3, Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::teleop::MasterState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    VisualOnly,
    ForceGuided,
    MapGuided,
    Mode4Initializer,
}

impl Strategy {
    pub fn for_mode(mode: u8) -> Option<Self> {
        match mode {
            1 => Some(Self::VisualOnly),
            2 => Some(Self::ForceGuided),
            3 => Some(Self::MapGuided),
            4 => Some(Self::Mode4Initializer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserModel {
    /// Error in reading a landmark position off the scene view, per axis, mm.
    pub perception_noise_sigma: f64,
    /// Idle time before the first action, s.
    pub reaction_delay: f64,
    /// Spread of the anatomical prior "membrane sits this far below the
    /// prominence", sagittal axis, mm.
    pub prior_sigma: f64,
    /// Log-normal spread of perceived stiffness from the haptic channel.
    pub haptic_log_sigma: f64,
    /// Perceived stiffness below which a poke is taken as soft, N/mm.
    pub soft_threshold: f64,
    pub poke_spacing: f64,
    pub poke_rings: usize,
    pub refine_spacing: f64,
    /// Half-width of the square raster patch, mm.
    pub raster_half_width: f64,
    pub raster_line_spacing: f64,
    /// mm/s.
    pub raster_speed: f64,
    /// Error in reading a location off the stiffness map, per axis, mm.
    pub map_read_sigma: f64,
    /// Height kept above the surface when travelling, mm.
    pub clearance: f64,
    /// Target depth below the probe while in contact, mm.
    pub press_depth: f64,
    /// mm/s.
    pub descend_speed: f64,
    /// Free-space travel speed of the target, mm/s.
    pub travel_speed: f64,
    /// In-contact travel speed outside the raster, mm/s.
    pub slide_speed: f64,
    /// Master speed limit, mm/s.
    pub master_speed: f64,
    /// Master reach from its home position before the clutch is used, mm.
    pub master_reach: f64,
}

impl Default for UserModel {
    fn default() -> Self {
        Self {
            perception_noise_sigma: 2.0,
            reaction_delay: 0.3,
            prior_sigma: 3.0,
            haptic_log_sigma: 0.25,
            soft_threshold: 1.2,
            poke_spacing: 5.0,
            poke_rings: 3,
            refine_spacing: 2.5,
            raster_half_width: 12.0,
            raster_line_spacing: 3.0,
            raster_speed: 5.0,
            map_read_sigma: 0.5,
            clearance: 6.0,
            press_depth: 2.0,
            descend_speed: 10.0,
            travel_speed: 25.0,
            slide_speed: 8.0,
            master_speed: 80.0,
            master_reach: 60.0,
        }
    }
}

impl UserModel {
    pub fn validate(&self) -> Result<(), String> {
        let non_negative = [
            self.perception_noise_sigma,
            self.reaction_delay,
            self.prior_sigma,
            self.haptic_log_sigma,
            self.map_read_sigma,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0)) {
            return Err("user noise terms and reaction delay must be non-negative".into());
        }
        let positive = [
            self.poke_spacing,
            self.refine_spacing,
            self.raster_half_width,
            self.raster_line_spacing,
            self.raster_speed,
            self.clearance,
            self.descend_speed,
            self.travel_speed,
            self.slide_speed,
            self.master_speed,
            self.master_reach,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err("user speeds and distances must be positive".into());
        }
        if self.clearance <= 5.0 {
            return Err("clearance must exceed the controller's 5 mm retract distance".into());
        }
        Ok(())
    }

    pub fn gaussian(&self, rng: &mut impl Rng, sigma: f64) -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("sigma validated").sample(rng)
        } else {
            0.0
        }
    }

    /// Perceived x/y of a point, per-axis noise `sigma`.
    pub fn perceive(&self, rng: &mut impl Rng, p: Point2<f64>, sigma: f64) -> Point2<f64> {
        Point2::new(p.x + self.gaussian(rng, sigma), p.y + self.gaussian(rng, sigma))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualUser {
    pub model: UserModel,
    pub strategy: Strategy,
    pub seed: u64,
}

/// What a user can ask of the probe, in slave coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Wait(f64),
    /// Raise to `clearance` above the surface, breaking contact.
    Lift,
    /// Free-space travel to `clearance` above `(x, y)`.
    Hover(Point2<f64>),
    /// Lower until contact, then hold until the force settles. Produces a [`PokeReading`].
    Descend,
    /// In-contact travel to `(x, y)` at the given speed.
    Slide(Point2<f64>, f64),
    Excite(bool),
}

/// Haptic observation of one descent: onset of contact and the settled hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PokeReading {
    pub xy: Point2<f64>,
    pub z_onset: f64,
    pub f_onset: f64,
    pub z_hold: f64,
    pub f_hold: f64,
}

impl PokeReading {
    /// Force change over depth change between onset and hold, N/mm.
    pub fn stiffness(&self) -> f64 {
        (self.f_hold - self.f_onset) / (self.z_onset - self.z_hold).max(1e-3)
    }
}

/// Moves the master so the teleoperated reference follows a slave target.
#[derive(Debug, Clone)]
pub struct Hand {
    pub home: Point3<f64>,
    pub pos: Point3<f64>,
    pub clutch: bool,
    recentering: bool,
    pub clutch_cycles: usize,
}

impl Hand {
    pub fn new(home: Point3<f64>) -> Self {
        Self {
            home,
            pos: home,
            clutch: false,
            recentering: false,
            clutch_cycles: 0,
        }
    }

    fn approach(&mut self, goal: Point3<f64>, speed: f64, dt: f64) -> bool {
        let d = goal - self.pos;
        let step = speed * dt;
        if d.norm() <= step {
            self.pos = goal;
            true
        } else {
            self.pos += d.normalize() * step;
            false
        }
    }

    /// Advances the hand one tick towards making the reference equal `target`.
    pub fn drive(&mut self, ms: &MasterState, scale: f64, target: &Point3<f64>, model: &UserModel, dt: f64) {
        if self.recentering {
            if self.approach(self.home, model.master_speed, dt) {
                self.recentering = false;
                self.clutch = true;
            }
            return;
        }
        if !self.clutch {
            self.clutch = true;
            return;
        }
        let goal = ms.anchor_master + (target - ms.anchor_slave) / scale;
        let offset = goal - self.home;
        if offset.norm() <= model.master_reach {
            self.approach(goal, model.master_speed, dt);
            return;
        }
        // travel to the edge of the reach, then declutch and return home
        let edge = self.home + offset.normalize() * model.master_reach;
        if self.approach(edge, model.master_speed, dt) {
            self.clutch = false;
            self.recentering = true;
            self.clutch_cycles += 1;
        }
    }
}

/// Square spiral of poke sites around `c`: the center, then rings of 8r points.
pub fn spiral(c: Point2<f64>, spacing: f64, rings: usize) -> Vec<Point2<f64>> {
    let mut pts = vec![c];
    for r in 1..=rings as i64 {
        for i in -r..=r {
            for j in -r..=r {
                if i.abs().max(j.abs()) == r {
                    pts.push(c + Vector2::new(i as f64, j as f64) * spacing);
                }
            }
        }
    }
    pts
}

/// Boustrophedon raster over a square patch, lines along x, stepping in y.
pub fn raster(c: Point2<f64>, half: f64, spacing: f64) -> Vec<Point2<f64>> {
    let lines = (2.0 * half / spacing).floor() as usize + 1;
    let mut pts = Vec::with_capacity(2 * lines);
    for j in 0..lines {
        let y = c.y - half + j as f64 * spacing;
        let (a, b) = (c.x - half, c.x + half);
        if j % 2 == 0 {
            pts.push(Point2::new(a, y));
            pts.push(Point2::new(b, y));
        } else {
            pts.push(Point2::new(b, y));
            pts.push(Point2::new(a, y));
        }
    }
    pts
}

/// Force component along the surface normal, for settling checks.
pub fn normal_force(f_c: &Vector3<f64>, n_hat: &Vector3<f64>) -> f64 {
    f_c.dot(n_hat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiral_and_raster_shapes() {
        let s = spiral(Point2::new(0.0, 0.0), 5.0, 2);
        assert_eq!(s.len(), 1 + 8 + 16);
        assert!(s.iter().all(|p| p.x.abs() <= 10.0 && p.y.abs() <= 10.0));
        let r = raster(Point2::new(0.0, 50.0), 12.0, 3.0);
        assert_eq!(r.len(), 18);
        assert_eq!(r[0], Point2::new(-12.0, 38.0));
        assert_eq!(r[3], Point2::new(-12.0, 41.0));
    }

    #[test]
    fn poke_reading_slope() {
        let r = PokeReading {
            xy: Point2::origin(),
            z_onset: 30.0,
            f_onset: 0.5,
            z_hold: 29.0,
            f_hold: 1.35,
        };
        assert!((r.stiffness() - 0.85).abs() < 1e-12);
    }

    #[test]
    fn hand_recenters_through_clutch() {
        let model = UserModel {
            master_reach: 10.0,
            ..UserModel::default()
        };
        let mut t = crate::teleop::Teleoperator::new(
            crate::teleop::TeleopConfig::default(),
            None,
            Point3::origin(),
            Point3::new(0.0, 0.0, 50.0),
        );
        let mut hand = Hand::new(Point3::origin());
        let target = Point3::new(30.0, 0.0, 50.0);
        let mut prev = t.reference();
        for _ in 0..20000 {
            hand.drive(t.master(), 0.8, &target, &model, 1e-3);
            let p = t.update(hand.pos, hand.clutch, &Vector3::zeros(), false, 1e-3).p_d;
            assert!((p - prev).norm() < 0.1);
            prev = p;
        }
        assert!((prev - target).norm() < 1e-9);
        assert!(hand.clutch_cycles >= 3);
    }
}
