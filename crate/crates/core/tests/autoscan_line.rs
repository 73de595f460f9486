//! Line scans executed on the full simulated stack.

use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use palpation_core::autoscan::{execute_scan, locate_minimum, plan_scan_line, ScanConfig, ScanProfile};
use palpation_core::harness::{Rig, RunConfig};
use palpation_core::phantom::{default_neck, uniform_patch, PhantomModel};

fn scan(phantom: PhantomModel, speed: f64, prominence_shift: Vector3<f64>) -> (ScanProfile, Point3<f64>) {
    let phantom = Arc::new(phantom);
    let mut cfg = RunConfig::default();
    cfg.plant.sensor_noise_sigma = 0.0;
    let lm = phantom.landmarks;
    let hop_s = cfg.estimator.hop as f64 / cfg.plant.step_rate;
    let plan = plan_scan_line(&lm.sc_left(), &lm.sc_right(), &(lm.prominence() + prominence_shift), speed, hop_s).unwrap();
    let start = plan.start + Vector3::new(0.0, 0.0, 15.0);
    let mut rig = Rig::new(phantom, &cfg, start, 3, false).unwrap();
    let scan_cfg = ScanConfig { speed, ..cfg.scan };
    let (profile, outcome) = execute_scan(&plan, &scan_cfg, &mut rig, 200.0, |_, _| {}).unwrap();
    assert!(outcome.completed, "{outcome:?}");
    assert_eq!(outcome.reacquisitions, 0);
    let est = locate_minimum(&profile, true).unwrap().point;
    (profile, est)
}

#[test]
fn uniform_strip_gives_flat_profile() {
    let (profile, _) = scan(uniform_patch(2.5, 30.0), 4.0, Vector3::zeros());
    assert!(profile.len() > 50);
    for k in &profile.kappas {
        assert!((k - 2.5).abs() / 2.5 < 0.10, "kappa {k}");
    }
    assert!(profile.arc_positions.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn membrane_basin_shows_as_a_dip() {
    let (profile, est) = scan(default_neck(), 4.0, Vector3::zeros());
    let kmin = profile.kappas.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(kmin < 1.0, "profile minimum {kmin}");
    let gt = default_neck().ground_truth().center;
    assert!((est - gt).norm() <= 2.0, "estimate {est:?} vs {gt:?}");
}

#[test]
fn doubling_speed_halves_samples() {
    let (slow, est_slow) = scan(default_neck(), 4.0, Vector3::zeros());
    let (fast, est_fast) = scan(default_neck(), 8.0, Vector3::zeros());
    let half = slow.len() as f64 / 2.0;
    assert!((fast.len() as f64 - half).abs() <= 1.0, "{} vs {}", fast.len(), slow.len());
    // the faster scan samples every 2 mm
    assert!((est_fast - est_slow).xy().norm() <= 2.0, "{est_fast:?} vs {est_slow:?}");
}

#[test]
fn sagittal_landmark_error_barely_moves_the_estimate() {
    let (_, base) = scan(default_neck(), 4.0, Vector3::zeros());
    for dy in [-3.0, 3.0] {
        let (_, moved) = scan(default_neck(), 4.0, Vector3::new(0.0, dy, 0.0));
        assert!((moved - base).xy().norm() < 1.0, "dy {dy}: {moved:?} vs {base:?}");
    }
}
