//! End-to-end checks of the control and estimation stack on the simulated plant.

use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use palpation_core::controller::References;
use palpation_core::harness::{Rig, RunConfig};
use palpation_core::phantom::{default_neck, uniform_patch};
use palpation_core::stiffness::{update_map, LiveMap, StiffnessMap, StiffnessSample};

#[test]
fn free_motion_step_response() {
    let phantom = Arc::new(default_neck());
    let cfg = RunConfig::default();
    let start = Point3::new(0.0, 30.0, 60.0);
    let mut rig = Rig::new(phantom, &cfg, start, 1, false).unwrap();
    let goal = start + Vector3::new(10.0, 0.0, 0.0);
    let mut peak: f64 = 0.0;
    let mut settled_at = 0.0;
    while rig.time() < 2.0 {
        rig.tick(References::hold_at(goal), false).unwrap();
        let x = rig.state().p.x - start.x;
        peak = peak.max(x);
        if (x - 10.0).abs() > 0.2 {
            settled_at = rig.time();
        }
    }
    let overshoot = (peak - 10.0) / 10.0;
    assert!(overshoot < 0.10, "overshoot {:.1}%", 100.0 * overshoot);
    assert!(settled_at < 0.5, "settled at {settled_at:.3} s");
}

#[test]
fn palpation_on_soft_patch_is_within_ten_percent() {
    let phantom = Arc::new(uniform_patch(0.8, 30.0));
    let mut cfg = RunConfig::default();
    cfg.plant.sensor_noise_sigma = 0.0;
    let mut rig = Rig::new(phantom, &cfg, Point3::new(0.0, 20.0, 33.0), 1, false).unwrap();
    let refs = References::hold_at(Point3::new(0.0, 20.0, 27.0));
    let mut samples = Vec::new();
    let mut contact_at = None;
    while rig.time() < 4.0 {
        let excite = contact_at.is_some_and(|t0| rig.time() > t0 + 0.5);
        let out = rig.tick(refs, excite).unwrap();
        if contact_at.is_none() && rig.state().in_contact {
            contact_at = Some(rig.time());
        }
        samples.extend(out.sample);
    }
    assert!(samples.len() >= 5);
    for s in &samples {
        assert!((s.kappa - 0.8).abs() / 0.8 < 0.10, "kappa {}", s.kappa);
        // sample anchored at the unloaded surface
        assert!((s.surface_point[2] - 30.0).abs() < 0.05, "{:?}", s.surface_point);
    }
}

#[test]
fn map_minimum_falls_in_the_soft_cluster() {
    let phantom = default_neck();
    let map = StiffnessMap::covering(&phantom.fixture_box, 2.0, 1e-2);
    let mut samples = Vec::new();
    let (soft_c, stiff_c) = ([4.0, 52.0], [-10.0, 30.0]);
    for k in 0..40 {
        let a = k as f64 * 0.61;
        let r = 1.0 + (k % 4) as f64;
        for (c, kappa) in [(soft_c, 0.8), (stiff_c, 2.5)] {
            samples.push(StiffnessSample {
                location: [c[0] + r * a.cos(), c[1] + r * a.sin()],
                kappa,
                timestamp: k as f64,
                surface_point: [0.0; 3],
                u_hat: [0.0, 0.0, -1.0],
            });
        }
    }
    // the second-difference penalty extrapolates trends linearly, so the
    // minimum is taken over nodes with data nearby
    let mut live = LiveMap::new(map.clone(), 3.0);
    for s in &samples {
        live.add(*s);
    }
    live.refresh();
    let (x, y, v) = live.argmin_supported().unwrap();
    // within the cluster's footprint: hull radius 4 mm plus the support radius
    assert!((x - soft_c[0]).hypot(y - soft_c[1]) <= 4.0 + 3.0, "argmin ({x}, {y})");
    assert!((v - 0.8).abs() < 0.05, "minimum {v}");
    assert_eq!(live.map().values, update_map(&map, &samples).values);
}
