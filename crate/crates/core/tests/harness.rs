//! Trial harness: records, artifacts, determinism and the user-model trends.

use std::sync::Arc;

use palpation_core::harness::{
    load_run_dir, run_batch, run_mode, summarize, trial_seed, ExperimentRecord, RunConfig, Strategy, UserModel,
    VirtualUser,
};
use palpation_core::phantom::default_neck;

fn user(mode: u8, model: UserModel, seed: u64) -> VirtualUser {
    VirtualUser {
        model,
        strategy: Strategy::for_mode(mode).unwrap(),
        seed,
    }
}

fn mean_error(mode: u8, sigma: f64, trials: usize) -> f64 {
    let cfg = RunConfig::default();
    let model = UserModel {
        perception_noise_sigma: sigma,
        ..cfg.user.clone()
    };
    let phantom = Arc::new(default_neck());
    let errs: Vec<f64> = (0..trials)
        .map(|k| run_mode(mode, phantom.clone(), &user(mode, model.clone(), trial_seed(77, k)), &cfg, k).unwrap().0.error_norm)
        .collect();
    errs.iter().sum::<f64>() / trials as f64
}

#[test]
fn same_seed_gives_identical_records() {
    let cfg = RunConfig::default();
    let phantom = Arc::new(default_neck());
    for mode in 1..=4 {
        let u = user(mode, cfg.user.clone(), 99);
        let (a, art_a) = run_mode(mode, phantom.clone(), &u, &cfg, 0).unwrap();
        let (b, art_b) = run_mode(mode, phantom.clone(), &u, &cfg, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(art_a.ticks, art_b.ticks);
        assert_eq!(a.error_norm.to_bits(), b.error_norm.to_bits());
    }
}

#[test]
fn records_survive_the_csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    let phantom = Arc::new(default_neck());
    let mut written = Vec::new();
    for mode in [1, 2, 4] {
        written.extend(run_batch(mode, phantom.clone(), &cfg, 3, 5, Some(dir.path())).unwrap());
    }
    let read = load_run_dir(dir.path()).unwrap();
    assert_eq!(read, written);
    for r in &read {
        assert_eq!(r.error_norm, r.recomputed_error_norm());
        let log = dir.path().join(r.log_path.as_ref().unwrap());
        assert!(log.exists(), "{}", log.display());
    }
    assert!(dir.path().join("trials/mode4_trial0_profile.csv").exists());
    assert!(dir.path().join("run_config.toml").exists());
    RunConfig::load(dir.path().join("run_config.toml")).unwrap();
}

/// Mean and sample deviation recomputed from the raw text of the CSV.
#[test]
fn summary_matches_recomputation_from_raw_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.harness.log_decimation = 0;
    let phantom = Arc::new(default_neck());
    run_batch(2, phantom, &cfg, 30, 11, Some(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("records_mode2.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (ie, it) = (col("error_norm"), col("completion_time"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            vec![f[ie].parse().unwrap(), f[it].parse().unwrap()]
        })
        .collect();
    assert_eq!(rows.len(), 30);
    let stats = |j: usize| {
        let n = rows.len() as f64;
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let sd = (rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (m, sd)
    };
    let s = &summarize(&load_run_dir(dir.path()).unwrap()).unwrap()[0];
    let (me, se) = stats(0);
    let (mt, st) = stats(1);
    assert!((s.mean_error - me).abs() < 1e-9 && (s.sd_error - se).abs() < 1e-9);
    assert!((s.mean_time - mt).abs() < 1e-9 && (s.sd_time - st).abs() < 1e-9);
}

#[test]
fn map_guided_beats_visual_only_at_one_millimetre() {
    let m3 = mean_error(3, 1.0, 10);
    let m1 = mean_error(1, 1.0, 10);
    assert!(m3 < m1, "mode 3 {m3:.2} vs mode 1 {m1:.2}");
}

#[test]
fn visual_only_error_band_at_five_millimetres() {
    let m1 = mean_error(1, 5.0, 30);
    assert!((3.0..=9.0).contains(&m1), "mode 1 mean {m1:.2}");
}

#[test]
fn timeout_flags_the_record_incomplete() {
    let mut cfg = RunConfig::default();
    cfg.harness.timeout_s = 5.0;
    let phantom = Arc::new(default_neck());
    let (r, _): (ExperimentRecord, _) = run_mode(3, phantom, &user(3, cfg.user.clone(), 1), &cfg, 0).unwrap();
    assert!(!r.complete);
    assert!(r.completion_time <= 5.0 + 1e-3);
    assert_eq!(r.error_norm, r.recomputed_error_norm());
}

#[test]
fn mode_and_strategy_must_agree() {
    let cfg = RunConfig::default();
    let phantom = Arc::new(default_neck());
    assert!(run_mode(2, phantom.clone(), &user(1, cfg.user.clone(), 1), &cfg, 0).is_err());
    assert!(run_mode(5, phantom, &user(1, cfg.user.clone(), 1), &cfg, 0).is_err());
}

#[test]
fn shipped_config_file_is_the_default() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    assert_eq!(RunConfig::load(path).unwrap(), RunConfig::default());
    let partial = RunConfig::from_toml_str("[scan]\nspeed = 8.0\n").unwrap();
    assert_eq!(partial.scan.speed, 8.0);
    assert_eq!(partial.controller, RunConfig::default().controller);
    assert!(RunConfig::from_toml_str("[scan]\nsped = 8.0\n").is_err());
    assert!(RunConfig::from_toml_str("[user]\nclearance = 4.0\n").is_err());
}
