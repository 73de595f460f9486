//! Seeded batches of trials and their on-disk artifacts.
//!
//! Layout of an output directory:
//! `records_mode{m}.csv`, `run_config.toml`, and under `trials/` one decimated
//! tick log per trial plus the map snapshot (Mode 3) or scan profile (Mode 4).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::phantom::PhantomModel;

use super::config::RunConfig;
use super::trial::{run_mode, ExperimentRecord, TrialArtifacts};
use super::users::{Strategy, VirtualUser};

/// SplitMix64 finalizer; decorrelates neighbouring trial indices.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` of `mode` in a batch started from `base`. Modes
/// share seeds trial by trial so their users see the same noise budget.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    mix(base ^ mix(trial as u64))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Flat CSV form of [`ExperimentRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordRow {
    mode: u8,
    trial: usize,
    seed: u64,
    est_x: f64,
    est_y: f64,
    est_z: f64,
    gt_x: f64,
    gt_y: f64,
    gt_z: f64,
    error_norm: f64,
    completion_time: f64,
    complete: bool,
    log_path: Option<String>,
}

impl From<&ExperimentRecord> for RecordRow {
    fn from(r: &ExperimentRecord) -> Self {
        Self {
            mode: r.mode,
            trial: r.trial,
            seed: r.seed,
            est_x: r.estimate[0],
            est_y: r.estimate[1],
            est_z: r.estimate[2],
            gt_x: r.ground_truth[0],
            gt_y: r.ground_truth[1],
            gt_z: r.ground_truth[2],
            error_norm: r.error_norm,
            completion_time: r.completion_time,
            complete: r.complete,
            log_path: r.log_path.clone(),
        }
    }
}

impl From<RecordRow> for ExperimentRecord {
    fn from(r: RecordRow) -> Self {
        Self {
            mode: r.mode,
            trial: r.trial,
            seed: r.seed,
            estimate: [r.est_x, r.est_y, r.est_z],
            ground_truth: [r.gt_x, r.gt_y, r.gt_z],
            error_norm: r.error_norm,
            completion_time: r.completion_time,
            complete: r.complete,
            log_path: r.log_path,
        }
    }
}

pub fn write_records(path: &Path, records: &[ExperimentRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(RecordRow::from(r))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>, HarnessError> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize::<RecordRow>()
        .map(|row| Ok(ExperimentRecord::from(row?)))
        .collect()
}

/// All `records*.csv` files of a run directory, sorted by mode then trial.
pub fn load_run_dir(dir: &Path) -> Result<Vec<ExperimentRecord>, HarnessError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("records") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(read_records(&f)?);
    }
    if out.is_empty() {
        return Err(HarnessError::Config(format!("no records found in {}", dir.display())));
    }
    out.sort_by_key(|r| (r.mode, r.trial));
    Ok(out)
}

fn write_artifacts(dir: &Path, rec: &mut ExperimentRecord, art: &TrialArtifacts) -> Result<(), HarnessError> {
    let trials = dir.join("trials");
    fs::create_dir_all(&trials).map_err(io_err(&trials))?;
    let stem = format!("mode{}_trial{}", rec.mode, rec.trial);
    let log = trials.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&log)?;
    for t in &art.ticks {
        w.serialize(t)?;
    }
    w.flush().map_err(io_err(&log))?;
    if let Some(map) = &art.map {
        let p = trials.join(format!("{stem}_map.json"));
        let text = serde_json::to_string(map).expect("snapshot serializes");
        fs::write(&p, text).map_err(io_err(&p))?;
    }
    if let Some(profile) = &art.profile {
        let p = trials.join(format!("{stem}_profile.csv"));
        fs::write(&p, profile.to_csv()).map_err(io_err(&p))?;
    }
    rec.log_path = Some(format!("trials/{stem}.csv"));
    Ok(())
}

/// Runs `trials` seeded trials of `mode`, in parallel. With `out` set, every
/// trial's artifacts and the mode's record file are written there.
pub fn run_batch(
    mode: u8,
    phantom: Arc<PhantomModel>,
    cfg: &RunConfig,
    trials: usize,
    base_seed: u64,
    out: Option<&Path>,
) -> Result<Vec<ExperimentRecord>, HarnessError> {
    cfg.validate()?;
    let strategy = Strategy::for_mode(mode).ok_or_else(|| HarnessError::Config(format!("unknown mode {mode}")))?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let p = dir.join("run_config.toml");
        fs::write(&p, cfg.to_toml()).map_err(io_err(&p))?;
    }
    let records: Vec<ExperimentRecord> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let user = VirtualUser {
                model: cfg.user.clone(),
                strategy,
                seed: trial_seed(base_seed, k),
            };
            let (mut rec, art) = run_mode(mode, phantom.clone(), &user, cfg, k)?;
            if let Some(dir) = out {
                write_artifacts(dir, &mut rec, &art)?;
            }
            Ok(rec)
        })
        .collect::<Result<_, HarnessError>>()?;
    if let Some(dir) = out {
        write_records(&dir.join(format!("records_mode{mode}.csv")), &records)?;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_trial_and_base() {
        let a: Vec<u64> = (0..100).map(|k| trial_seed(7, k)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
    }

    #[test]
    fn record_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ExperimentRecord {
            mode: 2,
            trial: 3,
            seed: u64::MAX,
            estimate: [0.1, 55.3, 28.45],
            ground_truth: [0.0, 55.0, 30.0],
            error_norm: 0.0,
            completion_time: 12.5,
            complete: true,
            log_path: None,
        };
        r.error_norm = r.recomputed_error_norm();
        let p = dir.path().join("records_mode2.csv");
        write_records(&p, &[r.clone()]).unwrap();
        assert_eq!(load_run_dir(dir.path()).unwrap(), vec![r]);
    }
}
