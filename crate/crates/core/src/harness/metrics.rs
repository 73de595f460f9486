//! Evaluation metrics: containment within a membrane-sized region, Welch's
//! t-test and per-mode summary statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::StatsError;

use super::trial::ExperimentRecord;

/// Region centered on the ground truth, width along x (lateral) and height
/// along y (superior-inferior).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    #[default]
    Ellipse,
    Rectangle,
}

pub fn contains(error_xy: [f64; 2], width: f64, height: f64, geometry: Containment) -> bool {
    let (u, v) = (error_xy[0] / (width / 2.0), error_xy[1] / (height / 2.0));
    match geometry {
        Containment::Ellipse => u * u + v * v <= 1.0,
        Containment::Rectangle => u.abs() <= 1.0 && v.abs() <= 1.0,
    }
}

/// Percentage of records whose x/y error falls inside the region.
pub fn membrane_containment(
    records: &[ExperimentRecord],
    width: f64,
    height: f64,
    geometry: Containment,
) -> Result<f64, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(width > 0.0 && height > 0.0) {
        return Err(StatsError::InvalidSize);
    }
    let inside = records
        .iter()
        .filter(|r| {
            let e = r.error();
            contains([e[0], e[1]], width, height, geometry)
        })
        .count();
    Ok(100.0 * inside as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    pub p: f64,
    pub significant: bool,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with `n − 1` in the denominator; zero for a single value.
pub fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Two-sided Welch (unequal-variance) t-test.
pub fn two_sided_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewSamples(a.len(), b.len()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    if va + vb == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        df,
        p,
        significant: p < alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: u8,
    pub n: usize,
    pub incomplete: usize,
    pub mean_error: f64,
    pub sd_error: f64,
    pub mean_time: f64,
    pub sd_time: f64,
}

/// Mean and sample standard deviation of error and time, per mode, ascending.
pub fn summarize(records: &[ExperimentRecord]) -> Result<Vec<ModeSummary>, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut modes: Vec<u8> = records.iter().map(|r| r.mode).collect();
    modes.sort_unstable();
    modes.dedup();
    Ok(modes
        .into_iter()
        .map(|mode| {
            let rs: Vec<&ExperimentRecord> = records.iter().filter(|r| r.mode == mode).collect();
            let errs: Vec<f64> = rs.iter().map(|r| r.error_norm).collect();
            let times: Vec<f64> = rs.iter().map(|r| r.completion_time).collect();
            ModeSummary {
                mode,
                n: rs.len(),
                incomplete: rs.iter().filter(|r| !r.complete).count(),
                mean_error: mean(&errs),
                sd_error: sample_variance(&errs).sqrt(),
                mean_time: mean(&times),
                sd_time: sample_variance(&times).sqrt(),
            }
        })
        .collect())
}

/// Error norms of the records of one mode.
pub fn errors_of(records: &[ExperimentRecord], mode: u8) -> Vec<f64> {
    records.iter().filter(|r| r.mode == mode).map(|r| r.error_norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(mode: u8, ex: f64, ey: f64, time: f64) -> ExperimentRecord {
        let mut r = ExperimentRecord {
            mode,
            trial: 0,
            seed: 0,
            estimate: [ex, 55.0 + ey, 30.0],
            ground_truth: [0.0, 55.0, 30.0],
            error_norm: 0.0,
            completion_time: time,
            complete: true,
            log_path: None,
        };
        r.error_norm = r.recomputed_error_norm();
        r
    }

    #[test]
    fn containment_cases() {
        let center = vec![rec(1, 0.0, 0.0, 1.0); 4];
        assert_eq!(membrane_containment(&center, 13.0, 10.0, Containment::Ellipse).unwrap(), 100.0);
        let out = [rec(1, 7.0, 0.0, 1.0)];
        assert_eq!(membrane_containment(&out, 13.0, 10.0, Containment::Ellipse).unwrap(), 0.0);
        // corner point inside the rectangle but outside the ellipse
        let corner = [rec(1, 6.0, 4.5, 1.0)];
        assert_eq!(membrane_containment(&corner, 13.0, 10.0, Containment::Ellipse).unwrap(), 0.0);
        assert_eq!(membrane_containment(&corner, 13.0, 10.0, Containment::Rectangle).unwrap(), 100.0);
        assert_eq!(membrane_containment(&[], 13.0, 10.0, Containment::Ellipse), Err(StatsError::Empty));
        assert_eq!(membrane_containment(&out, 0.0, 10.0, Containment::Ellipse), Err(StatsError::InvalidSize));
    }

    #[test]
    fn t_test_edge_cases() {
        let a: Vec<f64> = (1..=10).map(f64::from).collect();
        let same = two_sided_t_test(&a, &a, 0.05).unwrap();
        assert_eq!(same.t, 0.0);
        assert!((same.p - 1.0).abs() < 1e-12);
        assert!(!same.significant);
        let b: Vec<f64> = a.iter().map(|x| x + 100.0).collect();
        let far = two_sided_t_test(&a, &b, 0.05).unwrap();
        assert!(far.p < 1e-3 && far.significant);
        assert_eq!(two_sided_t_test(&[1.0, 1.0], &[2.0, 2.0], 0.05), Err(StatsError::ZeroVariance));
        assert_eq!(two_sided_t_test(&[1.0], &a, 0.05), Err(StatsError::TooFewSamples(1, 10)));
    }

    #[test]
    fn summary_cases() {
        let one = summarize(&[rec(2, 3.0, 4.0, 10.0)]).unwrap();
        assert_eq!(one[0].mean_error, 5.0);
        assert_eq!(one[0].sd_error, 0.0);
        let two = summarize(&[rec(1, 3.0, 4.0, 10.0), rec(1, 6.0, 8.0, 20.0), rec(3, 0.0, 1.0, 5.0)]).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].mean_error, 7.5);
        assert_eq!(two[0].mean_time, 15.0);
        assert_eq!(two[1].mode, 3);
    }

    proptest! {
        #[test]
        fn male_region_dominates_female(errs in prop::collection::vec((-12.0..12.0f64, -12.0..12.0f64), 1..60)) {
            let rs: Vec<_> = errs.iter().map(|(x, y)| rec(1, *x, *y, 1.0)).collect();
            for g in [Containment::Ellipse, Containment::Rectangle] {
                let male = membrane_containment(&rs, 13.0, 10.0, g).unwrap();
                let female = membrane_containment(&rs, 10.5, 7.5, g).unwrap();
                prop_assert!(male >= female);
            }
        }
    }
}
