//! Line fit through a palpation window and the directional stiffness slope.

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use crate::error::EstimationError;

pub const MIN_WINDOW: usize = 8;
/// RMS spread along the principal axis below which no direction is defined, mm.
pub const MIN_CLOUD_SPREAD: f64 = 0.01;
/// Depth range below which the slope is not trusted, mm.
pub const MIN_DEPTH_SPREAD: f64 = 0.05;

fn mean(points: &[Point3<f64>]) -> Point3<f64> {
    let sum = points.iter().fold(Vector3::zeros(), |s, p| s + p.coords);
    Point3::from(sum / points.len() as f64)
}

/// First principal direction of the cloud and its mean. The direction is
/// signed so that `û·ẑ ≤ 0` (into the tissue).
pub fn fit_motion_direction(positions: &[Point3<f64>]) -> Result<(Vector3<f64>, Point3<f64>), EstimationError> {
    if positions.len() < MIN_WINDOW {
        return Err(EstimationError::TooFewSamples {
            needed: MIN_WINDOW,
            got: positions.len(),
        });
    }
    let mu = mean(positions);
    let mut cov = Matrix3::zeros();
    for p in positions {
        let d = p - mu;
        cov += d * d.transpose();
    }
    cov /= positions.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let spread = eig.eigenvalues[k].max(0.0).sqrt();
    if spread < MIN_CLOUD_SPREAD {
        return Err(EstimationError::DegenerateCloud(spread));
    }
    let mut u = eig.eigenvectors.column(k).normalize();
    if u.z > 0.0 {
        u = -u;
    }
    Ok((u, mu))
}

/// `d_i = (p_i − μ_p)·û`.
pub fn palpation_depths(positions: &[Point3<f64>], u_hat: &Vector3<f64>, mu_p: &Point3<f64>) -> Vec<f64> {
    positions.iter().map(|p| (p - mu_p).dot(u_hat)).collect()
}

/// `w_i = f_i·û`, with `f_i` the force applied to the environment.
pub fn projected_forces(forces: &[Vector3<f64>], u_hat: &Vector3<f64>) -> Vec<f64> {
    forces.iter().map(|f| f.dot(u_hat)).collect()
}

/// Ordinary least-squares `(slope, intercept)` of `w` on `d`.
pub fn fit_line(d: &[f64], w: &[f64]) -> Result<(f64, f64), EstimationError> {
    if d.len() != w.len() {
        return Err(EstimationError::LengthMismatch(d.len(), w.len()));
    }
    if d.len() < MIN_WINDOW {
        return Err(EstimationError::TooFewSamples {
            needed: MIN_WINDOW,
            got: d.len(),
        });
    }
    let (lo, hi) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    if hi - lo <= MIN_DEPTH_SPREAD {
        return Err(EstimationError::InsufficientSpread(hi - lo));
    }
    let n = d.len() as f64;
    let md = d.iter().sum::<f64>() / n;
    let mw = w.iter().sum::<f64>() / n;
    let (sxy, sxx) = d
        .iter()
        .zip(w)
        .fold((0.0, 0.0), |(sxy, sxx), (x, y)| (sxy + (x - md) * (y - mw), sxx + (x - md) * (x - md)));
    let slope = sxy / sxx;
    Ok((slope, mw - slope * md))
}

/// Directional stiffness of one cycle, N/mm.
pub fn estimate_stiffness(depths: &[f64], w: &[f64]) -> Result<f64, EstimationError> {
    fit_line(depths, w).map(|(slope, _)| slope)
}
