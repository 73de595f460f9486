//! Virtual neck phantom: surface height field, stiffness field, anatomical
//! landmark annotations and the digitized membrane border used as ground truth.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::PhantomError;

pub const SCHEMA_VERSION: u32 = 1;

/// Name under which the authored default phantom is bundled.
pub const DEFAULT_NECK: &str = "default_neck";

const DEFAULT_NECK_JSON: &str = include_str!("../data/default_neck.json");

/// Closed interval `[min, max]` in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds(pub [f64; 2]);

impl Bounds {
    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        self.0[1]
    }

    pub fn span(&self) -> f64 {
        self.0[1] - self.0[0]
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.0[0] && v <= self.0[1]
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.0[0], self.0[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub x: Bounds,
    pub y: Bounds,
    pub z: Bounds,
}

impl Workspace {
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        self.x.contains(x) && self.y.contains(y)
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        self.contains_xy(p.x, p.y) && self.z.contains(p.z)
    }

    pub fn clamp(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::new(self.x.clamp(p.x), self.y.clamp(p.y), self.z.clamp(p.z))
    }
}

/// Scalar field sampled on a regular lattice spanning the workspace in x/y.
/// Values are row-major with x varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub nx: usize,
    pub ny: usize,
    pub x: Bounds,
    pub y: Bounds,
    pub values: Vec<f64>,
}

/// Cell lookup result: lower-left node indices and fractional offsets.
#[derive(Debug, Clone, Copy)]
struct Cell {
    i: usize,
    j: usize,
    tx: f64,
    ty: f64,
}

impl ScalarGrid {
    pub fn dx(&self) -> f64 {
        self.x.span() / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.y.span() / (self.ny - 1) as f64
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x.min() + i as f64 * self.dx(),
            self.y.min() + j as f64 * self.dy(),
        )
    }

    fn cell(&self, x: f64, y: f64) -> Cell {
        let fx = ((x - self.x.min()) / self.dx()).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.y.min()) / self.dy()).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        Cell {
            i,
            j,
            tx: fx - i as f64,
            ty: fy - j as f64,
        }
    }

    /// Bilinear interpolation; coordinates outside the lattice are clamped to its edge.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let c = self.cell(x, y);
        let v00 = self.at(c.i, c.j);
        let v10 = self.at(c.i + 1, c.j);
        let v01 = self.at(c.i, c.j + 1);
        let v11 = self.at(c.i + 1, c.j + 1);
        (1.0 - c.ty) * ((1.0 - c.tx) * v00 + c.tx * v10) + c.ty * ((1.0 - c.tx) * v01 + c.tx * v11)
    }

    /// Gradient (d/dx, d/dy) of the bilinear interpolant inside the containing cell.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let c = self.cell(x, y);
        let v00 = self.at(c.i, c.j);
        let v10 = self.at(c.i + 1, c.j);
        let v01 = self.at(c.i, c.j + 1);
        let v11 = self.at(c.i + 1, c.j + 1);
        let gx = ((1.0 - c.ty) * (v10 - v00) + c.ty * (v11 - v01)) / self.dx();
        let gy = ((1.0 - c.tx) * (v01 - v00) + c.tx * (v11 - v10)) / self.dy();
        (gx, gy)
    }

    fn from_fn(nx: usize, ny: usize, x: Bounds, y: Bounds, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut grid = ScalarGrid {
            nx,
            ny,
            x,
            y,
            values: Vec::with_capacity(nx * ny),
        };
        for j in 0..ny {
            for i in 0..nx {
                let (px, py) = grid.node(i, j);
                grid.values.push(f(px, py));
            }
        }
        grid
    }
}

/// Named anatomical landmarks in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Landmarks {
    pub laryngeal_prominence: [f64; 3],
    pub sternoclavicular_left: [f64; 3],
    pub sternoclavicular_right: [f64; 3],
}

impl Landmarks {
    pub fn prominence(&self) -> Point3<f64> {
        Point3::from(self.laryngeal_prominence)
    }

    pub fn sc_left(&self) -> Point3<f64> {
        Point3::from(self.sternoclavicular_left)
    }

    pub fn sc_right(&self) -> Point3<f64> {
        Point3::from(self.sternoclavicular_right)
    }

    fn named(&self) -> [(&'static str, [f64; 3]); 3] {
        [
            ("laryngeal_prominence", self.laryngeal_prominence),
            ("sternoclavicular_left", self.sternoclavicular_left),
            ("sternoclavicular_right", self.sternoclavicular_right),
        ]
    }
}

/// Axis-aligned x/y box, in mm, used for the forbidden-region fixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxXY {
    pub x: Bounds,
    pub y: Bounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomModel {
    pub workspace: Workspace,
    pub surface: ScalarGrid,
    pub stiffness: ScalarGrid,
    pub landmarks: Landmarks,
    pub membrane_boundary: Vec<Point3<f64>>,
    /// Region the operator is confined to once in contact.
    pub fixture_box: BoxXY,
}

/// Centroid of the digitized membrane border.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub center: Point3<f64>,
}

// ---- file schema -------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    nx: usize,
    ny: usize,
    #[serde(alias = "heights")]
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhantomDoc {
    schema_version: u32,
    workspace: Workspace,
    surface: GridDoc,
    stiffness: GridDoc,
    landmarks: Landmarks,
    membrane_boundary: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixture_box: Option<BoxXY>,
}

impl PhantomModel {
    /// Parses and validates a phantom document.
    pub fn from_json(text: &str) -> Result<Self, PhantomError> {
        let doc: PhantomDoc = serde_json::from_str(text).map_err(|e| PhantomError::Parse(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(PhantomError::Invariant {
                path: "schema_version".into(),
                reason: format!("unsupported version {} (expected {SCHEMA_VERSION})", doc.schema_version),
            });
        }
        let ws = doc.workspace;
        let surface = grid_from_doc(doc.surface, &ws, "surface")?;
        let stiffness = grid_from_doc(doc.stiffness, &ws, "stiffness")?;
        let fixture_box = doc.fixture_box.unwrap_or(BoxXY { x: ws.x, y: ws.y });
        let model = PhantomModel {
            workspace: ws,
            surface,
            stiffness,
            landmarks: doc.landmarks,
            membrane_boundary: doc.membrane_boundary.into_iter().map(Point3::from).collect(),
            fixture_box,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let doc = PhantomDoc {
            schema_version: SCHEMA_VERSION,
            workspace: self.workspace,
            surface: GridDoc {
                nx: self.surface.nx,
                ny: self.surface.ny,
                values: self.surface.values.clone(),
            },
            stiffness: GridDoc {
                nx: self.stiffness.nx,
                ny: self.stiffness.ny,
                values: self.stiffness.values.clone(),
            },
            landmarks: self.landmarks,
            membrane_boundary: self.membrane_boundary.iter().map(|p| [p.x, p.y, p.z]).collect(),
            fixture_box: Some(self.fixture_box),
        };
        serde_json::to_string(&doc).expect("phantom document serializes")
    }

    /// The authored default phantom shipped with the crate.
    pub fn bundled_default() -> Self {
        Self::from_json(DEFAULT_NECK_JSON).expect("bundled default phantom is valid")
    }

    pub fn validate(&self) -> Result<(), PhantomError> {
        let ws = &self.workspace;
        for (axis, b) in [("x", ws.x), ("y", ws.y), ("z", ws.z)] {
            if !(b.min() < b.max()) {
                return Err(PhantomError::Invariant {
                    path: format!("workspace.{axis}"),
                    reason: "min must be below max".into(),
                });
            }
        }
        for (idx, v) in self.stiffness.values.iter().enumerate() {
            if !v.is_finite() || *v <= 0.0 {
                return Err(PhantomError::Invariant {
                    path: format!("stiffness.values[{idx}]"),
                    reason: format!("stiffness must be positive, got {v}"),
                });
            }
        }
        for (idx, v) in self.surface.values.iter().enumerate() {
            if !v.is_finite() || !ws.z.contains(*v) {
                return Err(PhantomError::Invariant {
                    path: format!("surface.values[{idx}]"),
                    reason: format!("height {v} outside workspace z bounds"),
                });
            }
        }
        for (name, p) in self.landmarks.named() {
            if !ws.contains(&Point3::from(p)) {
                return Err(PhantomError::Invariant {
                    path: format!("landmarks.{name}"),
                    reason: "outside workspace".into(),
                });
            }
        }
        if self.membrane_boundary.is_empty() {
            return Err(PhantomError::Invariant {
                path: "membrane_boundary".into(),
                reason: "must contain at least one point".into(),
            });
        }
        for (idx, p) in self.membrane_boundary.iter().enumerate() {
            if !ws.contains(p) {
                return Err(PhantomError::Invariant {
                    path: format!("membrane_boundary[{idx}]"),
                    reason: "outside workspace".into(),
                });
            }
        }
        let fb = &self.fixture_box;
        if !(fb.x.min() < fb.x.max() && fb.y.min() < fb.y.max()) {
            return Err(PhantomError::Invariant {
                path: "fixture_box".into(),
                reason: "min must be below max".into(),
            });
        }
        Ok(())
    }

    pub fn surface_height(&self, x: f64, y: f64) -> f64 {
        self.surface.interpolate(x, y)
    }

    /// Outward unit normal of the height field at (x, y).
    pub fn surface_normal(&self, x: f64, y: f64) -> Vector3<f64> {
        let (gx, gy) = self.surface.gradient(x, y);
        Vector3::new(-gx, -gy, 1.0).normalize()
    }

    /// Point on the undeformed surface above/below (x, y).
    pub fn surface_point(&self, x: f64, y: f64) -> Point3<f64> {
        Point3::new(x, y, self.surface_height(x, y))
    }

    /// Whether `(x, y)` lies inside the membrane border polygon (even-odd rule).
    pub fn inside_membrane(&self, x: f64, y: f64) -> bool {
        let b = &self.membrane_boundary;
        let mut inside = false;
        for (k, p) in b.iter().enumerate() {
            let q = &b[(k + 1) % b.len()];
            if (p.y > y) != (q.y > y) && x < p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y) {
                inside = !inside;
            }
        }
        inside
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            center: ground_truth_center(self).expect("validated phantom has a boundary"),
        }
    }
}

fn grid_from_doc(doc: GridDoc, ws: &Workspace, field: &str) -> Result<ScalarGrid, PhantomError> {
    if doc.nx < 2 || doc.ny < 2 {
        return Err(PhantomError::Invariant {
            path: format!("{field}.nx"),
            reason: "grid needs at least 2x2 nodes".into(),
        });
    }
    if doc.values.len() != doc.nx * doc.ny {
        return Err(PhantomError::Invariant {
            path: format!("{field}.values"),
            reason: format!("expected {} values, found {}", doc.nx * doc.ny, doc.values.len()),
        });
    }
    Ok(ScalarGrid {
        nx: doc.nx,
        ny: doc.ny,
        x: ws.x,
        y: ws.y,
        values: doc.values,
    })
}

/// Loads a phantom from a JSON file. The name [`DEFAULT_NECK`] resolves to the
/// bundled phantom when no such file exists.
pub fn load_phantom(path: impl AsRef<Path>) -> Result<PhantomModel, PhantomError> {
    let path = path.as_ref();
    if !path.exists() && path.as_os_str() == DEFAULT_NECK {
        return Ok(PhantomModel::bundled_default());
    }
    let text = std::fs::read_to_string(path).map_err(|e| PhantomError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    PhantomModel::from_json(&text)
}

/// Bilinear stiffness at (x, y) in N/mm.
pub fn local_stiffness(m: &PhantomModel, x: f64, y: f64) -> Result<f64, PhantomError> {
    if !m.workspace.contains_xy(x, y) {
        return Err(PhantomError::OutOfBounds { x, y });
    }
    Ok(m.stiffness.interpolate(x, y))
}

/// Penalty contact force exerted by the phantom on a point probe, in N.
///
/// Penetration is measured vertically below the height field; the force acts
/// along the outward surface normal. Frictionless, no damping.
pub fn contact_force(m: &PhantomModel, probe: &Point3<f64>) -> Vector3<f64> {
    let x = m.workspace.x.clamp(probe.x);
    let y = m.workspace.y.clamp(probe.y);
    let penetration = m.surface_height(x, y) - probe.z;
    if penetration <= 0.0 {
        return Vector3::zeros();
    }
    m.surface_normal(x, y) * (m.stiffness.interpolate(x, y) * penetration)
}

pub fn ground_truth_center(m: &PhantomModel) -> Result<Point3<f64>, PhantomError> {
    centroid(&m.membrane_boundary).ok_or(PhantomError::EmptyBoundary)
}

pub(crate) fn centroid(points: &[Point3<f64>]) -> Option<Point3<f64>> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Some(Point3::from(sum / points.len() as f64))
}

// ---- authored default phantom -----------------------------------------

/// Parameters of the authored neck phantom. Coordinates: x lateral (patient
/// left positive), y superior, z up; origin at the sternoclavicular midpoint.
#[derive(Debug, Clone, Copy)]
pub struct NeckDesign {
    pub plateau_height: f64,
    pub plateau_half_width: f64,
    pub shoulder_width: f64,
    pub shoulder_drop: f64,
    pub cartilage_stiffness: f64,
    pub membrane_min_stiffness: f64,
    pub membrane_rim_stiffness: f64,
    pub taper_width: f64,
    pub membrane_center: [f64; 2],
    pub membrane_semi_axes: [f64; 2],
    pub boundary_points: usize,
}

impl Default for NeckDesign {
    fn default() -> Self {
        Self {
            plateau_height: 30.0,
            plateau_half_width: 18.0,
            shoulder_width: 22.0,
            shoulder_drop: 12.0,
            cartilage_stiffness: 2.5,
            membrane_min_stiffness: 0.8,
            membrane_rim_stiffness: 1.4,
            taper_width: 2.0,
            membrane_center: [0.0, 55.0],
            membrane_semi_axes: [6.5, 5.0],
            boundary_points: 16,
        }
    }
}

fn cosine_step(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    0.5 - 0.5 * (PI * t).cos()
}

impl NeckDesign {
    pub fn height(&self, x: f64, _y: f64) -> f64 {
        let off = (x.abs() - self.plateau_half_width) / self.shoulder_width;
        self.plateau_height - self.shoulder_drop * cosine_step(off)
    }

    pub fn stiffness(&self, x: f64, y: f64) -> f64 {
        let [cx, cy] = self.membrane_center;
        let [a, b] = self.membrane_semi_axes;
        let (dx, dy) = (x - cx, y - cy);
        let rho = ((dx / a).powi(2) + (dy / b).powi(2)).sqrt();
        let r = dx.hypot(dy);
        // distance to the ellipse measured along the ray from its center
        let signed = if rho > 0.0 { (rho - 1.0) * r / rho } else { -a.min(b) };
        let blend = cosine_step((signed + 0.5 * self.taper_width) / self.taper_width);
        let inner = self.membrane_min_stiffness
            + (self.membrane_rim_stiffness - self.membrane_min_stiffness) * rho.min(1.0).powi(2);
        inner * (1.0 - blend) + self.cartilage_stiffness * blend
    }

    pub fn build(&self) -> PhantomModel {
        let round = |v: f64| (v * 1e4).round() / 1e4;
        let workspace = Workspace {
            x: Bounds([-50.0, 50.0]),
            y: Bounds([-20.0, 110.0]),
            z: Bounds([0.0, 80.0]),
        };
        let (nx, ny) = (101, 131);
        let surface = ScalarGrid::from_fn(nx, ny, workspace.x, workspace.y, |x, y| round(self.height(x, y)));
        let stiffness = ScalarGrid::from_fn(nx, ny, workspace.x, workspace.y, |x, y| round(self.stiffness(x, y)));
        let on_surface = |x: f64, y: f64| [x, y, round(self.height(x, y))];
        let landmarks = Landmarks {
            laryngeal_prominence: on_surface(0.0, 75.0),
            sternoclavicular_left: on_surface(22.0, 0.0),
            sternoclavicular_right: on_surface(-22.0, 0.0),
        };
        let [cx, cy] = self.membrane_center;
        let [a, b] = self.membrane_semi_axes;
        let membrane_boundary = (0..self.boundary_points)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / self.boundary_points as f64;
                let (x, y) = (round(cx + a * th.cos()), round(cy + b * th.sin()));
                Point3::from(on_surface(x, y))
            })
            .collect();
        PhantomModel {
            workspace,
            surface,
            stiffness,
            landmarks,
            membrane_boundary,
            fixture_box: BoxXY {
                x: Bounds([-30.0, 30.0]),
                y: Bounds([-5.0, 95.0]),
            },
        }
    }
}

/// Authors the default phantom from [`NeckDesign::default`].
pub fn default_neck() -> PhantomModel {
    NeckDesign::default().build()
}

/// Flat phantom of constant stiffness over the default workspace. Landmarks
/// and boundary are placed as on the default neck so the full stack runs on it.
pub fn uniform_patch(stiffness: f64, height: f64) -> PhantomModel {
    let mut m = default_neck();
    m.surface.values.iter_mut().for_each(|v| *v = height);
    m.stiffness.values.iter_mut().for_each(|v| *v = stiffness);
    for p in [
        &mut m.landmarks.laryngeal_prominence,
        &mut m.landmarks.sternoclavicular_left,
        &mut m.landmarks.sternoclavicular_right,
    ] {
        p[2] = height;
    }
    m.membrane_boundary.iter_mut().for_each(|p| p.z = height);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flat(k: f64, h: f64) -> PhantomModel {
        let ws = Workspace {
            x: Bounds([0.0, 10.0]),
            y: Bounds([0.0, 10.0]),
            z: Bounds([-50.0, 50.0]),
        };
        PhantomModel {
            workspace: ws,
            surface: ScalarGrid::from_fn(11, 11, ws.x, ws.y, |_, _| h),
            stiffness: ScalarGrid::from_fn(11, 11, ws.x, ws.y, |_, _| k),
            landmarks: Landmarks {
                laryngeal_prominence: [5.0, 8.0, h],
                sternoclavicular_left: [8.0, 1.0, h],
                sternoclavicular_right: [2.0, 1.0, h],
            },
            membrane_boundary: vec![Point3::new(5.0, 5.0, h)],
            fixture_box: BoxXY { x: ws.x, y: ws.y },
        }
    }

    #[test]
    fn bundled_file_matches_authored_design() {
        let bundled = PhantomModel::bundled_default();
        assert_eq!(bundled, default_neck());
        assert_eq!(bundled.membrane_boundary.len(), 16);
    }

    #[test]
    fn stiffness_at_nodes_and_midpoints() {
        let mut m = flat(1.0, 0.0);
        m.stiffness.values[0] = 1.0;
        m.stiffness.values[1] = 2.0;
        assert_eq!(local_stiffness(&m, 1.0, 0.0).unwrap(), 2.0);
        assert_abs_diff_eq!(local_stiffness(&m, 0.5, 0.0).unwrap(), 1.5, epsilon = 1e-12);
        assert!(matches!(local_stiffness(&m, 11.0, 0.0), Err(PhantomError::OutOfBounds { .. })));
    }

    #[test]
    fn membrane_center_is_soft() {
        let m = PhantomModel::bundled_default();
        let c = m.ground_truth().center;
        let k = local_stiffness(&m, c.x, c.y).unwrap();
        assert!(k < 0.5 * 2.5, "membrane stiffness {k}");
        assert_abs_diff_eq!(c.x, 0.0, epsilon = 0.1);
        assert_abs_diff_eq!(c.y, 55.0, epsilon = 0.1);
    }

    #[test]
    fn flat_contact() {
        let m = flat(0.9, 0.0);
        assert_eq!(contact_force(&m, &Point3::new(5.0, 5.0, 1.0)), Vector3::zeros());
        let f = contact_force(&m, &Point3::new(5.0, 5.0, -1.0));
        assert_abs_diff_eq!(f, Vector3::new(0.0, 0.0, 0.9), epsilon = 1e-12);
    }

    #[test]
    fn inclined_contact() {
        let mut m = flat(1.0, 0.0);
        // z = x, a 45 degree incline
        m.surface = ScalarGrid::from_fn(11, 11, m.workspace.x, m.workspace.y, |x, _| x);
        let f = contact_force(&m, &Point3::new(4.3, 5.0, 4.3 - 2.0));
        assert_abs_diff_eq!(f.norm(), 2.0, epsilon = 1e-12);
        let n = Vector3::new(-1.0, 0.0, 1.0).normalize();
        assert_abs_diff_eq!(f.normalize(), n, epsilon = 1e-12);
    }

    #[test]
    fn centroid_cases() {
        let ring: Vec<_> = (0..8)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / 8.0;
                Point3::new(3.0 + 5.0 * th.cos(), 4.0 + 5.0 * th.sin(), 0.0)
            })
            .collect();
        let mut m = flat(1.0, 0.0);
        m.membrane_boundary = ring;
        assert_abs_diff_eq!(ground_truth_center(&m).unwrap(), Point3::new(3.0, 4.0, 0.0), epsilon = 1e-12);
        m.membrane_boundary = vec![Point3::new(1.0, 2.0, 3.0)];
        assert_eq!(ground_truth_center(&m).unwrap(), Point3::new(1.0, 2.0, 3.0));
        m.membrane_boundary.clear();
        assert!(matches!(ground_truth_center(&m), Err(PhantomError::EmptyBoundary)));
    }

    #[test]
    fn rejects_zero_stiffness() {
        let mut m = default_neck();
        m.stiffness.values[500] = 0.0;
        let err = PhantomModel::from_json(&m.to_json()).unwrap_err();
        match err {
            PhantomError::Invariant { path, .. } => assert_eq!(path, "stiffness.values[500]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_landmark() {
        let mut doc: serde_json::Value = serde_json::from_str(&default_neck().to_json()).unwrap();
        doc["landmarks"].as_object_mut().unwrap().remove("sternoclavicular_left");
        let err = PhantomModel::from_json(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("sternoclavicular_left"), "{err}");
    }

    #[test]
    fn membrane_polygon_membership() {
        let m = default_neck();
        assert!(m.inside_membrane(0.0, 55.0));
        assert!(m.inside_membrane(6.0, 55.0));
        assert!(!m.inside_membrane(7.0, 55.0));
        assert!(m.inside_membrane(0.0, 59.5));
        assert!(!m.inside_membrane(0.0, 60.5));
        // just outside the ellipse, hence outside the inscribed 16-gon
        assert!(!m.inside_membrane(4.6, 58.6));
    }
}
