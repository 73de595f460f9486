//! Penalized least-squares gridding of scattered stiffness samples.
//!
//! The grid `g` minimizes `Σ_s (B_s g − κ_s)² + λ ‖L g‖²`, where `B_s` holds the
//! bilinear weights of sample `s` and `L` is the graph Laplacian of the lattice
//! with Neumann boundaries. `L` annihilates only constants, so the normal
//! matrix is positive definite as soon as one sample is present. It is banded
//! with half-bandwidth `2 nx` and factorized by a banded Cholesky.

use serde::{Deserialize, Serialize};

use super::online::StiffnessSample;
use crate::phantom::{BoxXY, Bounds};

pub const DEFAULT_STEP: f64 = 2.0;
pub const DEFAULT_LAMBDA: f64 = 1e-2;
/// Nodes farther than this from every sample are reported as unsupported, mm.
pub const DEFAULT_SUPPORT_RADIUS: f64 = 3.0;
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessMap {
    pub nx: usize,
    pub ny: usize,
    pub x: Bounds,
    pub y: Bounds,
    pub lambda: f64,
    /// Row-major, x fastest, N/mm.
    pub values: Vec<f64>,
}

impl StiffnessMap {
    /// A lattice with spacing as close to `step` as the bounds allow, filled with zeros.
    pub fn new(x: Bounds, y: Bounds, step: f64, lambda: f64) -> Self {
        let nx = ((x.span() / step).round() as usize).max(1) + 1;
        let ny = ((y.span() / step).round() as usize).max(1) + 1;
        Self {
            nx,
            ny,
            x,
            y,
            lambda,
            values: vec![0.0; nx * ny],
        }
    }

    pub fn covering(b: &BoxXY, step: f64, lambda: f64) -> Self {
        Self::new(b.x, b.y, step, lambda)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.x.span() / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.y.span() / (self.ny - 1) as f64
    }

    pub fn node(&self, idx: usize) -> (f64, f64) {
        let (i, j) = (idx % self.nx, idx / self.nx);
        (self.x.min() + i as f64 * self.dx(), self.y.min() + j as f64 * self.dy())
    }

    /// Bilinear weights of the four nodes around `(x, y)`, clamped to the lattice.
    pub fn weights(&self, x: f64, y: f64) -> [(usize, f64); 4] {
        let fx = ((x - self.x.min()) / self.dx()).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.y.min()) / self.dy()).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let base = j * self.nx + i;
        [
            (base, (1.0 - tx) * (1.0 - ty)),
            (base + 1, tx * (1.0 - ty)),
            (base + self.nx, (1.0 - tx) * ty),
            (base + self.nx + 1, tx * ty),
        ]
    }

    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        self.weights(x, y).iter().map(|(k, w)| w * self.values[*k]).sum()
    }

    pub fn argmin(&self) -> (f64, f64, f64) {
        let (k, v) = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("map has nodes");
        let (x, y) = self.node(k);
        (x, y, *v)
    }

    fn half_bandwidth(&self) -> usize {
        2 * self.nx
    }

    fn neighbours(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = (idx % self.nx, idx / self.nx);
        let nx = self.nx;
        [
            (i > 0).then(|| idx - 1),
            (i + 1 < nx).then(|| idx + 1),
            (j > 0).then(|| idx - nx),
            (j + 1 < self.ny).then(|| idx + nx),
        ]
        .into_iter()
        .flatten()
    }

    /// Sparse rows of the graph Laplacian `L = Deg − Adj`.
    fn laplacian_row(&self, idx: usize) -> Vec<(usize, f64)> {
        let mut row: Vec<(usize, f64)> = self.neighbours(idx).map(|n| (n, -1.0)).collect();
        row.push((idx, row.len() as f64));
        row
    }

    fn regularizer(&self) -> Band {
        let mut band = Band::new(self.len(), self.half_bandwidth());
        let rows: Vec<_> = (0..self.len()).map(|i| self.laplacian_row(i)).collect();
        // LᵀL = Σ_r row_rᵀ row_r since L is symmetric.
        for row in &rows {
            for &(a, va) in row {
                for &(b, vb) in row {
                    if b <= a {
                        band.add(a, b, self.lambda * va * vb);
                    }
                }
            }
        }
        band
    }
}

/// Symmetric banded matrix, lower triangle stored row by row.
#[derive(Debug, Clone, PartialEq)]
struct Band {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl Band {
    fn new(n: usize, b: usize) -> Self {
        Self {
            n,
            b,
            data: vec![0.0; n * (b + 1)],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.b);
        i * (self.b + 1) + (i - j)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        if j <= i {
            self.add(i, j, v)
        } else {
            self.add(j, i, v)
        }
    }

    fn sum(&self, other: &Band) -> Band {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Band { data, ..*self }
    }

    /// In-place Cholesky `A = C Cᵀ`; returns `None` if not positive definite.
    fn cholesky(mut self) -> Option<Band> {
        let w = self.b + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.b);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(self.b));
                // row r holds C(r, k) at offset r - k, so both runs ascend as k descends
                let (ri, rj) = (i * w, j * w);
                let dot: f64 = self.data[ri + i - j + 1..=ri + i - klo]
                    .iter()
                    .zip(&self.data[rj + 1..=rj + j - klo])
                    .map(|(a, b)| a * b)
                    .sum();
                let s = self.data[ri + i - j] - dot;
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    self.data[ri] = s.sqrt();
                } else {
                    self.data[ri + i - j] = s / self.data[rj];
                }
            }
        }
        Some(self)
    }

    fn solve_factored(&self, rhs: &[f64]) -> Vec<f64> {
        let mut y = rhs.to_vec();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.b);
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().take(i).skip(lo) {
                s -= self.get(i, k) * yk;
            }
            y[i] = s / self.get(i, i);
        }
        for i in (0..self.n).rev() {
            let hi = (i + self.b).min(self.n - 1);
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().take(hi + 1).skip(i + 1) {
                s -= self.get(k, i) * yk;
            }
            y[i] = s / self.get(i, i);
        }
        y
    }
}

/// Accumulated data term `BᵀB`, `Bᵀκ`.
#[derive(Debug, Clone)]
struct Normal {
    ata: Band,
    atb: Vec<f64>,
}

impl Normal {
    fn new(map: &StiffnessMap) -> Self {
        Self {
            ata: Band::new(map.len(), map.half_bandwidth()),
            atb: vec![0.0; map.len()],
        }
    }

    fn add(&mut self, map: &StiffnessMap, s: &StiffnessSample) {
        let w = map.weights(s.location[0], s.location[1]);
        for &(a, wa) in &w {
            self.atb[a] += wa * s.kappa;
            for &(b, wb) in &w {
                if b <= a {
                    self.ata.add_sym(a, b, wa * wb);
                }
            }
        }
    }

    fn solve(&self, reg: &Band) -> Option<Vec<f64>> {
        Some(reg.sum(&self.ata).cholesky()?.solve_factored(&self.atb))
    }
}

/// Grids `samples` onto the lattice of `map` from scratch. With no samples the
/// map is returned unchanged.
pub fn update_map(map: &StiffnessMap, samples: &[StiffnessSample]) -> StiffnessMap {
    if samples.is_empty() {
        return map.clone();
    }
    let mut ne = Normal::new(map);
    for s in samples {
        ne.add(map, s);
    }
    let mut out = map.clone();
    if let Some(v) = ne.solve(&map.regularizer()) {
        out.values = v;
    }
    out
}

/// Wire form of a map for the operator stream and CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshot {
    pub schema_version: u32,
    pub nx: usize,
    pub ny: usize,
    pub x_bounds: [f64; 2],
    pub y_bounds: [f64; 2],
    /// Row-major, x fastest, N/mm.
    pub values: Vec<f64>,
    /// Node has a sample within the support radius.
    pub supported: Vec<bool>,
    pub probe: Option<[f64; 2]>,
    pub sample_count: usize,
}

impl MapSnapshot {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,kappa,supported\n");
        let dx = (self.x_bounds[1] - self.x_bounds[0]) / (self.nx - 1) as f64;
        let dy = (self.y_bounds[1] - self.y_bounds[0]) / (self.ny - 1) as f64;
        for (k, v) in self.values.iter().enumerate() {
            let x = self.x_bounds[0] + (k % self.nx) as f64 * dx;
            let y = self.y_bounds[0] + (k / self.nx) as f64 * dy;
            out.push_str(&format!("{x},{y},{v},{}\n", self.supported[k] as u8));
        }
        out
    }
}

/// Map that is refreshed on the display tick from every sample received so far.
#[derive(Debug, Clone)]
pub struct LiveMap {
    map: StiffnessMap,
    reg: Band,
    normal: Normal,
    samples: Vec<StiffnessSample>,
    supported: Vec<bool>,
    support_radius: f64,
    dirty: bool,
    solves: usize,
}

impl LiveMap {
    pub fn new(map: StiffnessMap, support_radius: f64) -> Self {
        let reg = map.regularizer();
        let normal = Normal::new(&map);
        let supported = vec![false; map.len()];
        Self {
            map,
            reg,
            normal,
            samples: Vec::new(),
            supported,
            support_radius,
            dirty: false,
            solves: 0,
        }
    }

    pub fn map(&self) -> &StiffnessMap {
        &self.map
    }

    pub fn samples(&self) -> &[StiffnessSample] {
        &self.samples
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub fn solves(&self) -> usize {
        self.solves
    }

    pub fn add(&mut self, s: StiffnessSample) {
        self.normal.add(&self.map, &s);
        let r2 = self.support_radius.powi(2);
        for k in 0..self.map.len() {
            let (x, y) = self.map.node(k);
            if (x - s.location[0]).powi(2) + (y - s.location[1]).powi(2) <= r2 {
                self.supported[k] = true;
            }
        }
        self.samples.push(s);
        self.dirty = true;
    }

    /// Re-solves if samples arrived since the last call. Returns whether it did.
    pub fn refresh(&mut self) -> bool {
        if !self.dirty {
            return false;
        }
        if let Some(v) = self.normal.solve(&self.reg) {
            self.map.values = v;
        }
        self.dirty = false;
        self.solves += 1;
        true
    }

    /// Lowest node among those with nearby samples: `(x, y, κ)`.
    pub fn argmin_supported(&self) -> Option<(f64, f64, f64)> {
        self.map
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| self.supported[*k])
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, v)| {
                let (x, y) = self.map.node(k);
                (x, y, *v)
            })
    }

    pub fn snapshot(&self, probe: Option<[f64; 2]>) -> MapSnapshot {
        MapSnapshot {
            schema_version: SNAPSHOT_VERSION,
            nx: self.map.nx,
            ny: self.map.ny,
            x_bounds: self.map.x.0,
            y_bounds: self.map.y.0,
            values: self.map.values.clone(),
            supported: self.supported.clone(),
            probe,
            sample_count: self.samples.len(),
        }
    }
}
