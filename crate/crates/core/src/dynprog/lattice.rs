use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular lattice on the cube `[−1, 1]³` containing the Bloch ball.
///
/// Nodes are indexed `i + nx·(j + ny·k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Lattice {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx < 2 || ny < 2 || nz < 2 {
            return Err(Error::InvalidGrid(format!(
                "lattice {nx}x{ny}x{nz} needs at least two points per axis"
            )));
        }
        Ok(Lattice { nx, ny, nz })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            2.0 / (self.nx - 1) as f64,
            2.0 / (self.ny - 1) as f64,
            2.0 / (self.nz - 1) as f64,
        ]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn ijk(&self, node: usize) -> (usize, usize, usize) {
        let i = node % self.nx;
        let j = (node / self.nx) % self.ny;
        let k = node / (self.nx * self.ny);
        (i, j, k)
    }

    pub fn coords(&self, node: usize) -> [f64; 3] {
        let (i, j, k) = self.ijk(node);
        let h = self.spacing();
        [
            -1.0 + i as f64 * h[0],
            -1.0 + j as f64 * h[1],
            -1.0 + k as f64 * h[2],
        ]
    }

    /// Nodes whose cells can be touched when interpolating inside the ball.
    pub fn is_active(&self, node: usize) -> bool {
        let c = self.coords(node);
        let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let h = self.spacing();
        let diag = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
        r <= 1.0 + diag + 1e-12
    }

    fn locate(n: usize, h: f64, c: f64) -> (usize, f64) {
        let f = ((c + 1.0) / h).clamp(0.0, (n - 1) as f64);
        let i = (f.floor() as usize).min(n - 2);
        (i, f - i as f64)
    }

    fn cell(&self, p: [f64; 3]) -> ([usize; 3], [f64; 3]) {
        let h = self.spacing();
        let (i, tx) = Self::locate(self.nx, h[0], p[0]);
        let (j, ty) = Self::locate(self.ny, h[1], p[1]);
        let (k, tz) = Self::locate(self.nz, h[2], p[2]);
        ([i, j, k], [tx, ty, tz])
    }

    fn corners(&self, values: &[f64], c: [usize; 3]) -> [f64; 8] {
        let [i, j, k] = c;
        let at = |di, dj, dk| values[self.index(i + di, j + dj, k + dk)];
        [
            at(0, 0, 0),
            at(1, 0, 0),
            at(0, 1, 0),
            at(1, 1, 0),
            at(0, 0, 1),
            at(1, 0, 1),
            at(0, 1, 1),
            at(1, 1, 1),
        ]
    }

    /// Trilinear interpolation of nodal `values` at `p` (clamped to the cube).
    pub fn interpolate(&self, values: &[f64], p: [f64; 3]) -> f64 {
        let (c, [tx, ty, tz]) = self.cell(p);
        let v = self.corners(values, c);
        let x00 = v[0] + tx * (v[1] - v[0]);
        let x10 = v[2] + tx * (v[3] - v[2]);
        let x01 = v[4] + tx * (v[5] - v[4]);
        let x11 = v[6] + tx * (v[7] - v[6]);
        let y0 = x00 + ty * (x10 - x00);
        let y1 = x01 + ty * (x11 - x01);
        y0 + tz * (y1 - y0)
    }

    /// Value and gradient of the trilinear interpolant at `p`.
    pub fn interpolate_with_gradient(&self, values: &[f64], p: [f64; 3]) -> (f64, [f64; 3]) {
        let (c, [tx, ty, tz]) = self.cell(p);
        let h = self.spacing();
        let v = self.corners(values, c);
        let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);

        let x00 = lerp(v[0], v[1], tx);
        let x10 = lerp(v[2], v[3], tx);
        let x01 = lerp(v[4], v[5], tx);
        let x11 = lerp(v[6], v[7], tx);
        let y0 = lerp(x00, x10, ty);
        let y1 = lerp(x01, x11, ty);
        let value = lerp(y0, y1, tz);

        let dz = (y1 - y0) / h[2];
        let dy = lerp(x10 - x00, x11 - x01, tz) / h[1];
        let dx0 = lerp(v[1] - v[0], v[3] - v[2], ty);
        let dx1 = lerp(v[5] - v[4], v[7] - v[6], ty);
        let dx = lerp(dx0, dx1, tz) / h[0];
        (value, [dx, dy, dz])
    }

    /// Central-difference gradient of nodal values at an interior node.
    pub fn node_gradient(&self, values: &[f64], node: usize) -> Option<[f64; 3]> {
        let (i, j, k) = self.ijk(node);
        if i == 0 || j == 0 || k == 0 || i + 1 >= self.nx || j + 1 >= self.ny || k + 1 >= self.nz {
            return None;
        }
        let h = self.spacing();
        Some([
            (values[self.index(i + 1, j, k)] - values[self.index(i - 1, j, k)]) / (2.0 * h[0]),
            (values[self.index(i, j + 1, k)] - values[self.index(i, j - 1, k)]) / (2.0 * h[1]),
            (values[self.index(i, j, k + 1)] - values[self.index(i, j, k - 1)]) / (2.0 * h[2]),
        ])
    }
}
