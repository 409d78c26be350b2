use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Uniform cubic lattice of `n_per_side^dim` interior nodes of the open box
/// `(-L/2, L/2)^dim` with spacing `h = L / (n_per_side + 1)`. Boundary nodes
/// carry the Dirichlet condition and are not stored. Flat indices are
/// row-major with axis 0 varying slowest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    side: f64,
    n_per_side: usize,
}

impl Grid {
    pub fn new(dim: usize, side: f64, n_per_side: usize) -> Result<Self> {
        ensure((1..=3).contains(&dim), || format!("dim must be 1, 2 or 3 (got {dim})"))?;
        ensure(side.is_finite() && side > 0.0, || format!("box side must be positive (got {side})"))?;
        ensure(n_per_side >= 1, || "n_per_side must be at least 1".into())?;
        Ok(Self { dim, side, n_per_side })
    }

    pub fn with_spacing(dim: usize, spacing: f64, n_per_side: usize) -> Result<Self> {
        ensure(spacing.is_finite() && spacing > 0.0, || format!("spacing must be positive (got {spacing})"))?;
        Self::new(dim, spacing * (n_per_side + 1) as f64, n_per_side)
    }

    /// Grid of side `side` whose spacing is as close as possible to `spacing`
    /// from below.
    pub fn from_side_and_spacing(dim: usize, side: f64, spacing: f64) -> Result<Self> {
        ensure(spacing > 0.0 && side > spacing, || {
            format!("need 0 < spacing < side (spacing {spacing}, side {side})")
        })?;
        let cells = (side / spacing - 1e-9).ceil() as usize;
        Self::new(dim, side, cells.max(2) - 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn side(&self) -> f64 {
        self.side
    }
    pub fn n_per_side(&self) -> usize {
        self.n_per_side
    }
    pub fn spacing(&self) -> f64 {
        self.side / (self.n_per_side + 1) as f64
    }
    pub fn len(&self) -> usize {
        self.n_per_side.pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of index `k` along any axis, symmetric about the origin.
    pub fn axis_coord(&self, k: usize) -> f64 {
        self.spacing() * (k as f64 + 1.0 - 0.5 * (self.n_per_side + 1) as f64)
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.n_per_side;
        let mut out = [0usize; 3];
        let mut rem = idx;
        for a in (0..self.dim).rev() {
            out[a] = rem % n;
            rem /= n;
        }
        out
    }

    pub fn flat_index(&self, multi: [usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, a| acc * self.n_per_side + multi[a])
    }

    pub fn coord(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.axis_coord(m[a]);
        }
        x
    }

    pub fn coords(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.coord(i)).collect()
    }

    /// Neighbour of `idx` one step along `axis` in direction `dir = ±1`,
    /// or `None` when that step lands on the Dirichlet boundary.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: i64) -> Option<usize> {
        let mut m = self.multi_index(idx);
        let k = m[axis] as i64 + dir;
        if k < 0 || k >= self.n_per_side as i64 {
            return None;
        }
        m[axis] = k as usize;
        Some(self.flat_index(m))
    }

    /// Euclidean distance from the node to the complement of the box.
    pub fn boundary_distance(&self, idx: usize) -> f64 {
        let x = self.coord(idx);
        (0..self.dim)
            .map(|a| 0.5 * self.side - x[a].abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (x, y) = (self.coord(i), self.coord(j));
        (0..self.dim).map(|a| (x[a] - y[a]).powi(2)).sum::<f64>().sqrt()
    }

    /// Index of the node closest to `x` (exact when `x` is a node).
    pub fn nearest_node(&self, x: [f64; 3]) -> usize {
        let h = self.spacing();
        let mut m = [0usize; 3];
        for a in 0..self.dim {
            let k = (x[a] / h + 0.5 * (self.n_per_side + 1) as f64 - 1.0).round();
            m[a] = k.clamp(0.0, (self.n_per_side - 1) as f64) as usize;
        }
        self.flat_index(m)
    }

    /// Whether the nodes of `self` are a subset of the nodes of `other`
    /// (same spacing, compatible parity).
    pub fn nests_in(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && (self.spacing() - other.spacing()).abs() <= 1e-12 * self.spacing()
            && other.n_per_side >= self.n_per_side
            && (other.n_per_side - self.n_per_side) % 2 == 0
    }

    /// For a nested pair, the flat index in `other` of each node of `self`.
    pub fn embedding_into(&self, other: &Grid) -> Option<Vec<usize>> {
        if !self.nests_in(other) {
            return None;
        }
        let off = (other.n_per_side - self.n_per_side) / 2;
        Some(
            (0..self.len())
                .map(|i| {
                    let mut m = self.multi_index(i);
                    for v in m.iter_mut().take(self.dim) {
                        *v += off;
                    }
                    other.flat_index(m)
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_grid_is_integer_lattice() {
        let g = Grid::new(2, 8.0, 7).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.coord(0), [-3.0, -3.0, 0.0]);
        assert_eq!(g.coord(g.len() - 1), [3.0, 3.0, 0.0]);
        let c = g.nearest_node([0.0; 3]);
        assert_eq!(g.coord(c), [0.0; 3]);
    }

    #[test]
    fn index_roundtrip_and_neighbors() {
        let g = Grid::new(3, 5.0, 4).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.flat_index(g.multi_index(i)), i);
        }
        assert_eq!(g.neighbor(0, 0, -1), None);
        assert_eq!(g.neighbor(0, 2, 1), Some(1));
        assert_eq!(g.neighbor(0, 0, 1), Some(16));
    }

    #[test]
    fn embedding_preserves_coordinates() {
        let small = Grid::with_spacing(2, 0.5, 7).unwrap();
        let big = Grid::with_spacing(2, 0.5, 15).unwrap();
        let emb = small.embedding_into(&big).unwrap();
        for (i, &j) in emb.iter().enumerate() {
            let (x, y) = (small.coord(i), big.coord(j));
            assert!((x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12);
        }
        assert!(Grid::with_spacing(2, 0.5, 8).unwrap().embedding_into(&big).is_none());
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Grid::new(4, 1.0, 3).is_err());
        assert!(Grid::new(2, -1.0, 3).is_err());
    }
}
