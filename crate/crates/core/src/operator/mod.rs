//! Finite-difference magnetic Schrödinger operator in the symmetric gauge,
//! stored as the exact quadratic polynomial `H(b) = H0 + b H1 + b^2 H2`.
//!
//! `H0 = -Δ_h/2 + V` (3-point stencil per axis), `H1 = Σ_l i a_l D_l` with the
//! central difference `D_l`, and `H2 = |a|^2 / 2`. Because `a_1` depends only
//! on `x_2` and `a_2` only on `x_1`, `a_l` commutes with `D_l` and
//! `H(b) - H(0) = Σ_l (P_l(b)^2 - P_l(0)^2) / 2` holds exactly with
//! `P_l(b) = i D_l + b a_l`.

mod sparse;

pub use sparse::SparseMatrix;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, I};
use crate::potentials::{Grid, PotentialField};

/// Symmetric gauge `a(x) = (-x_2, x_1, 0) / 2`; identically zero in 1D.
pub fn gauge(x: &[f64; 3], dim: usize) -> [f64; 3] {
    if dim < 2 {
        [0.0; 3]
    } else {
        [-0.5 * x[1], 0.5 * x[0], 0.0]
    }
}

/// `φ(x, y) = a(y)·x = (y_1 x_2 - y_2 x_1) / 2`, antisymmetric.
pub fn magnetic_phase(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    0.5 * (y[0] * x[1] - y[1] * x[0])
}

/// Node-pair matrix of `φ(x_i, x_j)`.
pub fn phase_matrix(grid: &Grid) -> Array2<f64> {
    let c = grid.coords();
    let n = grid.len();
    if grid.dim() < 2 {
        return Array2::zeros((n, n));
    }
    Array2::from_shape_fn((n, n), |(i, j)| magnetic_phase(&c[i], &c[j]))
}

/// Gauge components at every node, `a_l(x_i)` for `l < dim.min(2)`.
pub fn gauge_at_nodes(grid: &Grid) -> Vec<Vec<f64>> {
    let dim = grid.dim();
    let coords = grid.coords();
    (0..dim.min(2))
        .map(|l| coords.iter().map(|x| gauge(x, dim)[l]).collect())
        .collect()
}

pub const DEFAULT_DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone)]
pub struct HamiltonianPolynomial {
    grid: Grid,
    potential: Vec<f64>,
    h0: SparseMatrix,
    h1: SparseMatrix,
    h2: Vec<f64>,
    gauge: Vec<Vec<f64>>,
    dense_limit: usize,
}

impl HamiltonianPolynomial {
    pub fn new(field: &PotentialField) -> Result<Self> {
        Self::from_values(&field.grid, &field.values)
    }

    pub fn free(grid: &Grid) -> Self {
        Self::from_values(grid, &vec![0.0; grid.len()]).expect("zero potential is always valid")
    }

    pub fn from_values(grid: &Grid, potential: &[f64]) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "potential has {} values for a grid of {} nodes",
                potential.len(),
                grid.len()
            )));
        }
        if let Some(v) = potential.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite potential value {v}")));
        }
        let n = grid.len();
        let dim = grid.dim();
        let h = grid.spacing();
        let gauge = gauge_at_nodes(grid);

        let mut h0 = SparseMatrix::new(n);
        let mut h1 = SparseMatrix::new(n);
        let off = -0.5 / (h * h);
        for i in 0..n {
            h0.push(i, i, c64::new(dim as f64 / (h * h) + potential[i], 0.0));
            for axis in 0..dim {
                for dir in [-1i64, 1] {
                    if let Some(j) = grid.neighbor(i, axis, dir) {
                        h0.push(i, j, c64::new(off, 0.0));
                        if axis < gauge.len() {
                            let a = gauge[axis][i];
                            if a != 0.0 {
                                h1.push(i, j, I * (a * dir as f64 / (2.0 * h)));
                            }
                        }
                    }
                }
            }
        }
        let h2 = (0..n)
            .map(|i| 0.5 * gauge.iter().map(|a| a[i] * a[i]).sum::<f64>())
            .collect();
        Ok(Self {
            grid: *grid,
            potential: potential.to_vec(),
            h0,
            h1,
            h2,
            gauge,
            dense_limit: DEFAULT_DENSE_LIMIT,
        })
    }

    pub fn with_dense_limit(mut self, limit: usize) -> Self {
        self.dense_limit = limit;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }
    pub fn dim(&self) -> usize {
        self.grid.len()
    }
    pub fn h0(&self) -> &SparseMatrix {
        &self.h0
    }
    pub fn h1(&self) -> &SparseMatrix {
        &self.h1
    }
    pub fn h2_diag(&self) -> &[f64] {
        &self.h2
    }
    pub fn gauge_components(&self) -> &[Vec<f64>] {
        &self.gauge
    }

    pub fn check_dense(&self) -> Result<()> {
        if self.grid.len() > self.dense_limit {
            return Err(Error::SizeGuard(format!(
                "dense operator of size {} exceeds the limit {}",
                self.grid.len(),
                self.dense_limit
            )));
        }
        Ok(())
    }

    /// Dense `H(b)`.
    pub fn assemble(&self, b: f64) -> Result<CMatrix> {
        self.check_dense()?;
        let mut m = self.h0.to_dense();
        self.h1.add_scaled_into(&mut m, c64::new(b, 0.0));
        for (i, v) in self.h2.iter().enumerate() {
            m[(i, i)] += b * b * v;
        }
        Ok(m)
    }

    /// Sparse `H(b)` for export.
    pub fn assemble_sparse(&self, b: f64) -> SparseMatrix {
        let mut s = self.h0.clone();
        for &(i, j, v) in self.h1.entries() {
            s.push(i, j, v * b);
        }
        for (i, v) in self.h2.iter().enumerate() {
            if *v != 0.0 {
                s.push(i, i, c64::new(b * b * v, 0.0));
            }
        }
        s
    }

    /// `H'(b) = H1 + 2 b H2` as a sparse matrix.
    pub fn derivative_sparse(&self, b: f64) -> SparseMatrix {
        let mut s = self.h1.clone();
        for (i, v) in self.h2.iter().enumerate() {
            if *v != 0.0 {
                s.push(i, i, c64::new(2.0 * b * v, 0.0));
            }
        }
        s
    }

    pub fn derivative(&self, b: f64) -> CMatrix {
        self.derivative_sparse(b).to_dense()
    }

    pub fn h2_dense(&self) -> CMatrix {
        crate::linalg::from_real_diag(&self.h2)
    }

    /// Central difference `D_l` (Dirichlet truncation).
    pub fn difference(&self, axis: usize) -> CMatrix {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let mut d = CMatrix::zeros((n, n));
        for i in 0..n {
            for dir in [-1i64, 1] {
                if let Some(j) = self.grid.neighbor(i, axis, dir) {
                    d[(i, j)] = c64::new(dir as f64 / (2.0 * h), 0.0);
                }
            }
        }
        d
    }

    /// Covariant momentum `P_l(b) = i D_l + b a_l`.
    pub fn momentum(&self, axis: usize, b: f64) -> CMatrix {
        let mut p = self.difference(axis).mapv(|v| I * v);
        if axis < self.gauge.len() {
            for i in 0..self.grid.len() {
                p[(i, i)] += b * self.gauge[axis][i];
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_defect, max_abs_diff};

    fn op() -> HamiltonianPolynomial {
        let g = Grid::new(2, 4.0, 6).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        HamiltonianPolynomial::from_values(&g, &v).unwrap()
    }

    #[test]
    fn phase_of_unit_vectors() {
        assert_eq!(magnetic_phase(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), -0.5);
        assert_eq!(magnetic_phase(&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0]), 0.5);
    }

    #[test]
    fn hermitian_and_conjugation_symmetry() {
        let hp = op();
        for b in [0.0, 0.3, -1.7] {
            let h = hp.assemble(b).unwrap();
            assert!(hermiticity_defect(&h) < 1e-14);
            let hm = hp.assemble(-b).unwrap();
            assert!(max_abs_diff(&h.mapv(|z| z.conj()), &hm) < 1e-14);
        }
    }

    #[test]
    fn polynomial_matches_covariant_momenta() {
        let hp = op();
        let b = 0.7;
        let lhs = &hp.assemble(b).unwrap() - &hp.assemble(0.0).unwrap();
        let mut rhs = CMatrix::zeros(lhs.raw_dim());
        for l in 0..2 {
            let pb = hp.momentum(l, b);
            let p0 = hp.momentum(l, 0.0);
            rhs = rhs + (pb.dot(&pb) - p0.dot(&p0)).mapv(|z| z * 0.5);
        }
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn derivative_is_h1_plus_2b_h2() {
        let hp = op();
        let b = 0.4;
        let s = 1e-4;
        let fd = (&hp.assemble(b + s).unwrap() - &hp.assemble(b - s).unwrap()).mapv(|z| z / (2.0 * s));
        assert!(max_abs_diff(&fd, &hp.derivative(b)) < 1e-9);
    }

    #[test]
    fn size_guard() {
        let g = Grid::new(2, 4.0, 10).unwrap();
        let hp = HamiltonianPolynomial::free(&g).with_dense_limit(50);
        assert!(matches!(hp.assemble(0.0), Err(Error::SizeGuard(_))));
    }
}
