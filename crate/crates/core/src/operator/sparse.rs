use std::io::Write;

use crate::error::Result;
use crate::linalg::{c64, CMatrix};

/// Coordinate-format sparse matrix; duplicate entries are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    entries: Vec<(usize, usize, c64)>,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: c64) {
        self.entries.push((i, j, v));
    }

    pub fn entries(&self) -> &[(usize, usize, c64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros((self.n, self.n));
        self.add_scaled_into(&mut m, c64::new(1.0, 0.0));
        m
    }

    pub fn add_scaled_into(&self, m: &mut CMatrix, s: c64) {
        for &(i, j, v) in &self.entries {
            m[(i, j)] += s * v;
        }
    }

    /// `self · M` for a dense `M`.
    pub fn mul_dense(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros((self.n, m.ncols()));
        for &(i, j, v) in &self.entries {
            let src = m.row(j);
            let mut dst = out.row_mut(i);
            dst.zip_mut_with(&src, |d, s| *d += v * s);
        }
        out
    }

    /// Plain-text COO export: a `# coo n nnz` header, then `row col re im`.
    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# coo {} {}", self.n, self.entries.len())?;
        for &(i, j, v) in &self.entries {
            writeln!(w, "{i} {j} {:.17e} {:.17e}", v.re, v.im)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_times_dense() {
        let mut s = SparseMatrix::new(2);
        s.push(0, 1, c64::new(2.0, 0.0));
        s.push(1, 0, c64::new(0.0, 1.0));
        let m = CMatrix::from_shape_fn((2, 2), |(i, j)| c64::new((i + 2 * j) as f64, 0.0));
        let want = s.to_dense().dot(&m);
        assert_eq!(s.mul_dense(&m), want);
        let mut buf = Vec::new();
        s.write_coo(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("# coo 2 2"));
    }
}
