//! Dense complex matrix helpers shared by the operator, resolvent and
//! response layers. Everything here is a thin layer over ndarray/LAPACK.

use ndarray::{Array1, Array2, Zip};
use ndarray_linalg::Inverse;
pub use num_complex::Complex64;

#[allow(non_camel_case_types)]
pub type c64 = Complex64;
pub type CMatrix = Array2<c64>;

pub const I: c64 = c64::new(0.0, 1.0);

use crate::error::Result;

pub fn identity(n: usize) -> CMatrix {
    CMatrix::from_diag_elem(n, c64::new(1.0, 0.0))
}

pub fn from_real_diag(d: &[f64]) -> CMatrix {
    let v: Array1<c64> = d.iter().map(|&x| c64::new(x, 0.0)).collect();
    CMatrix::from_diag(&v)
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    Ok(m.inv()?)
}

pub fn trace(m: &CMatrix) -> c64 {
    m.diag().iter().copied().sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    Zip::from(a).and(&b.t()).for_each(|&x, &y| acc += x * y);
    acc
}

pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut d = 0.0f64;
    Zip::from(a).and(b).for_each(|x, y| d = d.max((x - y).norm()));
    d
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut d = 0.0f64;
    Zip::from(m).and(&m.t()).for_each(|x, y| d = d.max((x - y.conj()).norm()));
    d
}

/// `diag(d) M - M diag(d)`, i.e. the Hadamard product with `d(x) - d(y)`.
pub fn diag_commutator(d: &[f64], m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v *= d[i] - d[j];
    }
    out
}

pub fn left_diag(d: &[f64], m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    for ((i, _), v) in out.indexed_iter_mut() {
        *v *= d[i];
    }
    out
}

pub fn hadamard(a: &CMatrix, b: &Array2<f64>) -> CMatrix {
    let mut out = a.clone();
    Zip::from(&mut out).and(b).for_each(|x, &y| *x *= y);
    out
}

pub fn hadamard_c(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = a.clone();
    Zip::from(&mut out).and(b).for_each(|x, &y| *x *= y);
    out
}

/// Neumaier-compensated accumulator for complex sums.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier(acc: &mut (f64, f64), x: f64) {
    let (s, c) = *acc;
    let t = s + x;
    let c = if s.abs() >= x.abs() {
        c + ((s - t) + x)
    } else {
        c + ((x - t) + s)
    };
    *acc = (t, c);
}

impl CompensatedSum {
    pub fn add(&mut self, z: c64) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }
    pub fn value(&self) -> c64 {
        c64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

pub fn compensated_sum_real(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = (0.0, 0.0);
    for x in xs {
        neumaier(&mut acc, x);
    }
    acc.0 + acc.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_of_product_matches_dot() {
        let a = CMatrix::from_shape_fn((3, 3), |(i, j)| c64::new(i as f64, j as f64 + 1.0));
        let b = CMatrix::from_shape_fn((3, 3), |(i, j)| c64::new((i * j) as f64, 1.0));
        let direct = trace(&a.dot(&b));
        assert!((direct - trace_of_product(&a, &b)).norm() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let s = compensated_sum_real([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }
}
