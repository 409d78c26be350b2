//! Reference derivatives of `b ↦ (H(b) - ξ)^{-1}` that share no code with the
//! resolvent-expansion formulas.
//!
//! The complex matrix `A(b) = H(b) - ξ` is embedded as the real block matrix
//! `[[Re A, -Im A], [Im A, Re A]]`, which depends polynomially on the real
//! parameter `b`. Complexifying `b → b + iδ` and inverting gives the first
//! derivative as `Im(inverse) / δ` with no subtractive cancellation. Higher
//! derivatives are Richardson-extrapolated central differences of that
//! first derivative.

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::linalg::{c64, inverse, CMatrix};
use crate::operator::HamiltonianPolynomial;

const DELTA: f64 = 1e-20;

fn embed(m: &CMatrix) -> Array2<f64> {
    let n = m.nrows();
    let mut e = Array2::zeros((2 * n, 2 * n));
    for ((i, j), z) in m.indexed_iter() {
        e[(i, j)] = z.re;
        e[(i, j + n)] = -z.im;
        e[(i + n, j)] = z.im;
        e[(i + n, j + n)] = z.re;
    }
    e
}

fn complex_step_first(hp: &HamiltonianPolynomial, b: f64, xi: c64) -> Result<CMatrix> {
    hp.check_dense()?;
    let n = hp.dim();
    let mut a0 = hp.h0().to_dense();
    for i in 0..n {
        a0[(i, i)] -= xi;
    }
    let e0 = embed(&a0);
    let e1 = embed(&hp.h1().to_dense());
    let e2 = embed(&hp.h2_dense());
    let bc = c64::new(b, DELTA);
    let bc2 = bc * bc;
    let m: Array2<c64> = ndarray::Zip::from(&e0)
        .and(&e1)
        .and(&e2)
        .map_collect(|&x0, &x1, &x2| x0 + bc * x1 + bc2 * x2);
    let inv = inverse(&m)?;
    let d = inv.mapv(|z| z.im / DELTA);
    let re = d.slice(s![..n, ..n]);
    let im = d.slice(s![n.., ..n]);
    Ok(ndarray::Zip::from(&re).and(&im).map_collect(|&x, &y| c64::new(x, y)))
}

fn row_sum_norm(m: &CMatrix) -> f64 {
    m.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `∂_b^n (H(b) - ξ)^{-1}` as a matrix (not kernel-normalized), `n ∈ {1,2,3}`.
pub fn derivative_oracle(hp: &HamiltonianPolynomial, b: f64, xi: c64, n: usize) -> Result<CMatrix> {
    if n == 1 {
        return complex_step_first(hp, b, xi);
    }
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!("oracle supports derivative orders 1..=3 (got {n})")));
    }
    // the resolvent varies on the scale 1 / (||R|| ||H'||)
    let mut a = hp.assemble(b)?;
    for i in 0..a.nrows() {
        a[(i, i)] -= xi;
    }
    let r_norm = row_sum_norm(&inverse(&a)?);
    let hp_norm = row_sum_norm(&hp.derivative(b)).max(1e-12);
    let step = 2e-3 / (r_norm * hp_norm).max(1.0);

    let f = |t: f64| complex_step_first(hp, b + t, xi);
    let stencil = |s: f64| -> Result<CMatrix> {
        Ok(match n {
            2 => (&f(s)? - &f(-s)?).mapv(|z| z / (2.0 * s)),
            _ => (&(&f(s)? + &f(-s)?) - &f(0.0)?.mapv(|z| z * 2.0)).mapv(|z| z / (s * s)),
        })
    };
    let coarse = stencil(step)?;
    let fine = stencil(0.5 * step)?;
    Ok(&fine + &(&fine - &coarse).mapv(|z| z / 3.0))
}
