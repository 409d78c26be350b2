//! Eigen-decomposition, resolvent kernels, an independent complex-step
//! oracle for `b`-derivatives of the resolvent, and exponential decay fits.

mod decay;
mod oracle;

pub use decay::{fit_kernel_decay, linear_fit, shell_profile, DecayFit, DecayOptions};
pub use oracle::derivative_oracle;

use ndarray_linalg::{Eigh, EigValsh, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, hermiticity_defect, identity, inverse, max_abs, CMatrix};

fn check_hermitian(h: &CMatrix) -> Result<()> {
    let defect = hermiticity_defect(h);
    if defect > 1e-12 * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Eigenvalues in ascending order, optionally with orthonormal eigenvectors
/// (columns), plus the box volume needed for densities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub vectors: Option<CMatrix>,
    pub volume: f64,
}

impl Spectrum {
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, volume: f64) -> Self {
        let mut e = eigenvalues;
        e.sort_by(f64::total_cmp);
        Self { eigenvalues: e, vectors: None, volume }
    }

    pub fn ground_state(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Distance from `xi` to the nearest eigenvalue, with that eigenvalue.
    pub fn distance_to(&self, xi: c64) -> (f64, f64) {
        self.eigenvalues
            .iter()
            .map(|&e| ((xi - e).norm(), e))
            .fold((f64::INFINITY, f64::NAN), |a, b| if b.0 < a.0 { b } else { a })
    }

    /// `max_j ||H ψ_j - e_j ψ_j||`.
    pub fn residual(&self, h: &CMatrix) -> Option<f64> {
        let v = self.vectors.as_ref()?;
        let hv = h.dot(v);
        let mut worst = 0.0f64;
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            let r = hv.column(j).iter().zip(v.column(j)).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>();
            worst = worst.max(r.sqrt());
        }
        Some(worst)
    }
}

/// Full Hermitian eigen-decomposition.
pub fn eigensolve(h: &CMatrix, volume: f64) -> Result<Spectrum> {
    check_hermitian(h)?;
    let (e, v) = h.eigh(UPLO::Lower)?;
    // LAPACK sees the row-major buffer as the transpose, i.e. conj(H) for a
    // Hermitian H; its eigenvectors are the conjugates of ours.
    let v = if h.is_standard_layout() { v.mapv(|z| z.conj()) } else { v };
    Ok(Spectrum { eigenvalues: e.to_vec(), vectors: Some(v), volume })
}

/// Eigenvalues only (cheaper; used by finite-difference stencils).
pub fn eigenvalues(h: &CMatrix, volume: f64) -> Result<Spectrum> {
    check_hermitian(h)?;
    let e = h.eigvalsh(UPLO::Lower)?;
    Ok(Spectrum { eigenvalues: e.to_vec(), vectors: None, volume })
}

/// Resolvent `(H - ξ)^{-1}` together with the cell volume `h^d` that
/// converts matrix entries into integral-kernel values.
#[derive(Debug, Clone)]
pub struct ResolventKernel {
    pub matrix: CMatrix,
    pub xi: c64,
    pub cell_volume: f64,
}

impl ResolventKernel {
    pub fn kernel(&self, i: usize, j: usize) -> c64 {
        self.matrix[(i, j)] / self.cell_volume
    }

    /// `max |(H - ξ) R - 1|`.
    pub fn residual(&self, h: &CMatrix) -> f64 {
        let mut a = h.clone();
        for i in 0..a.nrows() {
            a[(i, i)] -= self.xi;
        }
        let prod = a.dot(&self.matrix) - identity(a.nrows());
        max_abs(&prod)
    }
}

pub fn resolvent(h: &CMatrix, xi: c64, cell_volume: f64) -> Result<ResolventKernel> {
    let mut a = h.clone();
    for i in 0..a.nrows() {
        a[(i, i)] -= xi;
    }
    Ok(ResolventKernel { matrix: inverse(&a)?, xi, cell_volume })
}

/// Like [`resolvent`], but refuses spectral parameters closer than `eta` to
/// the known spectrum.
pub fn resolvent_checked(h: &CMatrix, xi: c64, cell_volume: f64, spectrum: &Spectrum, eta: f64) -> Result<ResolventKernel> {
    let (distance, eigenvalue) = spectrum.distance_to(xi);
    if distance < eta {
        return Err(Error::TooCloseToSpectrum { xi, eigenvalue, distance, eta });
    }
    resolvent(h, xi, cell_volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::HamiltonianPolynomial;
    use crate::potentials::Grid;

    #[test]
    fn eigensolve_residual_and_order() {
        let g = Grid::new(2, 5.0, 6).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|i| (i as f64).cos()).collect();
        let hp = HamiltonianPolynomial::from_values(&g, &v).unwrap();
        let h = hp.assemble(0.8).unwrap();
        let s = eigensolve(&h, g.volume()).unwrap();
        assert!(s.residual(&h).unwrap() < 1e-10);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = identity(3);
        m[(0, 1)] = c64::new(1.0, 0.0);
        assert!(matches!(eigensolve(&m, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn resolvent_guard() {
        let m = identity(2);
        let s = Spectrum::from_eigenvalues(vec![1.0, 1.0], 1.0);
        let err = resolvent_checked(&m, c64::new(1.0, 1e-9), 1.0, &s, 1e-6).unwrap_err();
        assert!(matches!(err, Error::TooCloseToSpectrum { .. }));
        let r = resolvent_checked(&m, c64::new(0.0, 1.0), 1.0, &s, 1e-6).unwrap();
        assert!(r.residual(&m) < 1e-14);
    }
}
