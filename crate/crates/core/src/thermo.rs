//! Grand-canonical pressure, density and susceptibilities from a spectrum.
//!
//! `P = ε/(β|Λ|) Σ_j ln(1 + ε z e^{-β e_j})`, `ρ = |Λ|^{-1} Σ_j f_j` with the
//! occupation `f = z e^{-βe} / (1 + ε z e^{-βe})`, and
//! `X_n = (q/c)^n ∂_b^n P`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::CMatrix;
use crate::operator::HamiltonianPolynomial;
use crate::spectral::{self, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Bose,
    Fermi,
}

impl Statistics {
    pub fn epsilon(self) -> f64 {
        match self {
            Statistics::Fermi => 1.0,
            Statistics::Bose => -1.0,
        }
    }

    pub fn from_epsilon(eps: i32) -> Result<Self> {
        match eps {
            1 => Ok(Statistics::Fermi),
            -1 => Ok(Statistics::Bose),
            _ => Err(Error::InvalidParameter(format!("epsilon must be +1 or -1 (got {eps})"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoParams {
    pub beta: f64,
    pub z: f64,
    pub statistics: Statistics,
    /// Charge-to-light-speed ratio `q/c`.
    pub charge_ratio: f64,
}

impl ThermoParams {
    pub fn new(beta: f64, z: f64, statistics: Statistics) -> Result<Self> {
        ensure(beta.is_finite() && beta > 0.0, || format!("beta must be positive (got {beta})"))?;
        ensure(z.is_finite() && z > 0.0, || format!("fugacity must be positive (got {z})"))?;
        Ok(Self { beta, z, statistics, charge_ratio: 1.0 })
    }

    pub fn with_charge_ratio(mut self, qc: f64) -> Self {
        self.charge_ratio = qc;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.statistics.epsilon()
    }

    /// Bose gases need `z e^{-β E_0} < 1`; Fermi gases accept any `z > 0`.
    pub fn check_fugacity(&self, ground_state: f64) -> Result<()> {
        if self.statistics == Statistics::Bose {
            let w = self.z * (-self.beta * ground_state).exp();
            if w >= 1.0 - 1e-9 {
                return Err(Error::Fugacity {
                    z: self.z,
                    reason: format!(
                        "Bose statistics require z e^(-beta E0) < 1, got {w:.6} (E0 = {ground_state})"
                    ),
                });
            }
        }
        Ok(())
    }

    /// `z e^{-βe} / (1 + ε z e^{-βe})`.
    pub fn occupation(&self, e: f64) -> f64 {
        let w = self.z * (-self.beta * e).exp();
        w / (1.0 + self.epsilon() * w)
    }

    /// `d f / d e = -β f (1 - ε f)`.
    pub fn occupation_derivative(&self, e: f64) -> f64 {
        let f = self.occupation(e);
        -self.beta * f * (1.0 - self.epsilon() * f)
    }
}

pub const DEFAULT_TRUNCATION: f64 = 1e-18;

/// Pressure with terms `z e^{-βe} < tol` dropped.
pub fn pressure_eigensum_tol(sp: &Spectrum, tp: &ThermoParams, tol: f64) -> Result<f64> {
    ensure(!sp.is_empty(), || "empty spectrum".into())?;
    tp.check_fugacity(sp.ground_state())?;
    let eps = tp.epsilon();
    let terms = sp
        .eigenvalues
        .iter()
        .map(|&e| tp.z * (-tp.beta * e).exp())
        .take_while(|&w| w >= tol)
        .map(|w| (eps * w).ln_1p());
    Ok(eps / (tp.beta * sp.volume) * crate::linalg::compensated_sum_real(terms))
}

pub fn pressure_eigensum(sp: &Spectrum, tp: &ThermoParams) -> Result<f64> {
    pressure_eigensum_tol(sp, tp, DEFAULT_TRUNCATION)
}

pub fn density_eigensum(sp: &Spectrum, tp: &ThermoParams) -> Result<f64> {
    ensure(!sp.is_empty(), || "empty spectrum".into())?;
    tp.check_fugacity(sp.ground_state())?;
    let terms = sp.eigenvalues.iter().map(|&e| tp.occupation(e));
    Ok(crate::linalg::compensated_sum_real(terms) / sp.volume)
}

fn vectors(sp: &Spectrum) -> Result<&CMatrix> {
    sp.vectors
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("eigenvectors required; use spectral::eigensolve".into()))
}

/// Groups of consecutive eigenvalues closer than `tol`.
fn clusters(e: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for j in 1..=e.len() {
        if j == e.len() || e[j] - e[j - 1] > tol {
            out.push(start..j);
            start = j;
        }
    }
    out
}

const CLUSTER_TOL: f64 = 1e-8;

/// `X1 = -(q/c) |Λ|^{-1} Σ_j f_j ∂_b e_j`, with `∂_b e_j = <ψ_j, H'(b) ψ_j>`
/// traced over near-degenerate clusters.
pub fn magnetization_hellmann_feynman(hp: &HamiltonianPolynomial, b: f64, sp: &Spectrum, tp: &ThermoParams) -> Result<f64> {
    tp.check_fugacity(sp.ground_state())?;
    let v = vectors(sp)?;
    let w = hp.derivative_sparse(b).mul_dense(v);
    let de: Vec<f64> = (0..sp.len())
        .map(|j| v.column(j).iter().zip(w.column(j)).map(|(a, b)| (a.conj() * b).re).sum())
        .collect();
    let e = &sp.eigenvalues;
    let terms = clusters(e, CLUSTER_TOL).into_iter().map(|r| {
        let mean = e[r.clone()].iter().sum::<f64>() / r.len() as f64;
        tp.occupation(mean) * de[r].iter().sum::<f64>()
    });
    Ok(-tp.charge_ratio * crate::linalg::compensated_sum_real(terms) / sp.volume)
}

/// Second-order perturbation theory, safe under degeneracy:
/// `X2 = -(q/c)^2 |Λ|^{-1} [2 Σ_j f_j (H2)_jj + Σ_{j,k} |M_jk|^2 Δf_jk]`
/// where `M = ψ^† H'(b) ψ` and `Δf` is the divided difference of `f`.
pub fn susceptibility_sum_over_states(hp: &HamiltonianPolynomial, b: f64, sp: &Spectrum, tp: &ThermoParams) -> Result<f64> {
    tp.check_fugacity(sp.ground_state())?;
    let v = vectors(sp)?;
    let hv = hp.derivative_sparse(b).mul_dense(v);
    let m = crate::linalg::adjoint(v).dot(&hv);
    let e = &sp.eigenvalues;
    let f: Vec<f64> = e.iter().map(|&x| tp.occupation(x)).collect();
    let fp: Vec<f64> = e.iter().map(|&x| tp.occupation_derivative(x)).collect();
    let h2 = hp.h2_diag();

    let mut acc = Vec::with_capacity(e.len() * 2);
    for j in 0..e.len() {
        let h2jj: f64 = v.column(j).iter().zip(h2).map(|(c, d)| c.norm_sqr() * d).sum();
        acc.push(2.0 * f[j] * h2jj);
        let mut row = 0.0;
        for k in 0..e.len() {
            let de = e[j] - e[k];
            let df = if de.abs() < CLUSTER_TOL { 0.5 * (fp[j] + fp[k]) } else { (f[j] - f[k]) / de };
            row += m[(j, k)].norm_sqr() * df;
        }
        acc.push(row);
    }
    let qc = tp.charge_ratio;
    Ok(-qc * qc * crate::linalg::compensated_sum_real(acc) / sp.volume)
}

fn pressure_at(hp: &HamiltonianPolynomial, b: f64, tp: &ThermoParams) -> Result<f64> {
    let sp = spectral::eigenvalues(&hp.assemble(b)?, hp.grid().volume())?;
    pressure_eigensum(&sp, tp)
}

/// Default finite-difference step: `base_n max(1,|b|)` shrunk by the largest
/// gauge magnitude, since `H'` grows with the box.
pub fn default_fd_step(hp: &HamiltonianPolynomial, b: f64, n: usize) -> f64 {
    let amax = hp
        .gauge_components()
        .iter()
        .flat_map(|a| a.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let base = match n {
        1 => 1e-3,
        2 => 2e-3,
        _ => 1e-2,
    };
    base * b.abs().max(1.0) / amax.max(1.0)
}

/// `X_n` from Richardson-extrapolated central differences of the eigensum.
pub fn susceptibility_finite_difference(hp: &HamiltonianPolynomial, b: f64, tp: &ThermoParams, n: usize, step: Option<f64>) -> Result<f64> {
    ensure((1..=3).contains(&n), || format!("finite differences support orders 1..=3 (got {n})"))?;
    let s0 = step.unwrap_or_else(|| default_fd_step(hp, b, n));
    let p = |t: f64| pressure_at(hp, b + t, tp);
    let p0 = if n == 2 { Some(p(0.0)?) } else { None };
    let stencil = |s: f64| -> Result<f64> {
        Ok(match n {
            1 => (p(s)? - p(-s)?) / (2.0 * s),
            2 => (p(s)? - 2.0 * p0.unwrap() + p(-s)?) / (s * s),
            _ => (p(2.0 * s)? - 2.0 * p(s)? + 2.0 * p(-s)? - p(-2.0 * s)?) / (2.0 * s * s * s),
        })
    };
    let coarse = stencil(s0)?;
    let fine = stencil(0.5 * s0)?;
    let d = fine + (fine - coarse) / 3.0;
    Ok(tp.charge_ratio.powi(n as i32) * d)
}

/// How a ledger value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComputationPath {
    Eigensum,
    HellmannFeynman,
    SumOverStates,
    FiniteDifference,
    ContourExact,
    ContourKernel,
    ContourSpectral,
}

impl ComputationPath {
    pub fn as_str(&self) -> &'static str {
        match self {
            ComputationPath::Eigensum => "eigensum",
            ComputationPath::HellmannFeynman => "hellmann-feynman",
            ComputationPath::SumOverStates => "sum-over-states",
            ComputationPath::FiniteDifference => "finite-difference",
            ComputationPath::ContourExact => "contour-exact",
            ComputationPath::ContourKernel => "contour-kernel",
            ComputationPath::ContourSpectral => "contour-spectral",
        }
    }
}

/// One row of the thermodynamic ledger.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThermoRecord {
    pub model: String,
    pub seed: u64,
    pub d: usize,
    #[serde(rename = "L")]
    pub side: f64,
    pub h: f64,
    pub b: f64,
    pub beta: f64,
    pub z: f64,
    pub epsilon: i32,
    pub path: ComputationPath,
    #[serde(rename = "P")]
    pub pressure: Option<f64>,
    pub rho: Option<f64>,
    #[serde(rename = "X1")]
    pub x1: Option<f64>,
    #[serde(rename = "X2")]
    pub x2: Option<f64>,
    #[serde(rename = "X3")]
    pub x3: Option<f64>,
    pub wall_time: f64,
}

/// Spectral evaluation of `(P, ρ, X1, X2)` at one field strength.
pub fn thermo_spectral(hp: &HamiltonianPolynomial, b: f64, tp: &ThermoParams) -> Result<(f64, f64, f64, f64, Spectrum)> {
    let sp = spectral::eigensolve(&hp.assemble(b)?, hp.grid().volume())?;
    let p = pressure_eigensum(&sp, tp)?;
    let rho = density_eigensum(&sp, tp)?;
    let x1 = magnetization_hellmann_feynman(hp, b, &sp, tp)?;
    let x2 = susceptibility_sum_over_states(hp, b, &sp, tp)?;
    Ok((p, rho, x1, x2, sp))
}

/// Runs `f` and returns its value together with the wall time in seconds.
pub fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t = Instant::now();
    let v = f()?;
    Ok((v, t.elapsed().as_secs_f64()))
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_toy() {
        let sp = Spectrum::from_eigenvalues(vec![0.0], 1.0);
        let f = ThermoParams::new(1.0, 0.5, Statistics::Fermi).unwrap();
        let b = ThermoParams::new(1.0, 0.5, Statistics::Bose).unwrap();
        assert!((pressure_eigensum(&sp, &f).unwrap() - 1.5f64.ln()).abs() < 1e-15);
        assert!((pressure_eigensum(&sp, &b).unwrap() + 0.5f64.ln()).abs() < 1e-15);
        assert!((density_eigensum(&sp, &f).unwrap() - 0.5 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn bose_domain() {
        let sp = Spectrum::from_eigenvalues(vec![-0.1], 1.0);
        let tp = ThermoParams::new(1.0, 0.95, Statistics::Bose).unwrap();
        assert!(matches!(pressure_eigensum(&sp, &tp), Err(Error::Fugacity { .. })));
    }

    #[test]
    fn clusters_group_near_degenerate() {
        let c = clusters(&[0.0, 1e-10, 1.0, 2.0, 2.0 + 5e-9], 1e-8);
        assert_eq!(c, vec![0..2, 2..3, 3..5]);
    }

    #[test]
    fn pressure_density_relation() {
        // ρ = z ∂P/∂z β
        let sp = Spectrum::from_eigenvalues(vec![0.3, 0.9, 1.7, 2.2], 2.0);
        let tp = ThermoParams::new(1.3, 0.4, Statistics::Bose).unwrap();
        let dz = 1e-6;
        let up = ThermoParams { z: tp.z + dz, ..tp };
        let dn = ThermoParams { z: tp.z - dz, ..tp };
        let dp = (pressure_eigensum(&sp, &up).unwrap() - pressure_eigensum(&sp, &dn).unwrap()) / (2.0 * dz);
        assert!((tp.beta * tp.z * dp - density_eigensum(&sp, &tp).unwrap()).abs() < 1e-9);
    }
}
