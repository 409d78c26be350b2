//! Resolvent derivatives in `b`, in two forms.
//!
//! *Exact form*: with `S1 = H'(b) R`, `S2 = H2 R`,
//! `∂^n R = n! Σ (-1)^j R S_{c_1} ⋯ S_{c_j}` over compositions
//! `c_1 + … + c_j = n` with parts in {1, 2}.
//!
//! *Phase-factorized form*: with `T1 = Σ_l a_l(x-y) ∘ (P_l(b) R)` and
//! `T2 = |a(x-y)|²/2 ∘ R`,
//! `∂^n R / n! ≈ (iΦ)^n/n! ∘ R + Σ_{k=1}^n 𝒯^{n-k}_k`, where `𝒯^0_k` is the
//! signed sum of chains `R T_{c_1} ⋯ T_{c_j}` and `𝒯^m_k` distributes `m`
//! powers of `iΦ` over the factors of each chain with multinomial weights.
//! On the lattice this holds up to `O(h²)` commutator errors; on the diagonal
//! `Φ` vanishes and the first-order identity is exact at `b = 0`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::linalg::{
    c64, diag_commutator, hadamard, hadamard_c, inverse, left_diag, trace, trace_of_product, CMatrix, I,
};
use crate::operator::{phase_matrix, HamiltonianPolynomial, SparseMatrix};

pub mod identities;

pub use identities::{identity_report, IdentityCheck, IdentityKind, IdentityTolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMode {
    Exact,
    Kernel,
}

/// Compositions of `n` into parts 1 and 2.
pub fn compositions_12(n: usize) -> Vec<Vec<usize>> {
    match n {
        0 => vec![vec![]],
        1 => vec![vec![1]],
        _ => {
            let mut out = Vec::new();
            for mut c in compositions_12(n - 1) {
                c.insert(0, 1);
                out.push(c);
            }
            for mut c in compositions_12(n - 2) {
                c.insert(0, 2);
                out.push(c);
            }
            out
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Precomputed `b`-dependent pieces shared by all spectral parameters.
pub struct ResponseContext {
    b: f64,
    hprime: SparseMatrix,
    h2: Vec<f64>,
    gauge: Vec<Vec<f64>>,
    momenta: Vec<SparseMatrix>,
    phase: Array2<f64>,
    half_a2: Array2<f64>,
    h: CMatrix,
}

impl ResponseContext {
    pub fn new(hp: &HamiltonianPolynomial, b: f64) -> Result<Self> {
        let grid = hp.grid();
        let gauge = hp.gauge_components().to_vec();
        let n = grid.len();
        let momenta = (0..gauge.len())
            .map(|l| {
                let mut p = SparseMatrix::new(n);
                let h = grid.spacing();
                for i in 0..n {
                    for dir in [-1i64, 1] {
                        if let Some(j) = grid.neighbor(i, l, dir) {
                            p.push(i, j, I * (dir as f64 / (2.0 * h)));
                        }
                    }
                    if gauge[l][i] != 0.0 {
                        p.push(i, i, c64::new(b * gauge[l][i], 0.0));
                    }
                }
                p
            })
            .collect();
        let half_a2 = Array2::from_shape_fn((n, n), |(i, j)| {
            0.5 * gauge.iter().map(|a| (a[i] - a[j]).powi(2)).sum::<f64>()
        });
        Ok(Self {
            b,
            hprime: hp.derivative_sparse(b),
            h2: hp.h2_diag().to_vec(),
            gauge,
            momenta,
            phase: phase_matrix(grid),
            half_a2,
            h: hp.assemble(b)?,
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn phase(&self) -> &Array2<f64> {
        &self.phase
    }

    pub fn resolvent(&self, xi: c64) -> Result<CMatrix> {
        let mut a = self.h.clone();
        for i in 0..a.nrows() {
            a[(i, i)] -= xi;
        }
        inverse(&a)
    }

    /// `(S1, S2) = (H'(b) R, H2 R)`.
    pub fn s_operators(&self, r: &CMatrix) -> (CMatrix, CMatrix) {
        (self.hprime.mul_dense(r), left_diag(&self.h2, r))
    }

    /// `S1` rebuilt as `Σ_l a_l P_l(b) R`.
    pub fn s1_kernel_form(&self, r: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(r.raw_dim());
        for (a, p) in self.gauge.iter().zip(&self.momenta) {
            out = out + left_diag(a, &p.mul_dense(r));
        }
        out
    }

    /// `∂_b^n R` from the composition formula.
    pub fn derivative_exact(&self, r: &CMatrix, n: usize) -> CMatrix {
        let (s1, s2) = self.s_operators(r);
        let mut total = CMatrix::zeros(r.raw_dim());
        for comp in compositions_12(n) {
            let mut chain = r.clone();
            for &c in &comp {
                chain = chain.dot(if c == 1 { &s1 } else { &s2 });
            }
            let sign = if comp.len() % 2 == 0 { 1.0 } else { -1.0 };
            total = total + chain.mapv(|z| z * sign);
        }
        total.mapv(|z| z * factorial(n))
    }

    /// `(T1, T2)`.
    pub fn t_operators(&self, r: &CMatrix) -> (CMatrix, CMatrix) {
        let mut t1 = CMatrix::zeros(r.raw_dim());
        for (a, p) in self.gauge.iter().zip(&self.momenta) {
            t1 = t1 + diag_commutator(a, &p.mul_dense(r));
        }
        (t1, hadamard(r, &self.half_a2))
    }

    /// `(iΦ)^m / m! ∘ M`.
    pub fn phase_power(&self, m: usize, mat: &CMatrix) -> CMatrix {
        if m == 0 {
            return mat.clone();
        }
        let f = factorial(m);
        let mut out = mat.clone();
        for ((i, j), v) in out.indexed_iter_mut() {
            *v *= (I * self.phase[(i, j)]).powi(m as i32) / f;
        }
        out
    }

    /// `𝒯^m_k` as a matrix, from `R`, `T1`, `T2`.
    pub fn tcal(&self, r: &CMatrix, t1: &CMatrix, t2: &CMatrix, m: usize, k: usize) -> CMatrix {
        let mut total = CMatrix::zeros(r.raw_dim());
        for comp in compositions_12(k) {
            let sign = if comp.len() % 2 == 0 { 1.0 } else { -1.0 };
            let factors: Vec<&CMatrix> = std::iter::once(r)
                .chain(comp.iter().map(|&c| if c == 1 { t1 } else { t2 }))
                .collect();
            for dist in distributions(m, factors.len()) {
                let mut chain = self.phase_power(dist[0], factors[0]);
                for (f, &mi) in factors[1..].iter().zip(&dist[1..]) {
                    chain = chain.dot(&self.phase_power(mi, f));
                }
                total = total + chain.mapv(|z| z * sign);
            }
        }
        total
    }

    /// `(iΦ)^n/n! ∘ R + Σ_{k=1}^n 𝒯^{n-k}_k`, the phase-factorized
    /// approximation of `∂^n R / n!`.
    pub fn expansion(&self, r: &CMatrix, n: usize) -> CMatrix {
        let (t1, t2) = self.t_operators(r);
        let mut total = self.phase_power(n, r);
        for k in 1..=n {
            total = total + self.tcal(r, &t1, &t2, n - k, k);
        }
        total
    }

    /// `Tr ∂_b^n R(b, ξ)` for `n ∈ {1, 2, 3}`.
    ///
    /// In kernel mode the phase factors drop out of every trace except the
    /// first-order flux of three-factor chains, which gives
    /// `Tr ∂³R / 6 = Tr R(T1 T2 + T2 T1 - T1³)
    ///   + Tr[(iΦ∘R) T1² + R (iΦ∘T1) T1 + R T1 (iΦ∘T1)]`.
    pub fn derivative_trace(&self, h: &CMatrix, xi: c64, n: usize, mode: TraceMode) -> Result<c64> {
        ensure((1..=3).contains(&n), || format!("trace order must be 1..=3 (got {n})"))?;
        let mut a = h.clone();
        for i in 0..a.nrows() {
            a[(i, i)] -= xi;
        }
        let r = inverse(&a)?;
        Ok(match mode {
            TraceMode::Exact => {
                let (s1, s2) = self.s_operators(&r);
                match n {
                    1 => -trace_of_product(&r, &s1),
                    2 => 2.0 * (trace_of_product(&r.dot(&s1), &s1) - trace_of_product(&r, &s2)),
                    _ => {
                        let rs1 = r.dot(&s1);
                        let s1s1 = s1.dot(&s1);
                        6.0 * (-trace_of_product(&rs1, &s1s1)
                            + trace_of_product(&rs1, &s2)
                            + trace_of_product(&r.dot(&s2), &s1))
                    }
                }
            }
            TraceMode::Kernel => {
                let (t1, t2) = self.t_operators(&r);
                match n {
                    1 => -trace_of_product(&r, &t1),
                    2 => 2.0 * (trace_of_product(&r.dot(&t1), &t1) - trace_of_product(&r, &t2)),
                    _ => {
                        let rt1 = r.dot(&t1);
                        let t1t1 = t1.dot(&t1);
                        let u1 = trace_of_product(&rt1, &t2) + trace_of_product(&r.dot(&t2), &t1)
                            - trace_of_product(&rt1, &t1t1);
                        let phr = self.phase_power(1, &r);
                        let pht1 = self.phase_power(1, &t1);
                        let u2 = trace_of_product(&phr, &t1t1)
                            + trace_of_product(&r.dot(&pht1), &t1)
                            + trace_of_product(&rt1, &pht1);
                        6.0 * (u1 + u2)
                    }
                }
            }
        })
    }

    /// Remainder of the second-order phase-factorized expansion around
    /// `b0 = self.b()`:
    /// `R(b0 + δ) - [R̃ + δ 𝒯̃_1 + δ² 𝒯̃_2]` with `R̃ = e^{iδΦ} ∘ R(b0)`,
    /// `T̃_j = e^{iδΦ} ∘ T_j`, `𝒯̃_1 = -R̃ T̃_1`, `𝒯̃_2 = R̃ (T̃_1² - T̃_2)`.
    pub fn remainder(&self, hp: &HamiltonianPolynomial, xi: c64, delta: f64) -> Result<CMatrix> {
        let r0 = self.resolvent(xi)?;
        let (t1, t2) = self.t_operators(&r0);
        let phase = self.phase.mapv(|p| (I * (delta * p)).exp());
        let rt = hadamard_c(&r0, &phase);
        let t1t = hadamard_c(&t1, &phase);
        let t2t = hadamard_c(&t2, &phase);
        let tc1 = rt.dot(&t1t).mapv(|z| -z);
        let tc2 = rt.dot(&(t1t.dot(&t1t) - &t2t));
        let mut a = hp.assemble(self.b + delta)?;
        for i in 0..a.nrows() {
            a[(i, i)] -= xi;
        }
        let exact = inverse(&a)?;
        Ok(exact - rt - tc1.mapv(|z| z * delta) - tc2.mapv(|z| z * delta * delta))
    }

    pub fn trace_resolvent(&self, xi: c64) -> Result<c64> {
        Ok(trace(&self.resolvent(xi)?))
    }
}

/// All ways to write `m` as an ordered sum of `parts` non-negative integers.
fn distributions(m: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in 0..=m {
        for mut rest in distributions(m - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::potentials::Grid;

    #[test]
    fn composition_counts_are_fibonacci() {
        let counts: Vec<usize> = (0..8).map(|n| compositions_12(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 3, 5, 8, 13, 21]);
        assert_eq!(distributions(2, 3).len(), 6);
    }

    #[test]
    fn s1_forms_agree() {
        let g = Grid::new(2, 5.0, 7).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|i| (0.3 * i as f64).sin()).collect();
        let hp = HamiltonianPolynomial::from_values(&g, &v).unwrap();
        let ctx = ResponseContext::new(&hp, 0.6).unwrap();
        let r = ctx.resolvent(c64::new(-1.0, 0.5)).unwrap();
        let (s1, _) = ctx.s_operators(&r);
        assert!(max_abs_diff(&s1, &ctx.s1_kernel_form(&r)) < 1e-13);
    }

    #[test]
    fn exact_first_derivative_matches_difference_quotient() {
        let g = Grid::new(2, 4.0, 5).unwrap();
        let hp = HamiltonianPolynomial::free(&g);
        let b = 0.3;
        let xi = c64::new(-0.5, 0.2);
        let ctx = ResponseContext::new(&hp, b).unwrap();
        let d = ctx.derivative_exact(&ctx.resolvent(xi).unwrap(), 1);
        let s = 1e-5;
        let rp = ResponseContext::new(&hp, b + s).unwrap().resolvent(xi).unwrap();
        let rm = ResponseContext::new(&hp, b - s).unwrap().resolvent(xi).unwrap();
        let fd = (rp - rm).mapv(|z| z / (2.0 * s));
        assert!(max_abs_diff(&d, &fd) < 1e-8);
    }
}
