//! Structured report of the lattice identities behind the derivative
//! expansions, at one `(b, ξ)`.

use serde::{Deserialize, Serialize};

use super::ResponseContext;
use crate::error::Result;
use crate::linalg::{c64, hermiticity_defect, max_abs, max_abs_diff, trace, CMatrix, I};
use crate::operator::HamiltonianPolynomial;
use crate::spectral::derivative_oracle;

/// `Exact` identities hold to rounding on every grid and are asserted;
/// `Convergent` ones only as `h → 0` and are recorded at the given `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityKind {
    Exact,
    Convergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub anchor: String,
    pub kind: IdentityKind,
    /// Relative max-norm defect (absolute when the reference vanishes).
    pub norm: f64,
    pub threshold: f64,
    pub pass: bool,
    pub h: f64,
    pub b: f64,
    pub xi_re: f64,
    pub xi_im: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityTolerances {
    pub exact: f64,
    /// Complex-step first derivative against the composition formula.
    pub first_derivative: f64,
    /// Richardson second derivative against the composition formula.
    pub second_derivative: f64,
}

impl Default for IdentityTolerances {
    fn default() -> Self {
        Self { exact: 1e-10, first_derivative: 1e-11, second_derivative: 1e-7 }
    }
}

pub(crate) fn relative(defect: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        defect / reference
    } else {
        defect
    }
}

fn conj(m: &CMatrix) -> CMatrix {
    m.mapv(|z| z.conj())
}

/// Off-diagonal part of a matrix.
pub fn off_diagonal(m: &CMatrix) -> CMatrix {
    let mut o = m.clone();
    for i in 0..o.nrows() {
        o[(i, i)] = c64::new(0.0, 0.0);
    }
    o
}

/// Max-norm of the diagonal.
pub fn diag_max(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].norm()).fold(0.0, f64::max)
}

/// `(∂R, iΦ∘R − R T1)` at the context's `b`.
pub fn first_order_pair(ctx: &ResponseContext, r: &CMatrix) -> (CMatrix, CMatrix) {
    (ctx.derivative_exact(r, 1), ctx.expansion(r, 1))
}

/// `(½∂²R, (iΦ)²/2∘R + 𝒯¹₁ + 𝒯⁰₂)`.
pub fn second_order_pair(ctx: &ResponseContext, r: &CMatrix) -> (CMatrix, CMatrix) {
    (ctx.derivative_exact(r, 2).mapv(|z| 0.5 * z), ctx.expansion(r, 2))
}

/// `T1` against `(i/2)(P₂ R P₁ − P₁ R P₂) R` for `d ≥ 2`.
pub fn t1_product_pair(hp: &HamiltonianPolynomial, ctx: &ResponseContext, r: &CMatrix) -> Option<(CMatrix, CMatrix)> {
    if hp.grid().dim() < 2 {
        return None;
    }
    let (t1, _) = ctx.t_operators(r);
    let p1 = hp.momentum(0, ctx.b());
    let p2 = hp.momentum(1, ctx.b());
    let comm = p2.dot(r).dot(&p1) - p1.dot(r).dot(&p2);
    Some((t1, comm.dot(r).mapv(|z| 0.5 * I * z)))
}

/// Evaluates every identity at `(b, ξ)`.
pub fn identity_report(hp: &HamiltonianPolynomial, b: f64, xi: c64, tol: &IdentityTolerances) -> Result<Vec<IdentityCheck>> {
    let h = hp.grid().spacing();
    let mut out = Vec::new();
    let mut push = |name: &str, anchor: &str, kind: IdentityKind, norm: f64, threshold: f64| {
        out.push(IdentityCheck {
            name: name.into(),
            anchor: anchor.into(),
            kind,
            norm,
            threshold,
            pass: norm <= threshold,
            h,
            b,
            xi_re: xi.re,
            xi_im: xi.im,
        });
    };
    let exact_at_zero = if b == 0.0 { IdentityKind::Exact } else { IdentityKind::Convergent };
    let conv_threshold = |k: IdentityKind| if k == IdentityKind::Exact { tol.exact } else { f64::INFINITY };

    let hb = hp.assemble(b)?;
    let hm = hp.assemble(-b)?;
    let h0 = hp.assemble(0.0)?;
    let scale = max_abs(&hb);
    push("hermiticity", "Hermitian operator family", IdentityKind::Exact, relative(hermiticity_defect(&hb), scale), tol.exact);
    push("time-reversal", "conj H(b) = H(-b)", IdentityKind::Exact, relative(max_abs_diff(&conj(&hb), &hm), scale), tol.exact);

    let mut sq = CMatrix::zeros(hb.raw_dim());
    for l in 0..hp.grid().dim().min(2) {
        let (pb, p0) = (hp.momentum(l, b), hp.momentum(l, 0.0));
        sq = sq + pb.dot(&pb).mapv(|z| 0.5 * z) - p0.dot(&p0).mapv(|z| 0.5 * z);
    }
    push(
        "covariant-momentum",
        "H(b) - H(0) = sum_l (P_l(b)^2 - P_l(0)^2)/2",
        IdentityKind::Exact,
        relative(max_abs_diff(&(&hb - &h0), &sq), scale),
        tol.exact,
    );

    let ctx = ResponseContext::new(hp, b)?;
    let r = ctx.resolvent(xi)?;
    let d1 = ctx.derivative_exact(&r, 1);
    let d2 = ctx.derivative_exact(&r, 2);
    let o1 = derivative_oracle(hp, b, xi, 1)?;
    let o2 = derivative_oracle(hp, b, xi, 2)?;
    push(
        "first-derivative",
        "exact derivative expansion, n = 1 (complex step)",
        IdentityKind::Exact,
        relative(max_abs_diff(&d1, &o1), max_abs(&o1)),
        tol.first_derivative,
    );
    push(
        "second-derivative",
        "exact derivative expansion, n = 2 (Richardson)",
        IdentityKind::Exact,
        relative(max_abs_diff(&d2, &o2), max_abs(&o2)),
        tol.second_derivative,
    );

    let (s1, _) = ctx.s_operators(&r);
    push(
        "s1-kernel-form",
        "S1 = sum_l a_l P_l(b) R",
        IdentityKind::Exact,
        relative(max_abs_diff(&s1, &ctx.s1_kernel_form(&r)), max_abs(&s1)),
        tol.exact,
    );

    let (t1, t2) = ctx.t_operators(&r);
    push("t-diagonal", "diag T1 = diag T2 = 0", IdentityKind::Exact, diag_max(&t1).max(diag_max(&t2)), 0.0);
    let tc = ctx.tcal(&r, &t1, &t2, 0, 1);
    push(
        "tcal-0-1",
        "T^0_1 = -R T1",
        IdentityKind::Exact,
        relative(max_abs_diff(&tc, &r.dot(&t1).mapv(|z| -z)), max_abs(&tc)),
        tol.exact,
    );
    let phi = ctx.phase();
    let mut anti = 0.0f64;
    for i in 0..phi.nrows() {
        anti = anti.max(phi[(i, i)].abs());
        for j in 0..i {
            anti = anti.max((phi[(i, j)] + phi[(j, i)]).abs());
        }
    }
    push("phase-antisymmetry", "phi(x,x) = 0, phi(x,y) = -phi(y,x)", IdentityKind::Exact, anti, 0.0);

    let (lhs, rhs) = first_order_pair(&ctx, &r);
    let ref1 = max_abs(&lhs);
    push(
        "phase-factorized-1-diagonal",
        "phase-factorized kernel identity, diagonal",
        exact_at_zero,
        relative(diag_max(&(&lhs - &rhs)), ref1),
        conv_threshold(exact_at_zero),
    );
    push(
        "phase-factorized-1-offdiagonal",
        "phase-factorized kernel identity, off-diagonal",
        exact_at_zero,
        relative(max_abs(&off_diagonal(&(&lhs - &rhs))), ref1),
        conv_threshold(exact_at_zero),
    );
    let (l2, r2) = second_order_pair(&ctx, &r);
    push(
        "phase-factorized-2",
        "phase-factorized kernel identity, second order",
        IdentityKind::Convergent,
        relative(max_abs_diff(&l2, &r2), max_abs(&l2)),
        f64::INFINITY,
    );
    let tr_exact = trace(&lhs);
    let tr_kernel = -crate::linalg::trace_of_product(&r, &t1);
    push(
        "trace-route-1",
        "Tr dR/db = -Tr(R T1)",
        exact_at_zero,
        relative((tr_exact - tr_kernel).norm(), ref1 * lhs.nrows() as f64),
        conv_threshold(exact_at_zero),
    );
    if let Some((a, bm)) = t1_product_pair(hp, &ctx, &r) {
        push(
            "t1-product",
            "T1 = (i/2)(P2 R P1 - P1 R P2) R",
            exact_at_zero,
            relative(max_abs_diff(&a, &bm), max_abs(&a)),
            conv_threshold(exact_at_zero),
        );
    }
    let rem = ctx.remainder(hp, xi, 0.0)?;
    push(
        "remainder-at-zero",
        "second-order remainder vanishes at zero field increment",
        IdentityKind::Exact,
        relative(max_abs(&rem), max_abs(&r)),
        tol.exact,
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Grid;

    #[test]
    fn one_dimensional_identities_are_trivially_exact() {
        let g = Grid::new(1, 5.0, 9).unwrap();
        let hp = HamiltonianPolynomial::free(&g);
        let rep = identity_report(&hp, 0.7, c64::new(-1.0, 0.3), &IdentityTolerances::default()).unwrap();
        for c in &rep {
            assert!(c.pass, "{c:?}");
        }
        let magnetic = ["phase-factorized-1-offdiagonal", "t-diagonal", "tcal-0-1", "phase-antisymmetry"];
        for c in rep.iter().filter(|c| magnetic.contains(&c.name.as_str())) {
            assert_eq!(c.norm, 0.0, "{}", c.name);
        }
    }

    #[test]
    fn two_dimensional_exact_identities_pass_at_zero_field() {
        let g = Grid::new(2, 3.0, 5).unwrap();
        let hp = HamiltonianPolynomial::free(&g);
        let rep = identity_report(&hp, 0.0, c64::new(-1.0, 0.5), &IdentityTolerances::default()).unwrap();
        for c in rep.iter().filter(|c| c.kind == IdentityKind::Exact) {
            assert!(c.pass, "{c:?}");
        }
    }
}
