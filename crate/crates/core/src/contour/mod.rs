//! The contour Γ_K around `[E_0, ∞)` and contour-integral representations of
//! pressure and susceptibilities.
//!
//! Γ_K is traversed counter-clockwise around the real half-line: the upper
//! ray `ξ_K + iϑ/(2β) + t e^{iς}` inwards, the upper horizontal segment to
//! `E_K`, the vertical segment at `Re ξ = E_K`, the lower horizontal segment
//! and the lower ray outwards, both rays truncated at `Re ξ = re_max`.
//!
//! Quadrature is composite Gauss–Legendre. Panels are bisected until each
//! is no longer than `panel_ratio` times its distance to the nearest
//! singularity (spectrum hull or logarithm branch point) and no longer than
//! `max_panel / β`, so poles sitting `ϑ/(2β)` below the horizontal segments
//! are resolved with a fixed number of nodes per panel.

mod geometry;
mod quadrature;

pub use quadrature::gauss_legendre;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::{c64, inverse, trace, CMatrix, CompensatedSum, I};
use crate::operator::HamiltonianPolynomial;
use crate::response::{self, TraceMode};
use crate::thermo::{Statistics, ThermoParams};
use geometry::{segment_distance, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourParams {
    /// Real part of the vertical segment, left of the spectrum.
    pub e_k: f64,
    /// Opening parameter: horizontal segments sit at `±ϑ/(2β)`.
    pub theta_k: f64,
    /// Real part where the horizontal segments turn into rays.
    pub xi_k: f64,
    /// Ray angle `ς ∈ (0, π/2)`.
    pub sigma: f64,
    /// Truncation of the rays, `Re ξ <= re_max`.
    pub re_max: f64,
    pub nodes_per_panel: usize,
    /// Panel length relative to its distance from the nearest singularity.
    pub panel_ratio: f64,
    /// Cap on the panel length in units of `1/β`.
    pub max_panel: f64,
}

impl ContourParams {
    /// `E_K = floor - 1`, `ξ_K = floor + 1`, `ϑ = 1`, `ς = π/4`,
    /// `re_max = ξ_K + 45/β`.
    pub fn defaults(spectral_floor: f64, beta: f64) -> Self {
        Self {
            e_k: spectral_floor - 1.0,
            theta_k: 1.0,
            xi_k: spectral_floor + 1.0,
            sigma: PI / 4.0,
            re_max: spectral_floor + 1.0 + 45.0 / beta,
            nodes_per_panel: 16,
            panel_ratio: 2.0,
            max_panel: 4.0,
        }
    }

    /// [`ContourParams::defaults`], except that for Bose statistics the
    /// vertical segment is moved right of the real branch point `ln z / β`
    /// (to the midpoint between it and the spectrum) when the default would
    /// enclose it.
    pub fn for_params(spectral_floor: f64, tp: &ThermoParams) -> Self {
        let mut p = Self::defaults(spectral_floor, tp.beta);
        let x0 = tp.z.ln() / tp.beta;
        if tp.statistics == Statistics::Bose && x0 >= p.e_k && x0 < spectral_floor {
            p.e_k = 0.5 * (x0 + spectral_floor);
        }
        p
    }
}

/// `ln(1 + w)` on the principal branch, accurate for small `|w|`.
pub fn log1p_c(w: c64) -> c64 {
    c64::new(0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p(), w.im.atan2(1.0 + w.re))
}

/// `f_ε(β, z; ξ) = ln(1 + ε z e^{-βξ})`.
pub fn f_eps(tp: &ThermoParams, xi: c64) -> c64 {
    log1p_c((-tp.beta * xi).exp() * (tp.epsilon() * tp.z))
}

/// Logarithm branch points nearest to the real axis.
fn branch_points(tp: &ThermoParams) -> Vec<c64> {
    let x0 = tp.z.ln() / tp.beta;
    let step = PI / tp.beta;
    match tp.statistics {
        Statistics::Fermi => [1.0, -1.0, 3.0, -3.0].iter().map(|m| c64::new(x0, m * step)).collect(),
        Statistics::Bose => [0.0, 2.0, -2.0].iter().map(|m| c64::new(x0, m * step)).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct Contour {
    pub params: ContourParams,
    pub beta: f64,
    pub spectral_floor: f64,
    pub nodes: Vec<c64>,
    /// Complex quadrature weights `w_m dξ`.
    pub weights: Vec<c64>,
    /// Smallest node distance to the known spectrum, when one was supplied.
    pub min_distance: Option<f64>,
    segments: Vec<Segment>,
}

const MIN_LOG_ARGUMENT: f64 = 1e-6;
pub const DEFAULT_ETA: f64 = 1e-8;

/// Builds and validates Γ_K for the given thermodynamic parameters.
///
/// `spectral_floor` is a lower bound of the spectrum; when `eigenvalues` are
/// supplied, every node must keep a distance of at least `eta` from them.
pub fn build_contour(params: &ContourParams, spectral_floor: f64, tp: &ThermoParams, eigenvalues: Option<&[f64]>, eta: f64) -> Result<Contour> {
    let p = *params;
    let beta = tp.beta;
    ensure(p.theta_k > 0.0 && p.theta_k < 2.0 * PI, || format!("theta_k must lie in (0, 2π) (got {})", p.theta_k))?;
    ensure(p.sigma > 0.0 && p.sigma < 0.5 * PI, || format!("sigma must lie in (0, π/2) (got {})", p.sigma))?;
    ensure(p.xi_k > p.e_k, || "xi_k must exceed e_k".into())?;
    ensure(p.re_max > p.xi_k, || "re_max must exceed xi_k".into())?;
    ensure(p.nodes_per_panel >= 2, || "need at least two nodes per panel".into())?;
    ensure(p.panel_ratio > 0.0 && p.max_panel > 0.0, || "panel controls must be positive".into())?;
    if p.e_k >= spectral_floor {
        return Err(Error::Contour(format!(
            "vertical segment at Re = {} does not lie left of the spectrum floor {spectral_floor}",
            p.e_k
        )));
    }
    tp.check_fugacity(spectral_floor)?;

    let half = p.theta_k / (2.0 * beta);
    let opening = |re: f64| if re <= p.xi_k { half } else { half + (re - p.xi_k) * p.sigma.tan() };
    let x0 = tp.z.ln() / beta;
    match tp.statistics {
        Statistics::Fermi => {
            if x0 >= p.e_k && PI / beta <= opening(x0) {
                return Err(Error::BranchPointEnclosed(c64::new(x0, PI / beta)));
            }
        }
        Statistics::Bose => {
            if x0 >= p.e_k {
                return Err(Error::BranchPointEnclosed(c64::new(x0, 0.0)));
            }
        }
    }

    let tmax = (p.re_max - p.xi_k) / p.sigma.cos();
    let up = c64::new(p.xi_k, half);
    let lo = c64::new(p.xi_k, -half);
    let segments = vec![
        Segment::new(up + c64::from_polar(tmax, p.sigma), up),
        Segment::new(up, c64::new(p.e_k, half)),
        Segment::new(c64::new(p.e_k, half), c64::new(p.e_k, -half)),
        Segment::new(c64::new(p.e_k, -half), lo),
        Segment::new(lo, lo + c64::from_polar(tmax, -p.sigma)),
    ];

    let singular = branch_points(tp);
    let hull = Segment::new(c64::new(spectral_floor, 0.0), c64::new(p.re_max + 1e3 * (1.0 + p.re_max.abs()), 0.0));
    let clearance = |s: &Segment| {
        singular
            .iter()
            .map(|&q| s.distance_to_point(q))
            .fold(segment_distance(s, &hull), f64::min)
    };
    let max_len = p.max_panel / beta;
    let mut panels = Vec::new();
    for seg in &segments {
        if clearance(seg) <= 0.0 {
            return Err(Error::Contour("contour touches the spectrum or a branch point".into()));
        }
        subdivide(*seg, &clearance, p.panel_ratio, max_len, &mut panels, 0);
    }

    let (gx, gw) = gauss_legendre(p.nodes_per_panel);
    let mut nodes = Vec::with_capacity(panels.len() * gx.len());
    let mut weights = Vec::with_capacity(nodes.capacity());
    for s in &panels {
        let mid = 0.5 * (s.a + s.b);
        let halfv = 0.5 * (s.b - s.a);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(mid + halfv * *x);
            weights.push(halfv * *w);
        }
    }

    for &xi in &nodes {
        let arg = 1.0 + (-beta * xi).exp() * (tp.epsilon() * tp.z);
        if arg.norm() < MIN_LOG_ARGUMENT {
            return Err(Error::Contour(format!(
                "|1 + ε z e^(-βξ)| = {:.3e} at node {xi} is below {MIN_LOG_ARGUMENT:e}",
                arg.norm()
            )));
        }
    }

    let min_distance = match eigenvalues {
        Some(ev) => {
            let mut best = (f64::INFINITY, 0.0, c64::new(0.0, 0.0));
            for &xi in &nodes {
                for &e in ev {
                    let d = (xi - e).norm();
                    if d < best.0 {
                        best = (d, e, xi);
                    }
                }
            }
            if best.0 < eta {
                return Err(Error::TooCloseToSpectrum { xi: best.2, eigenvalue: best.1, distance: best.0, eta });
            }
            if let Some(&e) = ev.iter().find(|&&e| e < p.e_k || e > p.re_max) {
                if e < p.e_k {
                    return Err(Error::Contour(format!("eigenvalue {e} lies left of the contour")));
                }
            }
            Some(best.0)
        }
        None => None,
    };

    Ok(Contour { params: p, beta, spectral_floor, nodes, weights, min_distance, segments })
}

fn subdivide(s: Segment, clearance: &impl Fn(&Segment) -> f64, ratio: f64, max_len: f64, out: &mut Vec<Segment>, depth: usize) {
    let len = s.length();
    if depth < 40 && (len > max_len || len > ratio * clearance(&s)) {
        let (l, r) = s.split();
        subdivide(l, clearance, ratio, max_len, out, depth + 1);
        subdivide(r, clearance, ratio, max_len, out, depth + 1);
    } else {
        out.push(s);
    }
}

impl Contour {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ_m w_m g(ξ_m)` with `g` evaluated in parallel and summed in node
    /// order (deterministic for any thread count).
    pub fn integrate<F>(&self, g: F) -> Result<c64>
    where
        F: Fn(c64) -> Result<c64> + Sync,
    {
        let vals: Vec<c64> = self.nodes.par_iter().map(|&xi| g(xi)).collect::<Result<_>>()?;
        let mut acc = CompensatedSum::default();
        for (v, w) in vals.iter().zip(&self.weights) {
            acc.add(v * w);
        }
        Ok(acc.value())
    }

    /// Dense sampling of the path (for envelope checks), `per_segment`
    /// points on each of the five pieces.
    pub fn sample_path(&self, per_segment: usize) -> Vec<c64> {
        self.segments
            .iter()
            .flat_map(|s| (0..=per_segment).map(move |k| s.a + (s.b - s.a) * (k as f64 / per_segment as f64)))
            .collect()
    }

    /// Smallest `c` with `|f_ε(ξ)| <= c e^{-β Re ξ}` on a dense sampling
    /// of the path together with the quadrature nodes.
    pub fn decay_constant(&self, tp: &ThermoParams) -> f64 {
        self.sample_path(2000)
            .into_iter()
            .chain(self.nodes.iter().copied())
            .map(|xi| f_eps(tp, xi).norm() * (tp.beta * xi.re).exp())
            .fold(0.0, f64::max)
    }

    /// Worst ratio `|f_ε(ξ_m)| / (c e^{-β Re ξ_m})` over the quadrature nodes.
    pub fn decay_bound_ratio(&self, tp: &ThermoParams, c: f64) -> f64 {
        self.nodes
            .iter()
            .map(|&xi| f_eps(tp, xi).norm() * (tp.beta * xi.re).exp() / c)
            .fold(0.0, f64::max)
    }

    /// Bound on the integral of `|f_ε| · n_states / dist(ξ, R)` over the two
    /// discarded ray tails beyond `re_max`.
    pub fn tail_bound(&self, tp: &ThermoParams, n_states: usize) -> f64 {
        let p = &self.params;
        let half = p.theta_k / (2.0 * self.beta);
        let dist = half + (p.re_max - p.xi_k) * p.sigma.tan();
        let w = tp.z * (-tp.beta * p.re_max).exp();
        let fmax = w / (1.0 - w).max(1e-300);
        2.0 * fmax * n_states as f64 / (dist * tp.beta * p.sigma.cos() * p.sigma.cos())
    }
}

/// Physical value of a contour integral together with diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContourValue {
    pub value: f64,
    /// `|Im| / max(|Re|, tiny)` of the raw complex result.
    pub imag_ratio: f64,
    pub nodes: usize,
    pub min_distance: Option<f64>,
    pub tail_bound: f64,
}

fn finish(raw: c64, contour: &Contour, tail: f64) -> ContourValue {
    ContourValue {
        value: raw.re,
        imag_ratio: raw.im.abs() / raw.re.abs().max(1e-300),
        nodes: contour.len(),
        min_distance: contour.min_distance,
        tail_bound: tail,
    }
}

/// `ε/(β|Λ|) · (i/2π) ∮ f_ε(ξ) Tr (H - ξ)^{-1} dξ` for an explicit matrix.
pub fn pressure_contour_matrix(h: &CMatrix, volume: f64, tp: &ThermoParams, contour: &Contour) -> Result<ContourValue> {
    let n = h.nrows();
    let raw = contour.integrate(|xi| {
        let mut a = h.clone();
        for i in 0..n {
            a[(i, i)] -= xi;
        }
        Ok(f_eps(tp, xi) * trace(&inverse(&a)?))
    })?;
    let pref = tp.epsilon() / (tp.beta * volume) * I / (2.0 * PI);
    let tail = tp.epsilon().abs() / (tp.beta * volume * 2.0 * PI) * contour.tail_bound(tp, n);
    Ok(finish(pref * raw, contour, tail))
}

pub fn pressure_contour(hp: &HamiltonianPolynomial, b: f64, tp: &ThermoParams, contour: &Contour) -> Result<ContourValue> {
    pressure_contour_matrix(&hp.assemble(b)?, hp.grid().volume(), tp, contour)
}

/// The same integral with `Tr R(ξ) = Σ_j 1/(e_j - ξ)` from known eigenvalues.
pub fn pressure_contour_spectral(eigenvalues: &[f64], volume: f64, tp: &ThermoParams, contour: &Contour) -> Result<ContourValue> {
    let raw = contour.integrate(|xi| {
        let mut acc = CompensatedSum::default();
        for &e in eigenvalues {
            acc.add(1.0 / (e - xi));
        }
        Ok(f_eps(tp, xi) * acc.value())
    })?;
    let pref = tp.epsilon() / (tp.beta * volume) * I / (2.0 * PI);
    let tail = 1.0 / (tp.beta * volume * 2.0 * PI) * contour.tail_bound(tp, eigenvalues.len());
    Ok(finish(pref * raw, contour, tail))
}

/// `X_n = (q/c)^n ε/(β|Λ|) (i/2π) ∮ f_ε(ξ) Tr ∂_b^n R(b, ξ) dξ` for
/// `n ∈ {1, 2, 3}`, with the trace from the exact derivative formulas or from
/// the phase-factorized kernel expansion.
pub fn xn_trace_contour(hp: &HamiltonianPolynomial, b: f64, tp: &ThermoParams, contour: &Contour, n: usize, mode: TraceMode) -> Result<ContourValue> {
    ensure((1..=3).contains(&n), || format!("susceptibility order must be 1, 2 or 3 (got {n})"))?;
    let h = hp.assemble(b)?;
    let ctx = response::ResponseContext::new(hp, b)?;
    let raw = contour.integrate(|xi| {
        let tr = ctx.derivative_trace(&h, xi, n, mode)?;
        Ok(f_eps(tp, xi) * tr)
    })?;
    let pref = tp.charge_ratio.powi(n as i32) * tp.epsilon() / (tp.beta * hp.grid().volume()) * I / (2.0 * PI);
    Ok(finish(pref * raw, contour, 0.0))
}

/// Cheap spectral route for `n ∈ {1, 2}`: the derivative traces are
/// evaluated in the eigenbasis of `H(b)`.
pub fn xn_contour_spectral(hp: &HamiltonianPolynomial, b: f64, sp: &crate::spectral::Spectrum, tp: &ThermoParams, contour: &Contour, n: usize) -> Result<ContourValue> {
    ensure((1..=2).contains(&n), || "spectral contour route supports n = 1, 2".into())?;
    let v = sp
        .vectors
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("eigenvectors required".into()))?;
    let m = crate::linalg::adjoint(v).dot(&hp.derivative_sparse(b).mul_dense(v));
    let h2 = hp.h2_diag();
    let e = &sp.eigenvalues;
    let h2jj: Vec<f64> = (0..e.len())
        .map(|j| v.column(j).iter().zip(h2).map(|(c, d)| c.norm_sqr() * d).sum())
        .collect();
    let abs2 = m.mapv(|z| z.norm_sqr());
    let raw = contour.integrate(|xi| {
        let r: Vec<c64> = e.iter().map(|&x| 1.0 / (x - xi)).collect();
        let mut acc = CompensatedSum::default();
        if n == 1 {
            for j in 0..e.len() {
                acc.add(-m[(j, j)] * r[j] * r[j]);
            }
        } else {
            // Tr ∂²R = 2 [Tr(R H' R H' R) - Tr(R H2 R)]
            for j in 0..e.len() {
                let rj2 = r[j] * r[j];
                let mut row = c64::new(0.0, 0.0);
                for k in 0..e.len() {
                    row += abs2[(j, k)] * r[k];
                }
                acc.add(2.0 * rj2 * (row - h2jj[j]));
            }
        }
        Ok(f_eps(tp, xi) * acc.value())
    })?;
    let pref = tp.charge_ratio.powi(n as i32) * tp.epsilon() / (tp.beta * sp.volume) * I / (2.0 * PI);
    Ok(finish(pref * raw, contour, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log1p_small_and_principal() {
        let w = c64::new(1e-12, -3e-13);
        assert!((log1p_c(w) - w).norm() < 1e-24);
        let big = c64::new(-2.0, 1e-3);
        assert!((log1p_c(big) - (1.0 + big).ln()).norm() < 1e-14);
    }

    #[test]
    fn nodes_stay_left_of_re_max_and_off_axis() {
        let tp = ThermoParams::new(2.0, 0.3, Statistics::Fermi).unwrap();
        let c = build_contour(&ContourParams::defaults(0.0, 2.0), 0.0, &tp, None, DEFAULT_ETA).unwrap();
        assert!(c.nodes.iter().all(|x| x.re <= c.params.re_max + 1e-12 && x.im.abs() > 0.0));
        // weights integrate dξ around the closed-at-infinity path: Σ w = end - start
        let total: c64 = c.weights.iter().sum();
        let s = &c.segments;
        assert!((total - (s[4].b - s[0].a)).norm() < 1e-10);
    }

    #[test]
    fn rejects_enclosed_bose_branch_point() {
        let tp = ThermoParams::new(1.0, 0.5, Statistics::Bose).unwrap();
        let p = ContourParams { e_k: -1.0, ..ContourParams::defaults(0.0, 1.0) };
        // ln(0.5) = -0.693 > e_k = -1
        assert!(matches!(build_contour(&p, 0.0, &tp, None, DEFAULT_ETA), Err(Error::BranchPointEnclosed(_))));
    }

    #[test]
    fn single_level_pressure() {
        let h = CMatrix::from_elem((1, 1), c64::new(0.0, 0.0));
        for stats in [Statistics::Fermi, Statistics::Bose] {
            let tp = ThermoParams::new(1.0, 0.25, stats).unwrap();
            let c = build_contour(&ContourParams::defaults(0.0, 1.0), 0.0, &tp, Some(&[0.0]), DEFAULT_ETA).unwrap();
            let p = pressure_contour_matrix(&h, 1.0, &tp, &c).unwrap();
            let eps = tp.epsilon();
            let exact = eps * (1.0 + eps * 0.25f64).ln();
            assert!((p.value - exact).abs() < 1e-12 * exact.abs(), "{stats:?}: {} vs {exact}", p.value);
            assert!(p.imag_ratio < 1e-12);
        }
    }
}
