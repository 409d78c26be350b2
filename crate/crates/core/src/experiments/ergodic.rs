use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::stats::Moments;
use crate::contour::{f_eps, Contour};
use crate::error::{ensure, Error, Result};
use crate::linalg::{c64, inverse, CompensatedSum, I};
use crate::operator::HamiltonianPolynomial;
use crate::potentials::{Grid, PotentialField, PotentialModel};
use crate::spectral::{eigensolve, Spectrum};
use crate::thermo::{Statistics, ThermoParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicPlan {
    pub model: PotentialModel,
    pub dim: usize,
    pub spacing: f64,
    /// Side of the large box.
    pub big_side: f64,
    /// Side of an averaging cell.
    pub window: f64,
    pub b: f64,
    pub beta: f64,
    pub z: f64,
    pub statistics: Statistics,
    pub seeds: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicRecord {
    /// Interior cell averages of the pressure density on one realization.
    pub cell_values: Vec<f64>,
    pub spatial_mean: f64,
    pub spatial_se: f64,
    /// Central-cell averages, one per ensemble seed.
    pub central_values: Vec<f64>,
    pub ensemble_mean: f64,
    pub ensemble_se: f64,
    pub gap: f64,
    pub combined_se: f64,
    /// `gap / combined_se` (0 when both errors vanish and the gap is 0).
    pub sigmas: f64,
    /// Largest deviation of a cell average from the spatial mean.
    pub cell_spread: f64,
    pub spatial_seed: u64,
}

impl ErgodicPlan {
    pub fn grid(&self) -> Result<Grid> {
        let cells = self.big_side / self.spacing;
        ensure((cells - cells.round()).abs() < 1e-9, || "big_side must be a multiple of the spacing".into())?;
        Grid::new(self.dim, self.big_side, cells.round() as usize - 1)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        ensure(self.window > 0.0, || "window must be positive".into())?;
        if self.big_side < 4.0 * self.window - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "interior margin violated: big_side {} < 4 x window {}",
                self.big_side, self.window
            )));
        }
        ensure(self.seeds >= 2, || "need at least two ensemble seeds".into())?;
        ThermoParams::new(self.beta, self.z, self.statistics)?;
        self.grid()?;
        Ok(())
    }

    /// Lower corners of the interior cells: a centred block of whole cells
    /// at distance ≥ window from the boundary.
    pub fn cells(&self) -> Vec<[f64; 3]> {
        let m = ((self.big_side - 2.0 * self.window) / self.window + 1e-9).floor() as usize;
        let start = -0.5 * m as f64 * self.window;
        let mut out = Vec::new();
        let total = m.pow(self.dim as u32);
        for c in 0..total {
            let mut corner = [0.0; 3];
            let mut r = c;
            for a in (0..self.dim).rev() {
                corner[a] = start + (r % m) as f64 * self.window;
                r /= m;
            }
            out.push(corner);
        }
        out
    }
}

/// `(ε/β) Σ_j ln(1 + ε z e^{-β e_j}) |ψ_j(x)|² / h^d` at every node: the
/// diagonal of the contour-integrated pressure kernel, in eigenbasis form.
pub fn pressure_density(sp: &Spectrum, grid: &Grid, tp: &ThermoParams) -> Result<Vec<f64>> {
    tp.check_fugacity(sp.ground_state())?;
    let v = sp
        .vectors
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("eigenvectors required".into()))?;
    let eps = tp.epsilon();
    let g: Vec<f64> = sp
        .eigenvalues
        .iter()
        .map(|&e| eps / tp.beta * (eps * tp.z * (-tp.beta * e).exp()).ln_1p())
        .collect();
    let cell = grid.cell_volume();
    Ok((0..grid.len())
        .map(|x| {
            let mut acc = 0.0;
            for (j, gj) in g.iter().enumerate() {
                acc += gj * v[(x, j)].norm_sqr();
            }
            acc / cell
        })
        .collect())
}

/// The same diagonal from `(ε/β)(i/2π)∮ f_ε(ξ) R(x,x;ξ) dξ`; one dense
/// inverse per node of the contour, so only for small boxes.
pub fn pressure_density_contour(h: &crate::CMatrix, grid: &Grid, tp: &ThermoParams, contour: &Contour) -> Result<Vec<f64>> {
    let n = h.nrows();
    let diags: Vec<Result<Vec<c64>>> = contour
        .nodes
        .par_iter()
        .zip(contour.weights.par_iter())
        .map(|(&xi, &w)| {
            let mut a = h.clone();
            for i in 0..n {
                a[(i, i)] -= xi;
            }
            let r = inverse(&a)?;
            let fw = f_eps(tp, xi) * w;
            Ok((0..n).map(|i| fw * r[(i, i)]).collect())
        })
        .collect();
    let mut acc: Vec<CompensatedSum> = vec![CompensatedSum::default(); n];
    for d in diags {
        for (a, v) in acc.iter_mut().zip(d?) {
            a.add(v);
        }
    }
    let pref = tp.epsilon() / tp.beta * I / (2.0 * PI) / grid.cell_volume();
    Ok(acc.iter().map(|a| (pref * a.value()).re).collect())
}

fn cell_average(grid: &Grid, density: &[f64], corner: [f64; 3], w: f64) -> f64 {
    let tol = 1e-9 * grid.spacing();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, x) in grid.coords().iter().enumerate() {
        if (0..grid.dim()).all(|a| x[a] >= corner[a] - tol && x[a] < corner[a] + w - tol) {
            sum += density[i];
            count += 1;
        }
    }
    sum / count.max(1) as f64
}

fn density_for(plan: &ErgodicPlan, grid: &Grid, seed: u64, tp: &ThermoParams) -> Result<Vec<f64>> {
    let field = PotentialField::sample(grid, &plan.model, seed)?;
    let hp = HamiltonianPolynomial::new(&field)?;
    let sp = eigensolve(&hp.assemble(plan.b)?, grid.volume())?;
    pressure_density(&sp, grid, tp)
}

/// Spatial average over interior cells of one large box against the
/// ensemble average of the central cell over independent seeds.
pub fn run_ergodic_average(plan: &ErgodicPlan) -> Result<ErgodicRecord> {
    plan.validate()?;
    let grid = plan.grid()?;
    let tp = ThermoParams::new(plan.beta, plan.z, plan.statistics)?;
    let seed_of = |r: usize| plan.base_seed ^ r as u64;
    // the spatial realization uses the first index past the ensemble seeds
    let spatial_seed = seed_of(plan.seeds);
    let dens = density_for(plan, &grid, spatial_seed, &tp)?;
    let cell_values: Vec<f64> = plan.cells().iter().map(|&c| cell_average(&grid, &dens, c, plan.window)).collect();
    let sm = Moments::of(&cell_values);

    let half = 0.5 * plan.window;
    let centre = [-half, -half, -half];
    let central: Vec<Result<f64>> = (0..plan.seeds)
        .into_par_iter()
        .map(|r| {
            let d = density_for(plan, &grid, seed_of(r), &tp)?;
            Ok(cell_average(&grid, &d, centre, plan.window))
        })
        .collect();
    let central_values = central.into_iter().collect::<Result<Vec<f64>>>()?;
    let em = Moments::of(&central_values);

    let gap = (sm.mean - em.mean).abs();
    let combined_se = (sm.std_error.powi(2) + em.std_error.powi(2)).sqrt();
    let sigmas = if combined_se > 0.0 {
        gap / combined_se
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let cell_spread = cell_values.iter().fold(0.0f64, |m, v| m.max((v - sm.mean).abs()));
    Ok(ErgodicRecord {
        cell_values,
        spatial_mean: sm.mean,
        spatial_se: sm.std_error,
        central_values,
        ensemble_mean: em.mean,
        ensemble_se: em.std_error,
        gap,
        combined_se,
        sigmas,
        cell_spread,
        spatial_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{build_contour, ContourParams};

    #[test]
    fn density_integrates_to_pressure() {
        let g = Grid::new(2, 4.0, 7).unwrap();
        let hp = HamiltonianPolynomial::free(&g);
        let tp = ThermoParams::new(1.0, 0.4, Statistics::Fermi).unwrap();
        let sp = eigensolve(&hp.assemble(0.3).unwrap(), g.volume()).unwrap();
        let d = pressure_density(&sp, &g, &tp).unwrap();
        let p: f64 = d.iter().sum::<f64>() * g.cell_volume() / g.volume();
        let pe = crate::thermo::pressure_eigensum(&sp, &tp).unwrap();
        assert!((p - pe).abs() < 1e-13 * pe.abs());
    }

    #[test]
    fn contour_diagonal_matches_eigenbasis() {
        let g = Grid::new(2, 3.0, 5).unwrap();
        let hp = HamiltonianPolynomial::free(&g);
        let tp = ThermoParams::new(1.0, 0.4, Statistics::Bose).unwrap();
        let h = hp.assemble(0.5).unwrap();
        let sp = eigensolve(&h, g.volume()).unwrap();
        let c = build_contour(&ContourParams::for_params(sp.ground_state(), &tp), sp.ground_state(), &tp, Some(&sp.eigenvalues), 1e-8).unwrap();
        let a = pressure_density(&sp, &g, &tp).unwrap();
        let b = pressure_density_contour(&h, &g, &tp, &c).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10 * x.abs().max(1e-3), "{x} {y}");
        }
    }

    #[test]
    fn margin_violation_rejected() {
        let plan = ErgodicPlan {
            model: PotentialModel::Zero,
            dim: 2,
            spacing: 0.5,
            big_side: 6.0,
            window: 2.0,
            b: 0.0,
            beta: 1.0,
            z: 0.3,
            statistics: Statistics::Fermi,
            seeds: 4,
            base_seed: 1,
        };
        assert!(matches!(plan.validate(), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn cells_are_interior() {
        let plan = ErgodicPlan {
            model: PotentialModel::Zero,
            dim: 2,
            spacing: 0.5,
            big_side: 10.0,
            window: 2.0,
            b: 0.0,
            beta: 1.0,
            z: 0.3,
            statistics: Statistics::Fermi,
            seeds: 4,
            base_seed: 1,
        };
        let cells = plan.cells();
        assert_eq!(cells.len(), 9);
        for c in cells {
            for a in 0..2 {
                assert!(c[a] >= -3.0 - 1e-12 && c[a] + 2.0 <= 3.0 + 1e-12);
            }
        }
    }
}
