use serde::{Deserialize, Serialize};

use super::stats::loglog_slope;
use crate::error::{ensure, Error, Result};
use crate::linalg::c64;
use crate::operator::HamiltonianPolynomial;
use crate::potentials::{Grid, PotentialField, PotentialModel};
use crate::spectral::linear_fit;
use crate::spectral::resolvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryPlan {
    pub model: PotentialModel,
    pub dim: usize,
    pub spacing: f64,
    /// Sides of the small boxes.
    pub sides: Vec<f64>,
    /// The large box has side `L + 2 pad`.
    pub pad: f64,
    pub b: f64,
    pub xi: c64,
    /// Depths, in units of the spacing, for the depth profile.
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_depths() -> Vec<usize> {
    (2..=8).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    #[serde(rename = "L")]
    pub side: f64,
    pub n_small: usize,
    pub n_big: usize,
    /// `|Σ_{x ∈ Λ_L} h^d (K_L − K_big)(x,x)| / |Λ_L|`.
    pub normalized_trace_diff: f64,
    /// Largest `|K_L − K_big|(x,x)` over the small box.
    pub max_diag_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRecord {
    pub rows: Vec<BoundaryRow>,
    /// Log–log slope of the normalized trace difference against L.
    pub exponent: f64,
    pub exponent_residual: f64,
    /// `(κ, max_{d(x) ≥ κ} |K_L − K_big|(x,x))` on the largest small box.
    pub depth_profile: Vec<(f64, f64)>,
    pub depth_monotone: bool,
    /// Exponential rate fitted to the depth profile, expressed per unit of
    /// `d(x) + d(y)` (half the slope on the diagonal).
    pub depth_rate: f64,
}

/// Diagonal kernel difference `K_small(x,x) − K_big(x,x)` on the small box,
/// with the depth `d(x)` of each node.
pub fn diagonal_difference(small: &Grid, big: &Grid, model: &PotentialModel, seed: u64, b: f64, xi: c64) -> Result<Vec<(f64, c64)>> {
    let emb = small.embedding_into(big).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "grids are not nested (n = {} in n = {}, spacings {} and {})",
            small.n_per_side(),
            big.n_per_side(),
            small.spacing(),
            big.spacing()
        ))
    })?;
    let ks = kernel_diagonal(small, model, seed, b, xi)?;
    let kb = if small == big { ks.clone() } else { kernel_diagonal(big, model, seed, b, xi)? };
    Ok((0..small.len()).map(|i| (small.boundary_distance(i), ks[i] - kb[emb[i]])).collect())
}

fn kernel_diagonal(grid: &Grid, model: &PotentialModel, seed: u64, b: f64, xi: c64) -> Result<Vec<c64>> {
    let field = PotentialField::sample(grid, model, seed)?;
    let hp = HamiltonianPolynomial::new(&field)?;
    let r = resolvent(&hp.assemble(b)?, xi, grid.cell_volume())?;
    Ok((0..grid.len()).map(|i| r.kernel(i, i)).collect())
}

fn grid_for(dim: usize, side: f64, h: f64) -> Result<Grid> {
    let cells = side / h;
    ensure((cells - cells.round()).abs() < 1e-9 && cells.round() >= 2.0, || {
        format!("side {side} is not a multiple of the spacing {h}")
    })?;
    Grid::new(dim, side, cells.round() as usize - 1)
}

pub fn depth_profile(diff: &[(f64, c64)], h: f64, depths: &[usize]) -> Vec<(f64, f64)> {
    depths
        .iter()
        .map(|&k| {
            let kappa = k as f64 * h;
            let m = diff
                .iter()
                .filter(|(d, _)| *d >= kappa - 1e-9 * h)
                .fold(0.0f64, |m, (_, v)| m.max(v.norm()));
            (kappa, m)
        })
        .collect()
}

/// Nested-box boundary-layer probe.
pub fn run_boundary_layer_probe(plan: &BoundaryPlan) -> Result<BoundaryRecord> {
    plan.model.validate()?;
    ensure(plan.pad >= 0.0, || "pad must be non-negative".into())?;
    ensure(!plan.sides.is_empty(), || "empty L ladder".into())?;
    let mut sides = plan.sides.clone();
    sides.sort_by(f64::total_cmp);
    let h = plan.spacing;
    let mut rows = Vec::new();
    let mut last = Vec::new();
    for &l in &sides {
        let small = grid_for(plan.dim, l, h)?;
        let big = grid_for(plan.dim, l + 2.0 * plan.pad, h)?;
        let diff = diagonal_difference(&small, &big, &plan.model, plan.seed, plan.b, plan.xi)?;
        let total: c64 = diff.iter().map(|(_, v)| *v).sum::<c64>() * small.cell_volume();
        rows.push(BoundaryRow {
            side: l,
            n_small: small.n_per_side(),
            n_big: big.n_per_side(),
            normalized_trace_diff: total.norm() / small.volume(),
            max_diag_diff: diff.iter().fold(0.0f64, |m, (_, v)| m.max(v.norm())),
        });
        last = diff;
    }
    let (exponent, exponent_residual) = if rows.len() >= 2 {
        loglog_slope(&rows.iter().map(|r| (r.side, r.normalized_trace_diff)).collect::<Vec<_>>()).unwrap_or((f64::NAN, f64::NAN))
    } else {
        (f64::NAN, f64::NAN)
    };
    let profile = depth_profile(&last, h, &plan.depths);
    let depth_monotone = profile.windows(2).all(|w| w[1].1 < w[0].1);
    let logs: Vec<(f64, f64)> = profile.iter().filter(|p| p.1 > 0.0).map(|&(k, m)| (k, m.ln())).collect();
    let depth_rate = if logs.len() >= 2 { -0.5 * linear_fit(&logs)?.0 } else { f64::NAN };
    Ok(BoundaryRecord { rows, exponent, exponent_residual, depth_profile: profile, depth_monotone, depth_rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_boxes_give_zero() {
        let g = Grid::new(2, 4.0, 7).unwrap();
        let d = diagonal_difference(&g, &g, &PotentialModel::Zero, 0, 0.3, c64::new(-1.0, 0.5)).unwrap();
        assert!(d.iter().all(|(_, v)| *v == c64::new(0.0, 0.0)));
    }

    #[test]
    fn non_nested_rejected() {
        let a = Grid::new(1, 4.0, 7).unwrap();
        let b = Grid::new(1, 6.0, 10).unwrap();
        assert!(diagonal_difference(&a, &b, &PotentialModel::Zero, 0, 0.0, c64::new(-1.0, 0.0)).is_err());
    }
}
