use serde::{Deserialize, Serialize};

use super::ResolventKernel;
use crate::error::{Error, Result};
use crate::potentials::Grid;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayOptions {
    /// Minimum pair separation, in units of the spacing.
    pub min_separation: f64,
    /// Maximum pair separation (absolute); `None` for no cap.
    pub max_separation: Option<f64>,
    /// Both points must be at least this far (in spacings) from the boundary.
    pub boundary_margin: f64,
    /// Entries below this fraction of the largest entry are treated as noise.
    pub noise_floor: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { min_separation: 3.0, max_separation: None, boundary_margin: 2.0, noise_floor: 1e-13 }
    }
}

/// Least-squares fit of `ln(|K(x,y)| |x-y|^{(d-1)/2}) ≈ c - γ |x-y|`
/// on shell averages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub gamma: f64,
    pub intercept: f64,
    /// RMS residual of the shell means around the fitted line.
    pub residual: f64,
    pub pairs: usize,
    pub shells: usize,
}

fn shells(kernel: &ResolventKernel, grid: &Grid, opts: &DecayOptions, log_form: bool) -> (Vec<(f64, f64)>, usize) {
    let h = grid.spacing();
    let n = grid.len();
    let d = grid.dim() as f64;
    let margin = opts.boundary_margin * h - 1e-12;
    let inner: Vec<usize> = (0..n).filter(|&i| grid.boundary_distance(i) >= margin).collect();
    let peak = kernel.matrix.iter().fold(0.0f64, |m, z| m.max(z.norm())) / kernel.cell_volume;
    let floor = peak * opts.noise_floor;
    let rmin = opts.min_separation * h - 1e-12;
    let rmax = opts.max_separation.unwrap_or(f64::INFINITY);

    let mut bins: std::collections::BTreeMap<i64, (f64, f64, usize)> = Default::default();
    let mut pairs = 0;
    for (a, &i) in inner.iter().enumerate() {
        for &j in &inner[a + 1..] {
            let r = grid.distance(i, j);
            if r < rmin || r > rmax {
                continue;
            }
            let k = kernel.kernel(i, j).norm();
            if k <= floor || k == 0.0 {
                continue;
            }
            let y = if log_form { (k * r.powf(0.5 * (d - 1.0))).ln() } else { k };
            let e = bins.entry((r / h).round() as i64).or_insert((0.0, 0.0, 0));
            e.0 += r;
            e.1 += y;
            e.2 += 1;
            pairs += 1;
        }
    }
    let pts = bins.values().map(|&(r, y, c)| (r / c as f64, y / c as f64)).collect();
    (pts, pairs)
}

/// Shell-averaged `|K|` against separation, for monotonicity checks.
pub fn shell_profile(kernel: &ResolventKernel, grid: &Grid, opts: &DecayOptions) -> Vec<(f64, f64)> {
    shells(kernel, grid, opts, false).0
}

pub fn fit_kernel_decay(kernel: &ResolventKernel, grid: &Grid, opts: &DecayOptions) -> Result<DecayFit> {
    let (pts, pairs) = shells(kernel, grid, opts, true);
    if pts.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "only {} distance shells survive the separation/boundary filters",
            pts.len()
        )));
    }
    let (slope, intercept, residual) = linear_fit(&pts)?;
    Ok(DecayFit { gamma: -slope, intercept, residual, pairs, shells: pts.len() })
}

/// Ordinary least squares `y = a x + c`; returns `(a, c, rms residual)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points".into()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("abscissae are all equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    let c = my - a * mx;
    let rms = (pts.iter().map(|p| (p.1 - a * p.0 - c).powi(2)).sum::<f64>() / n).sqrt();
    Ok((a, c, rms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_exact_line() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let (a, c, r) = linear_fit(&pts).unwrap();
        assert!((a + 0.5).abs() < 1e-14 && (c - 2.0).abs() < 1e-14 && r < 1e-14);
    }
}
