//! Random and deterministic potentials sampled on a Dirichlet box.
//!
//! Randomness is counter-based: every lattice site (or Poisson cell) owns an
//! independent ChaCha stream keyed by `(seed, model salt, site)`. A field can
//! therefore be evaluated at any point without sampling anything else, which
//! makes translates `V(· + k)` and nested boxes agree bit-for-bit.

mod grid;
mod io;
mod profile;

pub use grid::Grid;
pub use io::{read_field, write_field, write_field_csv, FieldFile};
pub use profile::Profile;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CouplingLaw {
    Uniform { low: f64, high: f64 },
    Bernoulli { p: f64, low: f64, high: f64 },
    Constant { value: f64 },
}

impl CouplingLaw {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            CouplingLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            CouplingLaw::Bernoulli { p, low, high } => {
                if rng.random::<f64>() < p {
                    high
                } else {
                    low
                }
            }
            CouplingLaw::Constant { value } => value,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CouplingLaw::Uniform { low, high } => 0.5 * (low + high),
            CouplingLaw::Bernoulli { p, low, high } => p * high + (1.0 - p) * low,
            CouplingLaw::Constant { value } => value,
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            CouplingLaw::Uniform { low, high } | CouplingLaw::Bernoulli { low, high, .. } => {
                low.abs().max(high.abs())
            }
            CouplingLaw::Constant { value } => value.abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CouplingLaw::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            CouplingLaw::Bernoulli { p, low, high } => {
                (0.0..=1.0).contains(&p) && low.is_finite() && high.is_finite()
            }
            CouplingLaw::Constant { value } => value.is_finite(),
        };
        ensure(ok, || format!("malformed coupling law {self:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialModel {
    Zero,
    /// `V(x) = Σ_j g_j u(x - j)` over `j ∈ Z^d` with i.i.d. couplings.
    Alloy { profile: Profile, coupling: CouplingLaw },
    /// `V(x) = g Σ_j u(x - j)`: the deterministic `Z^d`-periodic case.
    Periodic { profile: Profile, coupling: f64 },
    /// `V(x) = Σ_{y ∈ ω} u(x - y)` for a Poisson cloud of the given intensity.
    Poisson { profile: Profile, intensity: f64 },
    /// Barriers centred on `pitch · Z^d`, each present with probability
    /// `presence`, of height `scale · U · (1 + max(0, |c| - r)^alpha)` with
    /// `U` uniform on (0, 1].
    SparseBarrier {
        profile: Profile,
        pitch: u32,
        presence: f64,
        scale: f64,
        alpha: f64,
    },
}

const SALT_ALLOY: u64 = 0x616c_6c6f_7900_0001;
const SALT_POISSON: u64 = 0x706f_6973_736f_6e02;
const SALT_BARRIER: u64 = 0x6261_7272_6965_7203;

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

/// Injective packing of a site with |j_a| < 2^20 into a stream id.
fn site_key(site: [i64; 3]) -> u64 {
    zigzag(site[0]) | (zigzag(site[1]) << 21) | (zigzag(site[2]) << 42)
}

fn site_rng(seed: u64, salt: u64, site: [i64; 3]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&salt.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(site_key(site));
    rng
}

/// Calls `f(j)` for every integer point `j` with `|x_a - j_a| <= r` on all axes.
fn for_each_site_near(x: &[f64; 3], dim: usize, r: f64, mut f: impl FnMut([i64; 3])) {
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for a in 0..dim {
        lo[a] = (x[a] - r).ceil() as i64;
        hi[a] = (x[a] + r).floor() as i64;
    }
    let mut j = lo;
    loop {
        f(j);
        let mut a = dim;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            if j[a] < hi[a] {
                j[a] += 1;
                break;
            }
            j[a] = lo[a];
        }
    }
}

fn diff(x: &[f64; 3], y: &[f64; 3], dim: usize) -> Vec<f64> {
    (0..dim).map(|a| x[a] - y[a]).collect()
}

fn norm(x: &[f64; 3], dim: usize) -> f64 {
    x[..dim].iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl PotentialModel {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialModel::Zero => "zero",
            PotentialModel::Alloy { .. } => "alloy",
            PotentialModel::Periodic { .. } => "periodic",
            PotentialModel::Poisson { .. } => "poisson",
            PotentialModel::SparseBarrier { .. } => "sparse-barrier",
        }
    }

    pub fn is_random(&self) -> bool {
        !matches!(self, PotentialModel::Zero | PotentialModel::Periodic { .. })
    }

    /// Growth exponent of the potential envelope (zero for bounded models).
    pub fn growth_exponent(&self) -> f64 {
        match self {
            PotentialModel::SparseBarrier { alpha, .. } => *alpha,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialModel::Zero => Ok(()),
            PotentialModel::Alloy { profile, coupling } => {
                profile.validate()?;
                coupling.validate()
            }
            PotentialModel::Periodic { profile, coupling } => {
                profile.validate()?;
                ensure(coupling.is_finite(), || "periodic coupling must be finite".into())
            }
            PotentialModel::Poisson { profile, intensity } => {
                profile.validate()?;
                ensure(profile.height() >= 0.0, || "Poisson profile must be non-negative".into())?;
                ensure(intensity.is_finite() && *intensity >= 0.0, || {
                    format!("Poisson intensity must be non-negative (got {intensity})")
                })
            }
            PotentialModel::SparseBarrier { profile, pitch, presence, scale, alpha } => {
                profile.validate()?;
                ensure(*alpha > 0.0 && *alpha < 1.0 / 3.0, || {
                    format!(
                        "sparse-barrier growth exponent alpha = {alpha} violates the growth \
                         hypothesis 0 < alpha < 1/3 required for the thermodynamic limit"
                    )
                })?;
                ensure(*pitch as f64 >= 2.0 * profile.box_radius(), || {
                    format!(
                        "barrier pitch {pitch} must be at least twice the profile radius {}",
                        profile.box_radius()
                    )
                })?;
                ensure((0.0..=1.0).contains(presence), || "presence must lie in [0, 1]".into())?;
                ensure(*scale >= 0.0 && profile.height() >= 0.0, || "barriers must be non-negative".into())
            }
        }
    }

    /// Value of the realization `seed` at the point `x`.
    pub fn eval(&self, seed: u64, x: &[f64; 3], dim: usize) -> f64 {
        match self {
            PotentialModel::Zero => 0.0,
            PotentialModel::Alloy { profile, coupling } => {
                let mut v = 0.0;
                for_each_site_near(x, dim, profile.box_radius(), |j| {
                    let jf = [j[0] as f64, j[1] as f64, j[2] as f64];
                    let u = profile.eval(&diff(x, &jf, dim));
                    if u != 0.0 {
                        v += coupling.sample(&mut site_rng(seed, SALT_ALLOY, j)) * u;
                    }
                });
                v
            }
            PotentialModel::Periodic { profile, coupling } => {
                let mut v = 0.0;
                for_each_site_near(x, dim, profile.box_radius(), |j| {
                    let jf = [j[0] as f64, j[1] as f64, j[2] as f64];
                    v += coupling * profile.eval(&diff(x, &jf, dim));
                });
                v
            }
            PotentialModel::Poisson { profile, intensity } => {
                let mut v = 0.0;
                let r = profile.box_radius() + 0.5;
                for_each_site_near(x, dim, r, |cell| {
                    for p in poisson_points(seed, *intensity, cell, dim) {
                        v += profile.eval(&diff(x, &p, dim));
                    }
                });
                v
            }
            PotentialModel::SparseBarrier { profile, pitch, presence, scale, alpha } => {
                let s = *pitch as f64;
                let xs = [x[0] / s, x[1] / s, x[2] / s];
                let mut v = 0.0;
                for_each_site_near(&xs, dim, profile.box_radius() / s, |m| {
                    let c = [m[0] as f64 * s, m[1] as f64 * s, m[2] as f64 * s];
                    let u = profile.eval(&diff(x, &c, dim));
                    if u == 0.0 {
                        return;
                    }
                    let mut rng = site_rng(seed, SALT_BARRIER, m);
                    if rng.random::<f64>() >= *presence {
                        return;
                    }
                    let amp = 1.0 - rng.random::<f64>();
                    let envelope = 1.0 + (norm(&c, dim) - profile.box_radius()).max(0.0).powf(*alpha);
                    v += scale * amp * envelope * u;
                });
                v
            }
        }
    }

    /// Ensemble mean of `V(x)` (for the Poisson model, Campbell's formula).
    pub fn mean_at(&self, x: &[f64; 3], dim: usize) -> Option<f64> {
        match self {
            PotentialModel::Zero => Some(0.0),
            PotentialModel::Alloy { profile, coupling } => {
                Some(coupling.mean() * PotentialModel::Periodic { profile: *profile, coupling: 1.0 }.eval(0, x, dim))
            }
            PotentialModel::Periodic { .. } => Some(self.eval(0, x, dim)),
            PotentialModel::Poisson { profile, intensity } => Some(intensity * profile.integral(dim)),
            PotentialModel::SparseBarrier { .. } => None,
        }
    }

    /// Deterministic bound `sup |V|` for bounded models.
    pub fn sup_bound(&self, dim: usize) -> Option<f64> {
        match self {
            PotentialModel::Zero => Some(0.0),
            PotentialModel::Alloy { profile, coupling } => {
                Some(coupling.sup() * profile.sup_norm() * profile.max_overlap(dim) as f64)
            }
            PotentialModel::Periodic { profile, coupling } => {
                Some(coupling.abs() * profile.sup_norm() * profile.max_overlap(dim) as f64)
            }
            _ => None,
        }
    }
}

fn poisson_points(seed: u64, intensity: f64, cell: [i64; 3], dim: usize) -> Vec<[f64; 3]> {
    if intensity <= 0.0 {
        return Vec::new();
    }
    let mut rng = site_rng(seed, SALT_POISSON, cell);
    let n = Poisson::new(intensity).map(|d| d.sample(&mut rng)).unwrap_or(0.0) as usize;
    (0..n)
        .map(|_| {
            let mut p = [0.0; 3];
            for a in 0..dim {
                p[a] = cell[a] as f64 - 0.5 + rng.random::<f64>();
            }
            p
        })
        .collect()
}

/// A sampled realization restricted to the nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub model: PotentialModel,
    pub seed: u64,
    /// Lattice translation `k`: the stored values are `V(x + k)`.
    pub shift: [i64; 3],
}

impl PotentialField {
    pub fn sample(grid: &Grid, model: &PotentialModel, seed: u64) -> Result<Self> {
        Self::sample_shifted(grid, model, seed, [0; 3])
    }

    pub fn zero(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            values: vec![0.0; grid.len()],
            model: PotentialModel::Zero,
            seed: 0,
            shift: [0; 3],
        }
    }

    pub fn sample_shifted(grid: &Grid, model: &PotentialModel, seed: u64, shift: [i64; 3]) -> Result<Self> {
        model.validate()?;
        if let PotentialModel::Alloy { profile, .. } = model {
            ensure(profile.box_radius() <= 0.5 * grid.side(), || {
                format!(
                    "profile radius {} exceeds the box half-side {}",
                    profile.box_radius(),
                    0.5 * grid.side()
                )
            })?;
        }
        if shift[..grid.dim()].iter().any(|k| k.abs() >= 1 << 19) {
            return Err(Error::InvalidParameter("shift too large".into()));
        }
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let mut x = grid.coord(i);
                for a in 0..dim {
                    x[a] += shift[a] as f64;
                }
                model.eval(seed, &x, dim)
            })
            .collect();
        Ok(Self { grid: *grid, values, model: model.clone(), seed, shift })
    }

    /// Realization translated by a further lattice vector `k`.
    pub fn shifted(&self, k: [i64; 3]) -> Result<Self> {
        let mut s = self.shift;
        for a in 0..3 {
            s[a] += k[a];
        }
        Self::sample_shifted(&self.grid, &self.model, self.seed, s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max V(x) / ln(1 + |x|)` over nodes with `|x| >= 1`.
    pub fn log_growth_ratio(&self) -> f64 {
        let dim = self.grid.dim();
        (0..self.grid.len())
            .filter_map(|i| {
                let r = norm(&self.grid.coord(i), dim);
                (r >= 1.0).then(|| self.values[i] / (1.0 + r).ln())
            })
            .fold(0.0, f64::max)
    }

    /// Discrete `sup_x (∫_{|y-x|<1} |V|^p)^{1/p}`.
    pub fn uniform_lp_norm(&self, p: f64) -> f64 {
        let g = &self.grid;
        let hd = g.cell_volume();
        let coords = g.coords();
        let dim = g.dim();
        let mut best = 0.0f64;
        for x in &coords {
            let s: f64 = coords
                .iter()
                .zip(&self.values)
                .filter(|(y, _)| norm(&[x[0] - y[0], x[1] - y[1], x[2] - y[2]], dim) < 1.0)
                .map(|(_, v)| v.abs().powf(p) * hd)
                .sum();
            best = best.max(s.powf(1.0 / p));
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alloy() -> PotentialModel {
        PotentialModel::Alloy {
            profile: Profile::cosine(1.0),
            coupling: CouplingLaw::Uniform { low: -1.0, high: 1.0 },
        }
    }

    #[test]
    fn site_keys_are_injective_on_a_window() {
        let mut seen = std::collections::HashSet::new();
        for a in -20..=20 {
            for b in -20..=20 {
                for c in -3..=3 {
                    assert!(seen.insert(site_key([a, b, c])));
                }
            }
        }
    }

    #[test]
    fn same_seed_same_field_different_seed_differs() {
        let g = Grid::new(2, 6.0, 11).unwrap();
        let a = PotentialField::sample(&g, &alloy(), 7).unwrap();
        let b = PotentialField::sample(&g, &alloy(), 7).unwrap();
        let c = PotentialField::sample(&g, &alloy(), 8).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn sparse_barrier_rejects_large_alpha() {
        let m = PotentialModel::SparseBarrier {
            profile: Profile::cosine(1.0),
            pitch: 4,
            presence: 0.5,
            scale: 1.0,
            alpha: 0.34,
        };
        let err = m.validate().unwrap_err().to_string();
        assert!(err.contains("1/3"), "{err}");
    }

    #[test]
    fn alloy_rejects_profile_wider_than_box() {
        let g = Grid::new(1, 1.0, 5).unwrap();
        assert!(PotentialField::sample(&g, &alloy(), 1).is_err());
    }

    #[test]
    fn poisson_zero_intensity_is_zero() {
        let g = Grid::new(2, 4.0, 5).unwrap();
        let m = PotentialModel::Poisson { profile: Profile::cosine(1.0), intensity: 0.0 };
        assert_eq!(PotentialField::sample(&g, &m, 3).unwrap().max_abs(), 0.0);
    }
}
