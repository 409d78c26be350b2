//! Run configuration: a TOML document with fixed sections. Unknown keys are
//! rejected everywhere.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use diamag::contour::ContourParams;
use diamag::potentials::{Grid, PotentialModel};
use diamag::thermo::{Statistics, ThermoParams};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Thermo,
    Identities,
    ContourCheck,
    Sweep,
    Ensemble,
    Ergodic,
    Boundary,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Thermo => "thermo",
            Command::Identities => "identities",
            Command::ContourCheck => "contour-check",
            Command::Sweep => "sweep",
            Command::Ensemble => "ensemble",
            Command::Ergodic => "ergodic",
            Command::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_per_side: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
}

impl GridSpec {
    /// Any two of `side`, `n_per_side`, `spacing` fix the grid.
    pub fn grid(&self) -> Result<Grid, Failure> {
        let g = match (self.side, self.n_per_side, self.spacing) {
            (Some(l), Some(n), None) => Grid::new(self.dim, l, n),
            (None, Some(n), Some(h)) => Grid::with_spacing(self.dim, h, n),
            (Some(l), None, Some(h)) => {
                let cells = l / h;
                if (cells - cells.round()).abs() > 1e-9 {
                    return Err(Failure::Config(format!("grid.side {l} is not a multiple of grid.spacing {h}")));
                }
                Grid::new(self.dim, l, cells.round() as usize - 1)
            }
            (Some(l), Some(n), Some(h)) => {
                let g = Grid::new(self.dim, l, n).map_err(Failure::config)?;
                if (g.spacing() - h).abs() > 1e-12 * h {
                    return Err(Failure::Config(format!(
                        "grid.side, grid.n_per_side and grid.spacing are inconsistent ({} vs {h})",
                        g.spacing()
                    )));
                }
                Ok(g)
            }
            _ => return Err(Failure::Config("grid needs two of side, n_per_side, spacing".into())),
        };
        g.map_err(Failure::config)
    }

    pub fn spacing(&self) -> Result<f64, Failure> {
        match self.spacing {
            Some(h) => Ok(h),
            None => Ok(self.grid()?.spacing()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    #[serde(default = "zero_field")]
    pub fields: Vec<f64>,
    pub betas: Vec<f64>,
    pub fugacities: Vec<f64>,
    #[serde(default = "fermi")]
    pub statistics: Vec<Statistics>,
    #[serde(default = "unit")]
    pub charge_ratio: f64,
}

fn zero_field() -> Vec<f64> {
    vec![0.0]
}
fn fermi() -> Vec<Statistics> {
    vec![Statistics::Fermi]
}
fn unit() -> f64 {
    1.0
}

impl Physics {
    pub fn points(&self) -> Result<Vec<ThermoParams>, Failure> {
        let mut out = Vec::new();
        for &beta in &self.betas {
            for &z in &self.fugacities {
                for &s in &self.statistics {
                    out.push(ThermoParams::new(beta, z, s).map_err(Failure::config)?.with_charge_ratio(self.charge_ratio));
                }
            }
        }
        if out.is_empty() {
            return Err(Failure::Config("physics needs at least one (beta, z, statistics) point".into()));
        }
        Ok(out)
    }
}

/// Optional replacements for the default contour parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_per_panel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_panel: Option<f64>,
}

impl ContourOverrides {
    pub fn apply(&self, mut p: ContourParams) -> ContourParams {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { p.$f = v; })* };
        }
        set!(e_k, theta_k, xi_k, sigma, re_max, nodes_per_panel, panel_ratio, max_panel);
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default)]
    pub base: u64,
    #[serde(default = "one_realization")]
    pub realizations: usize,
}

fn one_realization() -> usize {
    1
}

impl Default for Seeds {
    fn default() -> Self {
        Self { base: 0, realizations: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative agreement between computation paths.
    #[serde(default = "path_tol")]
    pub path: f64,
    /// Exact lattice identities.
    #[serde(default = "identity_tol")]
    pub identity: f64,
    /// Two different contours on the same pressure.
    #[serde(default = "contour_tol")]
    pub contour_agreement: f64,
    /// `|X1(b = 0)| <= zero_field · scale`.
    #[serde(default = "zero_field_tol")]
    pub zero_field: f64,
    /// Allowed distance of the boundary-layer exponent from -1.
    #[serde(default = "exponent_band")]
    pub exponent_band: f64,
    /// Allowed gap, in combined standard errors, for ergodic averages.
    #[serde(default = "ergodic_sigmas")]
    pub ergodic_sigmas: f64,
    /// Allowed gap, in combined standard errors, between seed halves.
    #[serde(default = "split_sigmas")]
    pub split_sigmas: f64,
    /// Significance level of the one-sided variance tests.
    #[serde(default = "alpha")]
    pub variance_alpha: f64,
}

fn path_tol() -> f64 {
    1e-6
}
fn identity_tol() -> f64 {
    1e-10
}
fn contour_tol() -> f64 {
    1e-9
}
fn zero_field_tol() -> f64 {
    1e-10
}
fn exponent_band() -> f64 {
    0.3
}
fn ergodic_sigmas() -> f64 {
    3.0
}
fn split_sigmas() -> f64 {
    2.0
}
fn alpha() -> f64 {
    0.05
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            path: path_tol(),
            identity: identity_tol(),
            contour_agreement: contour_tol(),
            zero_field: zero_field_tol(),
            exponent_band: exponent_band(),
            ergodic_sigmas: ergodic_sigmas(),
            split_sigmas: split_sigmas(),
            variance_alpha: alpha(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub sides: Vec<f64>,
    #[serde(default = "yes")]
    pub cross_check: bool,
    #[serde(default)]
    pub third_order: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicSection {
    pub big_side: f64,
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub sides: Vec<f64>,
    pub pad: f64,
    /// `[re, im]`.
    pub xi: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesSection {
    /// Spectral parameters `[re, im]`.
    pub xi: Vec<[f64; 2]>,
}

/// Explicit eigenvalues, bypassing the lattice operator (thermo only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub eigenvalues: Vec<f64>,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default = "zero_model")]
    pub model: PotentialModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physics: Option<Physics>,
    #[serde(default)]
    pub contour: ContourOverrides,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ergodic: Option<ErgodicSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundarySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identities: Option<IdentitiesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
}

fn zero_model() -> PotentialModel {
    PotentialModel::Zero
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn grid_spec(&self) -> Result<&GridSpec, Failure> {
        self.grid.as_ref().ok_or_else(|| Failure::Config("missing [grid] section".into()))
    }

    pub fn physics(&self) -> Result<&Physics, Failure> {
        self.physics.as_ref().ok_or_else(|| Failure::Config("missing [physics] section".into()))
    }

    pub fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
        s.as_ref().ok_or_else(|| Failure::Config(format!("missing [{name}] section")))
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
