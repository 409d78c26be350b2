use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use super::stats::{successive_difference_rate, variance_decrease_p_value, Moments};
use crate::contour::{build_contour, pressure_contour_spectral, xn_contour_spectral, ContourParams, DEFAULT_ETA};
use crate::error::{ensure, Error, Result};
use crate::operator::HamiltonianPolynomial;
use crate::potentials::{Grid, PotentialField, PotentialModel};
use crate::spectral::{eigensolve, Spectrum};
use crate::thermo::{
    density_eigensum, magnetization_hellmann_feynman, pressure_eigensum, susceptibility_sum_over_states,
    ComputationPath, Statistics, ThermoParams, ThermoRecord,
};

/// A thermodynamic-limit sweep: fixed spacing, growing boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub model: PotentialModel,
    pub dim: usize,
    pub spacing: f64,
    pub sides: Vec<f64>,
    pub fields: Vec<f64>,
    pub betas: Vec<f64>,
    pub fugacities: Vec<f64>,
    pub statistics: Vec<Statistics>,
    pub realizations: usize,
    pub base_seed: u64,
    #[serde(default = "one")]
    pub charge_ratio: f64,
    /// Recompute P, X1, X2 along the spectral contour route and drop samples
    /// whose paths disagree by more than `path_tolerance` (relative).
    #[serde(default = "yes")]
    pub cross_check: bool,
    #[serde(default = "default_path_tolerance")]
    pub path_tolerance: f64,
    /// Also estimate X3 by a central difference of X2 in `b`.
    #[serde(default)]
    pub third_order: bool,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_path_tolerance() -> f64 {
    1e-6
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        ensure(!self.sides.is_empty() && !self.fields.is_empty(), || "empty L ladder or b list".into())?;
        ensure(!self.betas.is_empty() && !self.fugacities.is_empty() && !self.statistics.is_empty(), || {
            "empty (beta, z, epsilon) grid".into()
        })?;
        ensure(self.realizations >= 1, || "need at least one realization".into())?;
        ensure(self.path_tolerance > 0.0, || "path_tolerance must be positive".into())?;
        for &beta in &self.betas {
            for &z in &self.fugacities {
                ThermoParams::new(beta, z, Statistics::Fermi)?;
            }
        }
        let grids = self.grids()?;
        for w in grids.windows(2) {
            ensure(w[0].nests_in(&w[1]), || {
                format!("boxes of side {} and {} are not nested grids at spacing {}", w[0].side(), w[1].side(), self.spacing)
            })?;
        }
        Ok(())
    }

    /// Grids of the ladder, in ascending side order.
    pub fn grids(&self) -> Result<Vec<Grid>> {
        let mut sides = self.sides.clone();
        sides.sort_by(f64::total_cmp);
        sides
            .iter()
            .map(|&l| {
                let cells = l / self.spacing;
                ensure((cells - cells.round()).abs() < 1e-9 && cells.round() >= 2.0, || {
                    format!("side {l} is not a multiple of the spacing {}", self.spacing)
                })?;
                Grid::new(self.dim, l, cells.round() as usize - 1)
            })
            .collect()
    }

    /// Seed of realization `r`: `base_seed ⊕ r`.
    pub fn seed(&self, r: usize) -> u64 {
        self.base_seed ^ r as u64
    }

    fn thermo_points(&self) -> Vec<ThermoParams> {
        let mut out = Vec::new();
        for &beta in &self.betas {
            for &z in &self.fugacities {
                for &s in &self.statistics {
                    // validated above
                    out.push(ThermoParams::new(beta, z, s).unwrap().with_charge_ratio(self.charge_ratio));
                }
            }
        }
        out
    }
}

/// Per-group statistics of one observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    #[serde(rename = "L")]
    pub side: f64,
    pub b: f64,
    pub beta: f64,
    pub z: f64,
    pub epsilon: i32,
    pub observable: String,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

/// Decay of successive ensemble-mean differences along the L ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub b: f64,
    pub beta: f64,
    pub z: f64,
    pub epsilon: i32,
    pub observable: String,
    pub rate: f64,
    pub expected: f64,
    pub residual: f64,
    pub pass: bool,
}

/// One-sided variance decrease between consecutive ladder points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTest {
    pub b: f64,
    pub beta: f64,
    pub z: f64,
    pub epsilon: i32,
    pub observable: String,
    pub l_small: f64,
    pub l_large: f64,
    pub var_small: f64,
    pub var_large: f64,
    pub p_value: f64,
    pub decreasing: bool,
}

/// Log–log slope of the variance against L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSlope {
    pub b: f64,
    pub beta: f64,
    pub z: f64,
    pub epsilon: i32,
    pub observable: String,
    pub slope: f64,
}

/// Means of two disjoint seed halves compared in combined standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCheck {
    #[serde(rename = "L")]
    pub side: f64,
    pub b: f64,
    pub beta: f64,
    pub z: f64,
    pub epsilon: i32,
    pub observable: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub combined_se: f64,
    pub sigmas: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub records: Vec<ThermoRecord>,
    pub rows: Vec<StatRow>,
    pub convergence: Vec<ConvergenceRow>,
    pub variance_tests: Vec<VarianceTest>,
    pub variance_slopes: Vec<VarianceSlope>,
    pub splits: Vec<SplitCheck>,
    /// max over the ladder of |X_n| divided by its smallest-L value.
    pub boundedness: Vec<(String, f64)>,
    /// Largest relative disagreement between the eigensum and contour routes.
    pub max_path_discrepancy: f64,
    /// Jobs that failed (admissibility, path disagreement, ...).
    pub failures: Vec<String>,
}

pub const OBSERVABLES: [&str; 5] = ["P", "rho", "X1", "X2", "X3"];

fn observable(r: &ThermoRecord, name: &str) -> Option<f64> {
    match name {
        "P" => r.pressure,
        "rho" => r.rho,
        "X1" => r.x1,
        "X2" => r.x2,
        "X3" => r.x3,
        _ => None,
    }
}

type Key = (f64, f64, f64, i32);

fn key(r: &ThermoRecord) -> Key {
    (r.b, r.beta, r.z, r.epsilon)
}

fn same(a: &Key, b: &Key) -> bool {
    a.0 == b.0 && a.1 == b.1 && a.2 == b.2 && a.3 == b.3
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs()) + 1e-12)
}

struct JobOutput {
    records: Vec<ThermoRecord>,
    discrepancy: f64,
    failures: Vec<String>,
}

fn run_job(plan: &SweepPlan, grid: &Grid, seed: u64, tps: &[ThermoParams]) -> Result<JobOutput> {
    let field = PotentialField::sample(grid, &plan.model, seed)?;
    let hp = HamiltonianPolynomial::new(&field)?;
    let mut out = JobOutput { records: Vec::new(), discrepancy: 0.0, failures: Vec::new() };
    let dx3 = 1e-2 * plan.fields.iter().fold(1.0f64, |m, b| m.max(b.abs()));
    for &b in &plan.fields {
        let t0 = Instant::now();
        let sp = eigensolve(&hp.assemble(b)?, grid.volume())?;
        let side_spectra: Option<(Spectrum, Spectrum)> = if plan.third_order {
            Some((
                eigensolve(&hp.assemble(b + dx3)?, grid.volume())?,
                eigensolve(&hp.assemble(b - dx3)?, grid.volume())?,
            ))
        } else {
            None
        };
        let solve_time = t0.elapsed().as_secs_f64();
        for tp in tps {
            let t1 = Instant::now();
            let tag = format!("L={} seed={} b={} beta={} z={} eps={}", grid.side(), seed, b, tp.beta, tp.z, tp.epsilon());
            if let Err(e) = tp.check_fugacity(sp.ground_state()) {
                out.failures.push(format!("{tag}: {e}"));
                continue;
            }
            let eval = || -> Result<ThermoRecord> {
                let p = pressure_eigensum(&sp, tp)?;
                let rho = density_eigensum(&sp, tp)?;
                let x1 = magnetization_hellmann_feynman(&hp, b, &sp, tp)?;
                let x2 = susceptibility_sum_over_states(&hp, b, &sp, tp)?;
                let x3 = match &side_spectra {
                    Some((up, dn)) => {
                        tp.check_fugacity(up.ground_state())?;
                        tp.check_fugacity(dn.ground_state())?;
                        let hi = susceptibility_sum_over_states(&hp, b + dx3, up, tp)?;
                        let lo = susceptibility_sum_over_states(&hp, b - dx3, dn, tp)?;
                        Some((hi - lo) / (2.0 * dx3))
                    }
                    None => None,
                };
                Ok(record(plan, grid, seed, b, tp, ComputationPath::Eigensum, p, rho, x1, x2, x3))
            };
            let mut rec = match eval() {
                Ok(r) => r,
                Err(e) => {
                    out.failures.push(format!("{tag}: {e}"));
                    continue;
                }
            };
            rec.wall_time = solve_time + t1.elapsed().as_secs_f64();
            if plan.cross_check {
                let t2 = Instant::now();
                let check = || -> Result<ThermoRecord> {
                    let params = ContourParams::for_params(sp.ground_state(), tp);
                    let c = build_contour(&params, sp.ground_state(), tp, Some(&sp.eigenvalues), DEFAULT_ETA)?;
                    let p = pressure_contour_spectral(&sp.eigenvalues, grid.volume(), tp, &c)?.value;
                    let x1 = xn_contour_spectral(&hp, b, &sp, tp, &c, 1)?.value;
                    let x2 = xn_contour_spectral(&hp, b, &sp, tp, &c, 2)?.value;
                    Ok(record(plan, grid, seed, b, tp, ComputationPath::ContourSpectral, p, f64::NAN, x1, x2, None))
                };
                match check() {
                    Ok(mut c) => {
                        c.rho = None;
                        c.wall_time = t2.elapsed().as_secs_f64();
                        // X1 vanishes at b = 0; measure it on the X2 scale
                        let gp = relative_gap(rec.pressure.unwrap(), c.pressure.unwrap());
                        let g1 = (rec.x1.unwrap() - c.x1.unwrap()).abs()
                            / (rec.x1.unwrap().abs().max(rec.x2.unwrap().abs()) + 1e-12);
                        let g2 = relative_gap(rec.x2.unwrap(), c.x2.unwrap());
                        let gap = gp.max(g1).max(g2);
                        out.discrepancy = out.discrepancy.max(gap);
                        if gap > plan.path_tolerance {
                            out.failures.push(format!("{tag}: eigensum and contour routes disagree (relative gap {gap:.3e})"));
                            continue;
                        }
                        out.records.push(rec);
                        out.records.push(c);
                    }
                    Err(e) => out.failures.push(format!("{tag}: contour cross-check failed: {e}")),
                }
            } else {
                out.records.push(rec);
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn record(
    plan: &SweepPlan,
    grid: &Grid,
    seed: u64,
    b: f64,
    tp: &ThermoParams,
    path: ComputationPath,
    p: f64,
    rho: f64,
    x1: f64,
    x2: f64,
    x3: Option<f64>,
) -> ThermoRecord {
    ThermoRecord {
        model: plan.model.name().to_string(),
        seed,
        d: grid.dim(),
        side: grid.side(),
        h: grid.spacing(),
        b,
        beta: tp.beta,
        z: tp.z,
        epsilon: tp.epsilon() as i32,
        path,
        pressure: Some(p),
        rho: Some(rho),
        x1: Some(x1),
        x2: Some(x2),
        x3,
        wall_time: 0.0,
    }
}

/// Computes the ledger for every (L, seed) job. Jobs run in parallel; the
/// output order is the job order, independent of scheduling.
pub fn collect_records(plan: &SweepPlan) -> Result<(Vec<ThermoRecord>, f64, Vec<String>)> {
    plan.validate()?;
    let grids = plan.grids()?;
    let tps = plan.thermo_points();
    let seeds: Vec<u64> = if plan.model.is_random() {
        (0..plan.realizations).map(|r| plan.seed(r)).collect()
    } else {
        vec![plan.base_seed]
    };
    let jobs: Vec<(&Grid, u64)> = grids.iter().flat_map(|g| seeds.iter().map(move |&s| (g, s))).collect();
    let outs: Vec<Result<JobOutput>> = jobs.par_iter().map(|&(g, s)| run_job(plan, g, s, &tps)).collect();
    let mut records = Vec::new();
    let mut disc = 0.0f64;
    let mut failures = Vec::new();
    for ((g, s), o) in jobs.iter().zip(outs) {
        match o {
            Ok(o) => {
                records.extend(o.records);
                disc = disc.max(o.discrepancy);
                failures.extend(o.failures);
            }
            Err(e) => failures.push(format!("L={} seed={}: {e}", g.side(), s)),
        }
    }
    Ok((records, disc, failures))
}

impl EnsembleStats {
    /// Recomputes all statistics from a ledger; only eigensum-path rows
    /// enter the statistics.
    pub fn from_records(records: Vec<ThermoRecord>, growth_exponent: f64) -> Self {
        let prim: Vec<&ThermoRecord> = records.iter().filter(|r| r.path == ComputationPath::Eigensum).collect();
        let mut keys: Vec<Key> = Vec::new();
        let mut sides: Vec<f64> = Vec::new();
        for r in &prim {
            let k = key(r);
            if !keys.iter().any(|q| same(q, &k)) {
                keys.push(k);
            }
            if !sides.contains(&r.side) {
                sides.push(r.side);
            }
        }
        sides.sort_by(f64::total_cmp);

        let mut st = EnsembleStats::default();
        for k in &keys {
            for obs in OBSERVABLES {
                let mut ladder = Vec::new();
                let mut moments = Vec::new();
                for &l in &sides {
                    let xs: Vec<f64> = prim
                        .iter()
                        .filter(|r| r.side == l && same(&key(r), k))
                        .filter_map(|r| observable(r, obs))
                        .collect();
                    if xs.is_empty() {
                        continue;
                    }
                    let m = Moments::of(&xs);
                    st.rows.push(StatRow {
                        side: l,
                        b: k.0,
                        beta: k.1,
                        z: k.2,
                        epsilon: k.3,
                        observable: obs.to_string(),
                        count: m.count,
                        mean: m.mean,
                        variance: m.variance,
                        std_error: m.std_error,
                    });
                    if xs.len() >= 4 {
                        let half = xs.len() / 2;
                        let (a, b) = (Moments::of(&xs[..half]), Moments::of(&xs[half..]));
                        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
                        st.splits.push(SplitCheck {
                            side: l,
                            b: k.0,
                            beta: k.1,
                            z: k.2,
                            epsilon: k.3,
                            observable: obs.to_string(),
                            mean_a: a.mean,
                            mean_b: b.mean,
                            combined_se: se,
                            sigmas: if se > 0.0 { (a.mean - b.mean).abs() / se } else { 0.0 },
                        });
                    }
                    ladder.push((l, m.mean));
                    moments.push((l, m));
                }
                if obs != "rho" && obs != "X1" && ladder.len() >= 3 {
                    let n = match obs {
                        "X2" => 2.0,
                        "X3" => 3.0,
                        _ => 0.0,
                    };
                    let expected = if growth_exponent > 0.0 { 1.0 - n * growth_exponent } else { 1.0 };
                    if let Ok(fit) = successive_difference_rate(&ladder) {
                        st.convergence.push(ConvergenceRow {
                            b: k.0,
                            beta: k.1,
                            z: k.2,
                            epsilon: k.3,
                            observable: obs.to_string(),
                            rate: fit.rate,
                            expected,
                            residual: fit.residual,
                            // one-sided: decaying at least as fast is a pass
                            pass: fit.rate >= expected - 0.2,
                        });
                    }
                }
                for w in moments.windows(2) {
                    let (a, b) = (&w[0].1, &w[1].1);
                    if let Ok(p) = variance_decrease_p_value(a, b) {
                        st.variance_tests.push(VarianceTest {
                            b: k.0,
                            beta: k.1,
                            z: k.2,
                            epsilon: k.3,
                            observable: obs.to_string(),
                            l_small: w[0].0,
                            l_large: w[1].0,
                            var_small: a.variance,
                            var_large: b.variance,
                            p_value: p,
                            decreasing: p < 0.05,
                        });
                    }
                }
                let vpts: Vec<(f64, f64)> = moments.iter().map(|(l, m)| (*l, m.variance)).collect();
                if vpts.iter().filter(|p| p.1 > 0.0).count() >= 2 {
                    if let Ok((slope, _)) = super::stats::loglog_slope(&vpts) {
                        st.variance_slopes.push(VarianceSlope {
                            b: k.0,
                            beta: k.1,
                            z: k.2,
                            epsilon: k.3,
                            observable: obs.to_string(),
                            slope,
                        });
                    }
                }
            }
        }
        for obs in ["X1", "X2", "X3"] {
            let first = sides.first().copied();
            let vals: Vec<(f64, f64)> = prim.iter().filter_map(|r| observable(r, obs).map(|v| (r.side, v.abs()))).collect();
            if vals.is_empty() {
                continue;
            }
            let small = vals.iter().filter(|v| Some(v.0) == first).fold(0.0f64, |m, v| m.max(v.1));
            let all = vals.iter().fold(0.0f64, |m, v| m.max(v.1));
            let ratio = if small > 0.0 { all / small } else if all == 0.0 { 1.0 } else { f64::INFINITY };
            st.boundedness.push((obs.to_string(), ratio));
        }
        st.records = records;
        st
    }

    pub fn row(&self, side: f64, b: f64, observable: &str) -> Option<&StatRow> {
        self.rows.iter().find(|r| r.side == side && r.b == b && r.observable == observable)
    }
}

/// Thermodynamic-limit sweep: ensemble means per L and the decay rate of
/// their successive differences.
pub fn run_convergence_sweep(plan: &SweepPlan) -> Result<EnsembleStats> {
    let (records, disc, failures) = collect_records(plan)?;
    let mut st = EnsembleStats::from_records(records, plan.model.growth_exponent());
    st.max_path_discrepancy = disc;
    st.failures = failures;
    Ok(st)
}

/// Disorder ensemble with at least 30 seeds per box: variances, one-sided
/// variance-decrease tests, split-sample consistency.
pub fn run_disorder_ensemble(plan: &SweepPlan) -> Result<EnsembleStats> {
    if plan.realizations < 30 {
        return Err(Error::Insufficient(format!(
            "ensemble statistics need at least 30 seeds per box (got {})",
            plan.realizations
        )));
    }
    run_convergence_sweep(plan)
}
