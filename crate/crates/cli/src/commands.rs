use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

use diamag::contour::{
    build_contour, pressure_contour_matrix, pressure_contour_spectral, xn_contour_spectral, Contour, ContourParams,
    DEFAULT_ETA,
};
use diamag::experiments::{
    run_boundary_layer_probe, run_convergence_sweep, run_disorder_ensemble, run_ergodic_average, BoundaryPlan,
    EnsembleStats, ErgodicPlan, SweepPlan,
};
use diamag::operator::HamiltonianPolynomial;
use diamag::potentials::{Grid, PotentialField};
use diamag::response::{identity_report, IdentityKind, IdentityTolerances};
use diamag::spectral::{eigensolve, eigenvalues, Spectrum};
use diamag::thermo::{
    density_eigensum, magnetization_hellmann_feynman, pressure_eigensum, susceptibility_finite_difference,
    susceptibility_sum_over_states, ComputationPath, Statistics, ThermoParams, ThermoRecord,
};
use diamag::{c64, Error};

use crate::config::{Command, RunConfig};
use crate::output::{ledger, Assertion, Ledger};
use crate::Failure;

/// Dense contour routes (one inverse per node) are only run up to this size.
const CONTOUR_MATRIX_LIMIT: usize = 400;

pub struct Outcome {
    pub ledgers: Vec<Ledger>,
    pub assertions: Vec<Assertion>,
    pub notes: Vec<String>,
    pub timings: Vec<(String, f64)>,
}

impl Outcome {
    fn new() -> Self {
        Self { ledgers: Vec::new(), assertions: Vec::new(), notes: Vec::new(), timings: Vec::new() }
    }
}

/// Ledger row of thermodynamic values; wall times are kept out so that
/// reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoRow {
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
}

pub const THERMO_HEADER: [&str; 15] =
    ["model", "seed", "d", "L", "h", "b", "beta", "z", "epsilon", "path", "P", "rho", "X1", "X2", "X3"];

impl From<&ThermoRecord> for ThermoRow {
    fn from(r: &ThermoRecord) -> Self {
        Self {
            model: r.model.clone(),
            seed: r.seed,
            d: r.d,
            side: r.side,
            h: r.h,
            b: r.b,
            beta: r.beta,
            z: r.z,
            epsilon: r.epsilon,
            path: r.path,
            pressure: r.pressure,
            rho: r.rho,
            x1: r.x1,
            x2: r.x2,
            x3: r.x3,
        }
    }
}

impl From<ThermoRow> for ThermoRecord {
    fn from(r: ThermoRow) -> Self {
        ThermoRecord {
            model: r.model,
            seed: r.seed,
            d: r.d,
            side: r.side,
            h: r.h,
            b: r.b,
            beta: r.beta,
            z: r.z,
            epsilon: r.epsilon,
            path: r.path,
            pressure: r.pressure,
            rho: r.rho,
            x1: r.x1,
            x2: r.x2,
            x3: r.x3,
            wall_time: 0.0,
        }
    }
}

fn gap(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / (scale + 1e-300)
}

fn tag(b: f64, tp: &ThermoParams) -> String {
    format!("b={b} beta={} z={} eps={}", tp.beta, tp.z, tp.epsilon())
}

fn contour_for(cfg: &RunConfig, floor: f64, tp: &ThermoParams, ev: &[f64]) -> diamag::Result<Contour> {
    let params = cfg.contour.apply(ContourParams::for_params(floor, tp));
    build_contour(&params, floor, tp, Some(ev), DEFAULT_ETA)
}

fn operator(cfg: &RunConfig) -> Result<(Grid, HamiltonianPolynomial), Failure> {
    let grid = cfg.grid_spec()?.grid()?;
    cfg.model.validate().map_err(Failure::config)?;
    let field = PotentialField::sample(&grid, &cfg.model, cfg.seeds.base).map_err(Failure::config)?;
    let hp = HamiltonianPolynomial::new(&field).map_err(Failure::config)?;
    hp.check_dense().map_err(Failure::config)?;
    Ok((grid, hp))
}

#[allow(clippy::too_many_arguments)]
fn row(cfg: &RunConfig, grid: Option<&Grid>, b: f64, tp: &ThermoParams, path: ComputationPath, p: Option<f64>, rho: Option<f64>, x1: Option<f64>, x2: Option<f64>) -> ThermoRow {
    ThermoRow {
        model: if grid.is_some() { cfg.model.name().into() } else { "spectrum".into() },
        seed: cfg.seeds.base,
        d: grid.map_or(0, |g| g.dim()),
        side: grid.map_or_else(|| cfg.spectrum.as_ref().map_or(0.0, |s| s.volume), |g| g.side()),
        h: grid.map_or(0.0, |g| g.spacing()),
        b,
        beta: tp.beta,
        z: tp.z,
        epsilon: tp.epsilon() as i32,
        path,
        pressure: p,
        rho,
        x1,
        x2,
        x3: None,
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome, Failure> {
    match command {
        Command::Thermo => thermo(cfg),
        Command::Identities => identities(cfg),
        Command::ContourCheck => contour_check(cfg),
        Command::Sweep => sweep(cfg, false),
        Command::Ensemble => sweep(cfg, true),
        Command::Ergodic => ergodic(cfg),
        Command::Boundary => boundary(cfg),
    }
}

fn thermo(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let phys = cfg.physics()?;
    let tps = phys.points()?;
    let tol = &cfg.tolerances;
    let mut out = Outcome::new();
    let mut rows = Vec::new();

    if let Some(spec) = &cfg.spectrum {
        if spec.eigenvalues.is_empty() || !(spec.volume > 0.0) {
            return Err(Failure::Config("[spectrum] needs eigenvalues and a positive volume".into()));
        }
        let sp = Spectrum::from_eigenvalues(spec.eigenvalues.clone(), spec.volume);
        for tp in &tps {
            let t = tag(0.0, tp);
            let p = pressure_eigensum(&sp, tp).map_err(Failure::runtime)?;
            let rho = density_eigensum(&sp, tp).map_err(Failure::runtime)?;
            rows.push(row(cfg, None, 0.0, tp, ComputationPath::Eigensum, Some(p), Some(rho), None, None));
            let c = contour_for(cfg, sp.ground_state() - 1e-12, tp, &sp.eigenvalues).map_err(Failure::runtime)?;
            let pc = pressure_contour_spectral(&sp.eigenvalues, sp.volume, tp, &c).map_err(Failure::runtime)?.value;
            rows.push(row(cfg, None, 0.0, tp, ComputationPath::ContourSpectral, Some(pc), None, None, None));
            out.assertions.push(Assertion::at_most(
                format!("pressure-routes {t}"),
                "eigensum pressure = contour pressure",
                gap(p, pc, p.abs()),
                tol.path,
            ));
        }
        out.ledgers.push(ledger("thermo.csv", &THERMO_HEADER, &rows)?);
        return Ok(out);
    }

    let (grid, hp) = operator(cfg)?;
    for &b in &phys.fields {
        let t0 = Instant::now();
        let sp = eigensolve(&hp.assemble(b).map_err(Failure::runtime)?, grid.volume()).map_err(Failure::runtime)?;
        out.timings.push((format!("eigensolve b={b}"), t0.elapsed().as_secs_f64()));
        for tp in &tps {
            let t = tag(b, tp);
            if let Err(e) = tp.check_fugacity(sp.ground_state()) {
                out.assertions.push(Assertion::holds(format!("admissible {t}"), "Bose fugacity below the ground state", false).with_detail(e.to_string()));
                continue;
            }
            let eval = || -> diamag::Result<Vec<ThermoRow>> {
                let p = pressure_eigensum(&sp, tp)?;
                let rho = density_eigensum(&sp, tp)?;
                let x1 = magnetization_hellmann_feynman(&hp, b, &sp, tp)?;
                let x2 = susceptibility_sum_over_states(&hp, b, &sp, tp)?;
                let f1 = susceptibility_finite_difference(&hp, b, tp, 1, None)?;
                let f2 = susceptibility_finite_difference(&hp, b, tp, 2, None)?;
                let c = contour_for(cfg, sp.ground_state(), tp, &sp.eigenvalues)?;
                let pc = pressure_contour_spectral(&sp.eigenvalues, grid.volume(), tp, &c)?.value;
                let c1 = xn_contour_spectral(&hp, b, &sp, tp, &c, 1)?.value;
                let c2 = xn_contour_spectral(&hp, b, &sp, tp, &c, 2)?.value;
                let mut v = vec![
                    row(cfg, Some(&grid), b, tp, ComputationPath::Eigensum, Some(p), Some(rho), None, None),
                    row(cfg, Some(&grid), b, tp, ComputationPath::HellmannFeynman, None, None, Some(x1), None),
                    row(cfg, Some(&grid), b, tp, ComputationPath::SumOverStates, None, None, None, Some(x2)),
                    row(cfg, Some(&grid), b, tp, ComputationPath::FiniteDifference, None, None, Some(f1), Some(f2)),
                    row(cfg, Some(&grid), b, tp, ComputationPath::ContourSpectral, Some(pc), None, Some(c1), Some(c2)),
                ];
                if grid.len() <= CONTOUR_MATRIX_LIMIT {
                    let pm = pressure_contour_matrix(&hp.assemble(b)?, grid.volume(), tp, &c)?.value;
                    v.push(row(cfg, Some(&grid), b, tp, ComputationPath::ContourExact, Some(pm), None, None, None));
                }
                Ok(v)
            };
            let v = eval().map_err(Failure::runtime)?;
            let p = v[0].pressure.unwrap();
            let x1 = v[1].x1.unwrap();
            let x2 = v[2].x2.unwrap();
            let x_scale = x1.abs().max(x2.abs());
            for r in &v[3..] {
                let path = r.path.as_str();
                if let Some(q) = r.pressure {
                    out.assertions.push(Assertion::at_most(format!("P {path} {t}"), "pressure route equivalence", gap(p, q, p.abs()), tol.path));
                }
                if let Some(q) = r.x1 {
                    out.assertions.push(Assertion::at_most(format!("X1 {path} {t}"), "magnetization oracle equivalence", gap(x1, q, x_scale), tol.path));
                }
                if let Some(q) = r.x2 {
                    out.assertions.push(Assertion::at_most(format!("X2 {path} {t}"), "susceptibility oracle equivalence", gap(x2, q, x2.abs()), tol.path));
                }
            }
            if b == 0.0 {
                let worst = v.iter().filter_map(|r| r.x1).fold(0.0f64, |m, x| m.max(x.abs()));
                out.assertions.push(Assertion::at_most(
                    format!("zero-field-X1 {t}"),
                    "zero-field magnetization vanishes",
                    worst / x2.abs().max(p.abs()),
                    tol.zero_field,
                ));
            }
            rows.extend(v);
        }
    }
    out.ledgers.push(ledger("thermo.csv", &THERMO_HEADER, &rows)?);
    Ok(out)
}

fn identities(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let (_, hp) = operator(cfg)?;
    let fields = cfg.physics.as_ref().map_or_else(|| vec![0.0], |p| p.fields.clone());
    let xis: Vec<c64> = cfg
        .identities
        .as_ref()
        .map_or_else(|| vec![c64::new(-1.0, 0.5)], |s| s.xi.iter().map(|x| c64::new(x[0], x[1])).collect());
    let tol = IdentityTolerances { exact: cfg.tolerances.identity, ..Default::default() };
    let mut out = Outcome::new();
    let mut all = Vec::new();
    for &b in &fields {
        for &xi in &xis {
            let rep = identity_report(&hp, b, xi, &tol).map_err(Failure::runtime)?;
            for c in &rep {
                match c.kind {
                    IdentityKind::Exact => out.assertions.push(Assertion::at_most(
                        format!("{} b={b} xi={}{:+}i", c.name, xi.re, xi.im),
                        c.anchor.clone(),
                        c.norm,
                        c.threshold,
                    )),
                    IdentityKind::Convergent => out.notes.push(format!(
                        "{} (h-convergent, recorded) b={b} xi={}{:+}i h={}: {:.3e}",
                        c.name, xi.re, xi.im, c.h, c.norm
                    )),
                }
            }
            all.extend(rep);
        }
    }
    out.ledgers.push(ledger(
        "identities.csv",
        &["name", "anchor", "kind", "norm", "threshold", "pass", "h", "b", "xi_re", "xi_im"],
        &all,
    )?);
    Ok(out)
}

#[derive(Serialize)]
struct ContourRow {
    b: f64,
    beta: f64,
    z: f64,
    epsilon: i32,
    contour: &'static str,
    nodes: usize,
    e_k: f64,
    theta_k: f64,
    xi_k: f64,
    sigma: f64,
    re_max: f64,
    pressure: f64,
    imag_ratio: f64,
    min_distance: f64,
    decay_c: f64,
    bound_ratio: f64,
}

fn contour_check(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let phys = cfg.physics()?;
    let tps = phys.points()?;
    let (grid, hp) = operator(cfg)?;
    let tol = &cfg.tolerances;
    let mut out = Outcome::new();
    let mut rows = Vec::new();
    for &b in &phys.fields {
        let h = hp.assemble(b).map_err(Failure::runtime)?;
        let sp = eigenvalues(&h, grid.volume()).map_err(Failure::runtime)?;
        let floor = sp.ground_state();
        for tp in &tps {
            let t = tag(b, tp);
            if let Err(e) = tp.check_fugacity(floor) {
                out.assertions.push(Assertion::holds(format!("admissible {t}"), "Bose fugacity below the ground state", false).with_detail(e.to_string()));
                continue;
            }
            let base = cfg.contour.apply(ContourParams::for_params(floor, tp));
            let mut variant = base;
            variant.theta_k = 0.5 * base.theta_k;
            variant.sigma = PI / 3.0;
            variant.xi_k = base.xi_k + 0.5;
            variant.e_k = base.e_k - 0.5;
            let x0 = tp.z.ln() / tp.beta;
            if tp.statistics == Statistics::Bose && variant.e_k <= x0 {
                variant.e_k = 0.5 * (x0 + base.e_k);
            }
            let contours: Vec<(&'static str, Contour)> = [("default", base), ("variant", variant)]
                .into_iter()
                .map(|(n, p)| build_contour(&p, floor, tp, Some(&sp.eigenvalues), DEFAULT_ETA).map(|c| (n, c)))
                .collect::<diamag::Result<_>>()
                .map_err(Failure::runtime)?;
            let c_fit = contours.iter().map(|(_, c)| c.decay_constant(tp)).fold(0.0, f64::max);
            let pe = pressure_eigensum(&sp, tp).map_err(Failure::runtime)?;
            let mut values = Vec::new();
            for (name, c) in &contours {
                let v = pressure_contour_spectral(&sp.eigenvalues, grid.volume(), tp, c).map_err(Failure::runtime)?;
                let ratio = c.decay_bound_ratio(tp, c_fit);
                out.assertions.push(Assertion::at_most(
                    format!("decay-envelope {name} {t}"),
                    "|f_eps| <= c exp(-beta Re xi) with one fitted c",
                    ratio,
                    1.0 + 1e-12,
                ));
                if grid.len() <= CONTOUR_MATRIX_LIMIT {
                    let vm = pressure_contour_matrix(&h, grid.volume(), tp, c).map_err(Failure::runtime)?;
                    out.assertions.push(Assertion::at_most(
                        format!("matrix-route {name} {t}"),
                        "contour pressure from matrix resolvents",
                        gap(vm.value, pe, pe.abs()),
                        tol.contour_agreement,
                    ));
                }
                let p = &c.params;
                rows.push(ContourRow {
                    b,
                    beta: tp.beta,
                    z: tp.z,
                    epsilon: tp.epsilon() as i32,
                    contour: name,
                    nodes: c.len(),
                    e_k: p.e_k,
                    theta_k: p.theta_k,
                    xi_k: p.xi_k,
                    sigma: p.sigma,
                    re_max: p.re_max,
                    pressure: v.value,
                    imag_ratio: v.imag_ratio,
                    min_distance: c.min_distance.unwrap_or(f64::NAN),
                    decay_c: c_fit,
                    bound_ratio: ratio,
                });
                values.push(v.value);
            }
            out.assertions.push(Assertion::at_most(
                format!("two-contours {t}"),
                "pressure independent of the validated contour",
                gap(values[0], values[1], pe.abs()),
                tol.contour_agreement,
            ));
            out.assertions.push(Assertion::at_most(
                format!("eigensum-vs-contour {t}"),
                "eigensum pressure = contour pressure",
                gap(values[0], pe, pe.abs()),
                tol.contour_agreement,
            ));
        }
        // branch points must be rejected, independently of the configured statistics
        let beta = tps[0].beta;
        let d = ContourParams::defaults(floor, beta);
        let x_fermi = d.xi_k + (PI / beta) / d.sigma.tan() + 1.0;
        let fermi = ThermoParams::new(beta, (beta * x_fermi).exp(), Statistics::Fermi).map_err(Failure::runtime)?;
        let rejected = matches!(build_contour(&d, floor, &fermi, None, DEFAULT_ETA), Err(Error::BranchPointEnclosed(_)));
        out.assertions.push(Assertion::holds(format!("fermi-branch-rejected b={b}"), "Fermi branch points at Im xi = pi/beta excluded", rejected));
        let bose = ThermoParams::new(beta, (beta * (floor - 0.25)).exp(), Statistics::Bose).map_err(Failure::runtime)?;
        let rejected = matches!(build_contour(&d, floor, &bose, None, DEFAULT_ETA), Err(Error::BranchPointEnclosed(_)));
        out.assertions.push(Assertion::holds(format!("bose-branch-rejected b={b}"), "Bose branch point ln z / beta excluded", rejected));
    }
    out.ledgers.push(ledger(
        "contour.csv",
        &[
            "b", "beta", "z", "epsilon", "contour", "nodes", "e_k", "theta_k", "xi_k", "sigma", "re_max", "pressure",
            "imag_ratio", "min_distance", "decay_c", "bound_ratio",
        ],
        &rows,
    )?);
    Ok(out)
}

pub fn sweep_plan(cfg: &RunConfig) -> Result<SweepPlan, Failure> {
    let phys = cfg.physics()?;
    let gs = cfg.grid_spec()?;
    let sw = cfg.section(&cfg.sweep, "sweep")?;
    let plan = SweepPlan {
        model: cfg.model.clone(),
        dim: gs.dim,
        spacing: gs.spacing()?,
        sides: sw.sides.clone(),
        fields: phys.fields.clone(),
        betas: phys.betas.clone(),
        fugacities: phys.fugacities.clone(),
        statistics: phys.statistics.clone(),
        realizations: cfg.seeds.realizations,
        base_seed: cfg.seeds.base,
        charge_ratio: phys.charge_ratio,
        cross_check: sw.cross_check,
        path_tolerance: cfg.tolerances.path,
        third_order: sw.third_order,
    };
    plan.validate().map_err(Failure::config)?;
    Ok(plan)
}

pub fn stats_ledgers(st: &EnsembleStats) -> Result<Vec<Ledger>, Failure> {
    let rows: Vec<ThermoRow> = st.records.iter().map(ThermoRow::from).collect();
    Ok(vec![
        ledger("records.csv", &THERMO_HEADER, &rows)?,
        ledger(
            "stats.csv",
            &["L", "b", "beta", "z", "epsilon", "observable", "count", "mean", "variance", "std_error"],
            &st.rows,
        )?,
        ledger(
            "convergence.csv",
            &["b", "beta", "z", "epsilon", "observable", "rate", "expected", "residual", "pass"],
            &st.convergence,
        )?,
        ledger(
            "variance_tests.csv",
            &["b", "beta", "z", "epsilon", "observable", "l_small", "l_large", "var_small", "var_large", "p_value", "decreasing"],
            &st.variance_tests,
        )?,
        ledger(
            "splits.csv",
            &["L", "b", "beta", "z", "epsilon", "observable", "mean_a", "mean_b", "combined_se", "sigmas"],
            &st.splits,
        )?,
        Ledger { name: "failures.txt".into(), bytes: st.failures.iter().map(|f| format!("{f}\n")).collect::<String>().into_bytes() },
    ])
}

fn sweep(cfg: &RunConfig, ensemble: bool) -> Result<Outcome, Failure> {
    let plan = sweep_plan(cfg)?;
    let tol = &cfg.tolerances;
    let t0 = Instant::now();
    let st = if ensemble { run_disorder_ensemble(&plan) } else { run_convergence_sweep(&plan) }.map_err(|e| match e {
        Error::Insufficient(_) => Failure::config(e),
        e => Failure::runtime(e),
    })?;
    let mut out = Outcome::new();
    out.timings.push(("sweep".into(), t0.elapsed().as_secs_f64()));
    out.assertions.push(Assertion::at_most("failed-jobs", "every (L, seed, b) job admissible and consistent", st.failures.len() as f64, 0.0));
    if plan.cross_check {
        out.assertions.push(Assertion::at_most("path-agreement", "eigensum and contour routes agree", st.max_path_discrepancy, tol.path));
    }
    let zero: Vec<&ThermoRecord> = st.records.iter().filter(|r| r.b == 0.0).collect();
    if !zero.is_empty() {
        let worst = zero
            .iter()
            .map(|r| r.x1.unwrap_or(0.0).abs() / r.x2.unwrap_or(0.0).abs().max(r.pressure.unwrap_or(0.0).abs()).max(1e-300))
            .fold(0.0, f64::max);
        out.assertions.push(Assertion::at_most("zero-field-X1", "zero-field magnetization vanishes", worst, tol.zero_field));
    }
    if ensemble {
        for v in st.variance_tests.iter().filter(|v| v.observable == "P" || v.observable == "X2") {
            let name = format!("variance-decrease {} L={}->{} b={} beta={} z={} eps={}", v.observable, v.l_small, v.l_large, v.b, v.beta, v.z, v.epsilon);
            let a = if v.var_small == 0.0 && v.var_large == 0.0 {
                Assertion::holds(name, "degenerate ensemble has zero variance", true)
            } else {
                Assertion::at_most(name, "self-averaging: variance decreases with L (one-sided)", v.p_value, tol.variance_alpha)
                    .with_detail(format!("var {:.3e} -> {:.3e}", v.var_small, v.var_large))
            };
            out.assertions.push(a);
        }
        for s in st.splits.iter().filter(|s| s.observable == "P") {
            out.assertions.push(Assertion::at_most(
                format!("split-sample P L={} b={} beta={} z={} eps={}", s.side, s.b, s.beta, s.z, s.epsilon),
                "disjoint seed blocks agree",
                s.sigmas,
                tol.split_sigmas,
            ));
        }
        for v in &st.variance_slopes {
            out.notes.push(format!("variance slope {} b={}: {:.3}", v.observable, v.b, v.slope));
        }
        for c in &st.convergence {
            out.notes.push(format!("mean-difference rate {} b={} eps={}: {:.3}", c.observable, c.b, c.epsilon, c.rate));
        }
    } else {
        for c in st.convergence.iter().filter(|c| c.observable == "P" || c.observable == "X2") {
            out.assertions.push(Assertion::at_least(
                format!("limit-rate {} b={} beta={} z={} eps={}", c.observable, c.b, c.beta, c.z, c.epsilon),
                "thermodynamic limit: successive differences decay at least like the surface-to-volume ratio",
                c.rate,
                c.expected - 0.2,
            ));
        }
        if plan.model.growth_exponent() < 0.25 {
            for (obs, ratio) in &st.boundedness {
                out.assertions.push(Assertion::at_most(format!("bounded {obs}"), "uniform boundedness along the ladder", *ratio, 10.0));
            }
        }
    }
    out.ledgers = stats_ledgers(&st)?;
    Ok(out)
}

fn ergodic(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let phys = cfg.physics()?;
    let gs = cfg.grid_spec()?;
    let e = cfg.section(&cfg.ergodic, "ergodic")?;
    let plan = ErgodicPlan {
        model: cfg.model.clone(),
        dim: gs.dim,
        spacing: gs.spacing()?,
        big_side: e.big_side,
        window: e.window,
        b: phys.fields[0],
        beta: phys.betas[0],
        z: phys.fugacities[0],
        statistics: phys.statistics[0],
        seeds: cfg.seeds.realizations,
        base_seed: cfg.seeds.base,
    };
    plan.validate().map_err(Failure::config)?;
    let rec = run_ergodic_average(&plan).map_err(Failure::runtime)?;
    let mut out = Outcome::new();
    out.assertions.push(
        Assertion::at_most("ergodic-gap", "spatial cell average = ensemble average (unit-cell reduction)", rec.sigmas, cfg.tolerances.ergodic_sigmas)
            .with_detail(format!(
                "spatial {:.6e}±{:.2e} ensemble {:.6e}±{:.2e}",
                rec.spatial_mean, rec.spatial_se, rec.ensemble_mean, rec.ensemble_se
            )),
    );
    out.notes.push(format!("largest cell deviation from the spatial mean: {:.3e}", rec.cell_spread));
    #[derive(Serialize)]
    struct Row<'a> {
        kind: &'a str,
        index: usize,
        seed: u64,
        value: f64,
    }
    let mut rows: Vec<Row> = rec
        .cell_values
        .iter()
        .enumerate()
        .map(|(i, &v)| Row { kind: "cell", index: i, seed: rec.spatial_seed, value: v })
        .collect();
    rows.extend(rec.central_values.iter().enumerate().map(|(i, &v)| Row { kind: "central", index: i, seed: plan.base_seed ^ i as u64, value: v }));
    out.ledgers.push(ledger("ergodic.csv", &["kind", "index", "seed", "value"], &rows)?);
    Ok(out)
}

fn boundary(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let gs = cfg.grid_spec()?;
    let bs = cfg.section(&cfg.boundary, "boundary")?;
    let b = cfg.physics.as_ref().map_or(0.0, |p| p.fields[0]);
    let plan = BoundaryPlan {
        model: cfg.model.clone(),
        dim: gs.dim,
        spacing: gs.spacing()?,
        sides: bs.sides.clone(),
        pad: bs.pad,
        b,
        xi: c64::new(bs.xi[0], bs.xi[1]),
        depths: bs.depths.clone().unwrap_or_else(|| (2..=8).collect()),
        seed: cfg.seeds.base,
    };
    plan.model.validate().map_err(Failure::config)?;
    let rec = run_boundary_layer_probe(&plan).map_err(|e| match e {
        Error::InvalidParameter(_) => Failure::config(e),
        e => Failure::runtime(e),
    })?;
    let mut out = Outcome::new();
    if rec.rows.len() >= 2 {
        out.assertions.push(Assertion {
            name: "boundary-exponent".into(),
            anchor: "boundary layer: volume-normalized trace difference ~ L^(d-1)/L^d".into(),
            value: rec.exponent,
            threshold: cfg.tolerances.exponent_band,
            relation: "|x+1|<=".into(),
            pass: (rec.exponent + 1.0).abs() <= cfg.tolerances.exponent_band,
            detail: String::new(),
        });
    }
    out.assertions.push(Assertion::holds("depth-monotone", "boundary-localized kernel difference decays with depth", rec.depth_monotone));
    out.notes.push(format!("depth decay rate per unit d(x)+d(y): {:.4}", rec.depth_rate));
    out.ledgers.push(ledger("boundary.csv", &["L", "n_small", "n_big", "normalized_trace_diff", "max_diag_diff"], &rec.rows)?);
    out.ledgers.push(ledger("depth_profile.csv", &["kappa", "max_diag_diff"], &rec.depth_profile)?);
    Ok(out)
}
