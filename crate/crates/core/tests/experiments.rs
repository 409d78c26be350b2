use diamag::experiments::{run_convergence_sweep, run_disorder_ensemble, SweepPlan};
use diamag::potentials::{CouplingLaw, PotentialModel, Profile};
use diamag::thermo::Statistics;
use diamag::Error;

fn plan(model: PotentialModel, spacing: f64, sides: Vec<f64>, realizations: usize) -> SweepPlan {
    SweepPlan {
        model,
        dim: 2,
        spacing,
        sides,
        fields: vec![0.0],
        betas: vec![1.0],
        fugacities: vec![0.5],
        statistics: vec![Statistics::Fermi],
        realizations,
        base_seed: 31,
        charge_ratio: 1.0,
        cross_check: false,
        path_tolerance: 1e-6,
        third_order: false,
    }
}

fn alloy(coupling: CouplingLaw) -> PotentialModel {
    PotentialModel::Alloy { profile: Profile::BoxIndicator { height: 1.0 }, coupling }
}

#[test]
fn periodic_pressure_differences_decay_like_surface_over_volume() {
    let p = plan(PotentialModel::Periodic { profile: Profile::cosine(0.5), coupling: 1.0 }, 0.5, vec![8.0, 12.0, 16.0, 24.0], 1);
    let st = run_convergence_sweep(&p).unwrap();
    let c = st.convergence.iter().find(|c| c.observable == "P").unwrap();
    assert!(c.rate >= 0.8, "rate {}", c.rate);
    assert!(c.pass);
    // 24 is the largest box; the pressure increases towards its limit
    let ps: Vec<f64> = [8.0, 12.0, 16.0, 24.0].iter().map(|&l| st.row(l, 0.0, "P").unwrap().mean).collect();
    assert!(ps.windows(2).all(|w| w[1] > w[0]), "{ps:?}");
}

#[test]
fn ensemble_needs_thirty_realizations() {
    let p = plan(alloy(CouplingLaw::Uniform { low: 0.0, high: 1.0 }), 1.0, vec![4.0, 6.0], 29);
    assert!(matches!(run_disorder_ensemble(&p), Err(Error::Insufficient(_))));
}

#[test]
fn degenerate_ensemble_has_zero_variance() {
    let p = plan(alloy(CouplingLaw::Constant { value: 0.5 }), 1.0, vec![4.0, 6.0], 30);
    let st = run_disorder_ensemble(&p).unwrap();
    for r in st.rows.iter().filter(|r| r.observable == "P" || r.observable == "X2") {
        assert_eq!(r.variance, 0.0, "{r:?}");
        assert_eq!(r.count, 30);
    }
    for v in &st.variance_tests {
        assert!(v.p_value.is_nan() && !v.decreasing, "{v:?}");
    }
}

#[test]
fn ensemble_pressure_self_averages_and_halves_agree() {
    let mut p = plan(alloy(CouplingLaw::Uniform { low: 0.0, high: 1.0 }), 1.0, vec![4.0, 8.0], 40);
    p.cross_check = true;
    let st = run_disorder_ensemble(&p).unwrap();
    assert!(st.failures.is_empty(), "{:?}", st.failures);
    assert!(st.max_path_discrepancy <= 1e-6);
    let v = st.variance_tests.iter().find(|v| v.observable == "P").unwrap();
    assert!(v.var_large < v.var_small && v.p_value < 0.05, "{v:?}");
    for s in st.splits.iter().filter(|s| s.observable == "P") {
        assert!(s.sigmas <= 2.0, "{s:?}");
    }
}

#[test]
fn ensembles_are_reproducible() {
    let p = plan(alloy(CouplingLaw::Uniform { low: 0.0, high: 1.0 }), 1.0, vec![4.0, 6.0], 30);
    let a = run_disorder_ensemble(&p).unwrap();
    let b = run_disorder_ensemble(&p).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.seed, x.side, x.pressure, x.x2), (y.seed, y.side, y.pressure, y.x2));
    }
}
