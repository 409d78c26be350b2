//! Checks against oracles that do not share code with the implementation:
//! closed-form lattice Green functions and eigenvalues, brute-force lattice
//! sums, band integrals and plain matrix algebra.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diamag::linalg::{inverse, max_abs, max_abs_diff, trace, CMatrix};
use diamag::operator::{magnetic_phase, HamiltonianPolynomial};
use diamag::potentials::{CouplingLaw, Grid, PotentialField, PotentialModel, Profile};
use diamag::spectral::{eigensolve, eigenvalues, resolvent};
use diamag::thermo::{pressure_eigensum, Statistics, ThermoParams};
use diamag::c64;

fn gaussian() -> Profile {
    Profile::Gaussian { width: 0.4, radius: 1.2, height: 1.0 }
}

/// `Σ_j g_j u(x - j)` by a plain double loop over a window of sites.
fn lattice_sum(grid: &Grid, u: &Profile, g: impl Fn([i64; 2]) -> f64) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let x = grid.coord(i);
            let mut s = 0.0;
            for j1 in -12..=12i64 {
                for j2 in -12..=12i64 {
                    s += g([j1, j2]) * u.eval(&[x[0] - j1 as f64, x[1] - j2 as f64]);
                }
            }
            s
        })
        .collect()
}

#[test]
fn alloy_with_unit_couplings_is_the_brute_force_lattice_sum() {
    let grid = Grid::from_side_and_spacing(2, 6.0, 0.5).unwrap();
    let model = PotentialModel::Alloy { profile: gaussian(), coupling: CouplingLaw::Constant { value: 1.0 } };
    let field = PotentialField::sample(&grid, &model, 42).unwrap();
    let brute = lattice_sum(&grid, &gaussian(), |_| 1.0);
    for (a, b) in field.values.iter().zip(&brute) {
        assert_relative_eq!(*a, *b, max_relative = 1e-13, epsilon = 1e-15);
    }
    let periodic = PotentialField::sample(&grid, &PotentialModel::Periodic { profile: gaussian(), coupling: 1.0 }, 0).unwrap();
    assert_eq!(field.values, periodic.values);
}

#[test]
fn random_alloy_is_linear_in_its_couplings_and_reproducible() {
    // the couplings are recovered from a box-indicator realization, whose
    // value at a site is exactly that site's coupling
    let grid = Grid::from_side_and_spacing(2, 6.0, 0.5).unwrap();
    let law = CouplingLaw::Uniform { low: -1.0, high: 1.0 };
    let boxed = PotentialModel::Alloy { profile: Profile::BoxIndicator { height: 1.0 }, coupling: law };
    let smooth = PotentialModel::Alloy { profile: gaussian(), coupling: law };
    let coupling = |j: [i64; 2]| boxed.eval(42, &[j[0] as f64, j[1] as f64, 0.0], 2);
    let field = PotentialField::sample(&grid, &smooth, 42).unwrap();
    let brute = lattice_sum(&grid, &gaussian(), coupling);
    for (a, b) in field.values.iter().zip(&brute) {
        assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()), "{a} vs {b}");
    }
    assert_eq!(field, PotentialField::sample(&grid, &smooth, 42).unwrap());
    assert_ne!(field.values, PotentialField::sample(&grid, &smooth, 43).unwrap().values);
}

#[test]
fn poisson_mean_matches_campbell() {
    let u = Profile::CosineBump { radius: 0.5, height: 1.0 };
    let model = PotentialModel::Poisson { profile: u, intensity: 1.0 };
    let n = 10_000;
    let xs: Vec<f64> = (0..n).map(|s| model.eval(s as u64, &[0.0, 0.0, 0.0], 2)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    // midpoint rule for ∫u over the support square
    let m = 800;
    let d = 1.0 / m as f64;
    let mut integral = 0.0;
    for a in 0..m {
        for b in 0..m {
            integral += u.eval(&[-0.5 + (a as f64 + 0.5) * d, -0.5 + (b as f64 + 0.5) * d]) * d * d;
        }
    }
    assert!((mean - integral).abs() <= 3.0 * se, "mean {mean} ± {se}, ∫u = {integral}");
    assert_relative_eq!(integral, u.integral(2), max_relative = 1e-4);
}

#[test]
fn sparse_barriers_respect_their_envelope() {
    let (scale, alpha) = (1.5, 0.25);
    let model = PotentialModel::SparseBarrier { profile: Profile::BoxIndicator { height: 1.0 }, pitch: 3, presence: 0.7, scale, alpha };
    let grid = Grid::from_side_and_spacing(2, 30.0, 0.5).unwrap();
    let f = PotentialField::sample(&grid, &model, 7).unwrap();
    assert!(f.max_abs() > 0.0);
    for (i, v) in f.values.iter().enumerate() {
        let x = grid.coord(i);
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        assert!(*v >= 0.0 && v / (1.0 + r.powf(alpha)) <= scale, "{v} at {r}");
    }
}

#[test]
fn successive_shifts_compose() {
    let grid = Grid::from_side_and_spacing(2, 6.0, 0.5).unwrap();
    let model = PotentialModel::Alloy { profile: gaussian(), coupling: CouplingLaw::Uniform { low: 0.0, high: 1.0 } };
    let f = PotentialField::sample(&grid, &model, 3).unwrap();
    let two = f.shifted([1, 0, 0]).unwrap().shifted([0, 1, 0]).unwrap();
    assert_eq!(two.values, f.shifted([1, 1, 0]).unwrap().values);
    // the shifted field on the overlap equals the original one step over
    let s = f.shifted([1, 0, 0]).unwrap();
    let n = grid.n_per_side();
    for k2 in 0..n {
        for k1 in 0..n - 2 {
            assert_eq!(s.values[grid.flat_index([k1, k2, 0])], f.values[grid.flat_index([k1 + 2, k2, 0])]);
        }
    }
}

#[test]
fn time_reversal_pairs_spectra() {
    let grid = Grid::new(2, 2.0, 3).unwrap();
    let hp = HamiltonianPolynomial::free(&grid);
    for b in [0.0, 0.7] {
        let plus = eigenvalues(&hp.assemble(b).unwrap(), grid.volume()).unwrap().eigenvalues;
        let minus = eigenvalues(&hp.assemble(-b).unwrap(), grid.volume()).unwrap().eigenvalues;
        for (a, c) in plus.iter().zip(&minus) {
            assert!((a - c).abs() <= 1e-12, "{a} vs {c}");
        }
    }
}

#[test]
fn dirichlet_ground_state_closed_form_and_continuum_limit() {
    let side = 4.0;
    let continuum = 2.0 * PI * PI / (2.0 * side * side);
    let mut errs = Vec::new();
    for n in [7, 15, 31] {
        let g = Grid::new(2, side, n).unwrap();
        let h = g.spacing();
        let e0 = eigenvalues(&HamiltonianPolynomial::free(&g).assemble(0.0).unwrap(), g.volume()).unwrap().ground_state();
        let lattice = 2.0 * (1.0 - (PI * h / side).cos()) / (h * h);
        assert_relative_eq!(e0, lattice, max_relative = 1e-12);
        errs.push((h, (e0 - continuum).abs()));
    }
    let order = diamag::experiments::error_order(&errs).unwrap();
    assert!((order - 2.0).abs() < 0.05, "order {order}");
}

/// `(H - ξ)^{-1}` of the 1D Dirichlet lattice `-Δ_h/2` on `n` nodes:
/// `2h² sinh(i_< θ) sinh((n+1-i_>) θ) / (sinh θ sinh((n+1) θ))`,
/// `cosh θ = 1 - h² ξ`, nodes numbered from 1.
fn green_1d(n: usize, h: f64, xi: c64, i: usize, j: usize) -> c64 {
    let theta = (c64::new(1.0, 0.0) - xi * h * h).acosh();
    let (lo, hi) = (i.min(j) as f64 + 1.0, i.max(j) as f64 + 1.0);
    let np1 = n as f64 + 1.0;
    2.0 * h * h * (theta * lo).sinh() * (theta * (np1 - hi)).sinh() / (theta.sinh() * (theta * np1).sinh())
}

#[test]
fn one_dimensional_resolvent_matches_closed_form_green_function() {
    let (n, h) = (40, 0.25);
    let g = Grid::with_spacing(1, h, n).unwrap();
    let hp = HamiltonianPolynomial::free(&g);
    for xi in [c64::new(-1.3, 0.2), c64::new(2.0, -0.5), c64::new(-0.1, 0.0)] {
        let r = resolvent(&hp.assemble(0.0).unwrap(), xi, g.cell_volume()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((r.matrix[(i, j)] - green_1d(n, h, xi, i, j)).norm());
            }
        }
        assert!(worst <= 1e-12 * max_abs(&r.matrix), "xi = {xi}: {worst}");
    }
}

#[test]
fn boundary_difference_decays_at_the_continuum_rate() {
    // diagonal difference between a box and a larger concentric box, both
    // from the closed form; decays like exp(-2 sqrt(-2ξ) depth)
    let h = 0.05;
    let xi = c64::new(-2.0, 0.0);
    let (n_small, n_big) = (199, 599);
    let offset = (n_big - n_small) / 2;
    let mut pts = Vec::new();
    for i in 0..n_small / 2 {
        let depth = (i as f64 + 1.0) * h;
        if !(0.5..=3.0).contains(&depth) {
            continue;
        }
        let d = green_1d(n_small, h, xi, i, i) - green_1d(n_big, h, xi, i + offset, i + offset);
        pts.push((2.0 * depth, d.norm().ln()));
    }
    let (slope, _, _) = diamag::spectral::linear_fit(&pts).unwrap();
    assert!((-slope - 2.0).abs() < 0.02 * 2.0, "rate {}", -slope);

    // and the implementation's nested-box probe agrees with the closed form
    let small = Grid::with_spacing(1, 0.25, 19).unwrap();
    let big = Grid::with_spacing(1, 0.25, 59).unwrap();
    let diff = diamag::experiments::boundary::diagonal_difference(&small, &big, &PotentialModel::Zero, 0, 0.0, xi).unwrap();
    for (i, (_, v)) in diff.iter().enumerate() {
        let oracle = (green_1d(19, 0.25, xi, i, i) - green_1d(59, 0.25, xi, i + 20, i + 20)) / 0.25;
        assert!((v - oracle).norm() <= 1e-12, "{v} vs {oracle}");
    }
}

/// `(1/β) ∫_{-π/h}^{π/h} dk/2π · ε ln(1 + ε z e^{-β (1 - cos kh)/h²})`.
fn band_pressure(h: f64, tp: &ThermoParams) -> f64 {
    let m = 4000;
    let dk = 2.0 * PI / h / m as f64;
    let eps = tp.epsilon();
    (0..m)
        .map(|k| {
            let kk = -PI / h + (k as f64 + 0.5) * dk;
            let e = (1.0 - (kk * h).cos()) / (h * h);
            eps * (1.0 + eps * tp.z * (-tp.beta * e).exp()).ln()
        })
        .sum::<f64>()
        * dk
        / (2.0 * PI * tp.beta)
}

#[test]
fn free_pressure_approaches_the_band_integral() {
    // Euler-Maclaurin for the Dirichlet sum over k_m = mπ/L gives
    // P_L - P_∞ = -(f(0) + f(π/h)) / (2βL) + o(1/L), f the log-occupation
    let h = 2.0;
    for s in [Statistics::Fermi, Statistics::Bose] {
        let tp = ThermoParams::new(1.0, 0.5, s).unwrap();
        let p_inf = band_pressure(h, &tp);
        let eps = tp.epsilon();
        let f = |e: f64| eps * (1.0 + eps * tp.z * (-tp.beta * e).exp()).ln();
        let surface = (f(0.0) + f(2.0 / (h * h))) / (2.0 * tp.beta);
        let sides: &[f64] = if s == Statistics::Fermi { &[400.0, 1600.0, 3600.0] } else { &[400.0, 1600.0] };
        let mut gaps = Vec::new();
        for &side in sides {
            let g = Grid::from_side_and_spacing(1, side, h).unwrap();
            let sp = eigenvalues(&HamiltonianPolynomial::free(&g).assemble(0.0).unwrap(), g.volume()).unwrap();
            let gap = pressure_eigensum(&sp, &tp).unwrap() - p_inf;
            assert!((gap + surface / side).abs() <= 1e-3 / side, "{s:?} L = {side}: gap {gap:e}, surface {:e}", -surface / side);
            gaps.push(gap.abs());
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        if s == Statistics::Fermi {
            assert!(gaps[2] <= 1e-4, "gap {:e} at L = 3600", gaps[2]);
        }
    }
}

#[test]
fn resolvent_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 50;
    let mut m = CMatrix::zeros((n, n));
    for i in 0..n {
        m[(i, i)] = c64::new(rng.random_range(-2.0..2.0), 0.0);
        for j in 0..i {
            let z = c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    let sp = eigensolve(&m, 1.0).unwrap();
    assert!((trace(&m).re - sp.eigenvalues.iter().sum::<f64>()).abs() <= 1e-10);
    let shift = |xi: c64| {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] -= xi;
        }
        inverse(&a).unwrap()
    };
    let (x, y) = (c64::new(0.3, 0.7), c64::new(-1.1, -0.4));
    let lhs = shift(x) - shift(y);
    let rhs = shift(x).dot(&shift(y)).mapv(|v| v * (x - y));
    assert!(max_abs_diff(&lhs, &rhs) <= 1e-9 * max_abs(&lhs));
}

#[test]
fn current_commutator_trace_is_imaginary() {
    let grid = Grid::new(2, 3.0, 5).unwrap();
    let hp = HamiltonianPolynomial::free(&grid);
    let b = 0.4;
    let h = hp.assemble(b).unwrap();
    let e0 = eigenvalues(&h, grid.volume()).unwrap().ground_state();
    let r = resolvent(&h, c64::new(e0 - 0.5, 0.0), 1.0).unwrap().matrix;
    let (p1, p2) = (hp.momentum(0, b), hp.momentum(1, b));
    let t = trace(&(p1.dot(&r).dot(&p2) - p2.dot(&r).dot(&p1)));
    assert!(t.re.abs() <= 1e-12 * (1.0 + t.im.abs()), "{t}");
}

#[test]
fn triangle_phase_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut p = || [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.0];
    for _ in 0..10_000 {
        let (x, z1, z2) = (p(), p(), p());
        let flux = magnetic_phase(&x, &z1) + magnetic_phase(&z1, &z2) + magnetic_phase(&z2, &x);
        let d = |a: &[f64; 3], b: &[f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        assert!(flux.abs() <= d(&x, &z1) * d(&z1, &z2) + 1e-12);
    }
}
