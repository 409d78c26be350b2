//! Plot-ready tables derived from a run's `records.csv`.
//!
//! Everything is recomputed from the ledger, so exporting a copied or
//! archived run directory gives the same tables as the original run.

use serde::Serialize;
use std::path::{Path, PathBuf};

use diamag::experiments::EnsembleStats;
use diamag::potentials::PotentialModel;
use diamag::thermo::ThermoRecord;

use crate::commands::ThermoRow;
use crate::output::{csv_bytes, read_csv, write, Manifest};
use crate::Failure;

pub const COLUMNS: &str = "\
# Exported tables

All tables are comma separated with a header row. `epsilon` is +1 for
Fermi and -1 for Bose statistics; `b` is the field strength, `beta` the
inverse temperature and `z` the fugacity.

## p_vs_L.csv
Ensemble mean of the pressure per box side.
`L, b, beta, z, epsilon, count, mean, std_error`

## var_vs_L.csv
Sample variance (denominator count - 1) of every observable per box side.
`L, b, beta, z, epsilon, observable, count, variance`

## x2_vs_z.csv
Ensemble mean of the second susceptibility against fugacity.
`z, L, b, beta, epsilon, count, mean, std_error`

## decay_fits.csv
Power-law fits `|mean(L_{k+1}) - mean(L_k)| ~ L^-rate` of successive
ensemble-mean differences, with the expected rate and the fit residual.
`b, beta, z, epsilon, observable, rate, expected, residual, pass`
";

#[derive(Serialize)]
struct PRow {
    #[serde(rename = "L")]
    side: f64,
    b: f64,
    beta: f64,
    z: f64,
    epsilon: i32,
    count: usize,
    mean: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct VarRow<'a> {
    #[serde(rename = "L")]
    side: f64,
    b: f64,
    beta: f64,
    z: f64,
    epsilon: i32,
    observable: &'a str,
    count: usize,
    variance: f64,
}

#[derive(Serialize)]
struct ZRow {
    z: f64,
    #[serde(rename = "L")]
    side: f64,
    b: f64,
    beta: f64,
    epsilon: i32,
    count: usize,
    mean: f64,
    std_error: f64,
}

/// Statistics of a run directory, rebuilt from its records ledger.
pub fn load_stats(run_dir: &Path) -> Result<EnsembleStats, Failure> {
    let records = run_dir.join("records.csv");
    if !records.is_file() {
        return Err(Failure::Config(format!("{} has no records.csv ledger", run_dir.display())));
    }
    let rows: Vec<ThermoRow> = read_csv(&records)?;
    // the growth exponent only affects expected rates; a bare ledger gets 0
    let growth = std::fs::read(run_dir.join("manifest.json"))
        .ok()
        .and_then(|b| serde_json::from_slice::<Manifest>(&b).ok())
        .and_then(|m| m.config.get("model").cloned())
        .and_then(|v| serde_json::from_value::<PotentialModel>(v).ok())
        .map_or(0.0, |m| m.growth_exponent());
    Ok(EnsembleStats::from_records(rows.into_iter().map(ThermoRecord::from).collect(), growth))
}

pub fn export_tables(run_dir: &Path, dest: &Path) -> Result<Vec<PathBuf>, Failure> {
    let st = load_stats(run_dir)?;
    std::fs::create_dir_all(dest).map_err(Failure::io)?;

    let p: Vec<PRow> = st
        .rows
        .iter()
        .filter(|r| r.observable == "P")
        .map(|r| PRow { side: r.side, b: r.b, beta: r.beta, z: r.z, epsilon: r.epsilon, count: r.count, mean: r.mean, std_error: r.std_error })
        .collect();
    let var: Vec<VarRow> = st
        .rows
        .iter()
        .map(|r| VarRow { side: r.side, b: r.b, beta: r.beta, z: r.z, epsilon: r.epsilon, observable: &r.observable, count: r.count, variance: r.variance })
        .collect();
    let mut x2: Vec<ZRow> = st
        .rows
        .iter()
        .filter(|r| r.observable == "X2")
        .map(|r| ZRow { z: r.z, side: r.side, b: r.b, beta: r.beta, epsilon: r.epsilon, count: r.count, mean: r.mean, std_error: r.std_error })
        .collect();
    x2.sort_by(|a, b| {
        (a.epsilon, a.b, a.beta, a.side, a.z)
            .partial_cmp(&(b.epsilon, b.b, b.beta, b.side, b.z))
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let tables = [
        ("p_vs_L.csv", csv_bytes(&["L", "b", "beta", "z", "epsilon", "count", "mean", "std_error"], &p)?),
        ("var_vs_L.csv", csv_bytes(&["L", "b", "beta", "z", "epsilon", "observable", "count", "variance"], &var)?),
        ("x2_vs_z.csv", csv_bytes(&["z", "L", "b", "beta", "epsilon", "count", "mean", "std_error"], &x2)?),
        (
            "decay_fits.csv",
            csv_bytes(&["b", "beta", "z", "epsilon", "observable", "rate", "expected", "residual", "pass"], &st.convergence)?,
        ),
        ("COLUMNS.md", COLUMNS.as_bytes().to_vec()),
    ];
    let mut out = Vec::new();
    for (name, bytes) in tables {
        write(dest, name, &bytes)?;
        out.push(dest.join(name));
    }
    Ok(out)
}
