use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use diamag_cli::commands::ThermoRow;
use diamag_cli::output::{read_csv, Summary};
use diamag_cli::run;

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn diamag(args: &[&str]) -> i32 {
    run(std::iter::once("diamag").chain(args.iter().copied()))
}

fn only_run_dir(out: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

const TOY: &str = r#"
[spectrum]
eigenvalues = [0.0]
volume = 1.0

[physics]
betas = [1.0]
fugacities = [0.5]
"#;

const FREE_1D: &str = r#"
[grid]
dim = 1
side = 6.0
spacing = 0.5

[physics]
fields = [0.0, 0.7]
betas = [1.0]
fugacities = [0.5]
statistics = ["fermi", "bose"]
"#;

#[test]
fn single_level_pressure_is_log_one_plus_z() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "toy.toml", TOY);
    let out = tmp.path().join("runs");
    assert_eq!(diamag(&["thermo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let dir = only_run_dir(&out);
    let rows: Vec<ThermoRow> = read_csv(&dir.join("thermo.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let p = r.pressure.unwrap();
        assert!((p - 1.5f64.ln()).abs() < 1e-12, "{:?}: {p}", r.path);
    }
    for f in ["manifest.json", "summary.json", "summary.txt", "timings.csv"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn unknown_keys_and_mismatched_commands_are_configuration_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let bad = config(tmp.path(), "bad.toml", &format!("{TOY}\n[seeds]\nbase = 1\nbogus = 2\n"));
    assert_eq!(diamag(&["thermo", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    let other = config(tmp.path(), "other.toml", &format!("command = \"sweep\"\n{TOY}"));
    assert_eq!(diamag(&["thermo", "--config", other.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert_eq!(diamag(&["thermo", "--out", out.to_str().unwrap()]), 2);
    let no_grid = config(tmp.path(), "nogrid.toml", "[physics]\nbetas = [1.0]\nfugacities = [0.5]\n");
    assert_eq!(diamag(&["identities", "--config", no_grid.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none(), "no run directory on config errors");
}

#[test]
fn reruns_are_byte_identical_and_get_fresh_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "free.toml", FREE_1D);
    let out = tmp.path().join("runs");
    for _ in 0..2 {
        assert_eq!(diamag(&["thermo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
    dirs.sort();
    assert_eq!(dirs.len(), 2);
    assert!(dirs[1].to_str().unwrap().ends_with(&format!("{}-2", dirs[0].file_name().unwrap().to_str().unwrap())));
    for f in ["thermo.csv", "summary.json", "summary.txt"] {
        assert_eq!(fs::read(dirs[0].join(f)).unwrap(), fs::read(dirs[1].join(f)).unwrap(), "{f}");
    }
    // a different seed is a different configuration
    assert_eq!(diamag(&["thermo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9"]), 0);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 3);
}

#[test]
fn failed_assertions_set_the_exit_code_only_in_strict_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "strict.toml", &format!("{FREE_1D}\n[tolerances]\npath = -1.0\n"));
    let out = tmp.path().join("runs");
    let args = ["thermo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(diamag(&args), 1);
    let mut report = args.to_vec();
    report.extend(["--assert-level", "report-only"]);
    assert_eq!(diamag(&report), 0);
}

#[test]
fn one_dimensional_identities_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "id.toml", FREE_1D);
    let out = tmp.path().join("runs");
    assert_eq!(diamag(&["identities", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let s: Summary = serde_json::from_slice(&fs::read(only_run_dir(&out).join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.status, "PASS");
    assert_eq!(s.failed, 0);
    assert!(s.passed > 20);
}

#[test]
fn bose_fugacity_above_the_ground_state_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "[spectrum]\neigenvalues = [0.0, 1.0]\nvolume = 1.0\n[physics]\nbetas = [1.0]\nfugacities = [1.5]\nstatistics = [\"bose\"]\n";
    let cfg = config(tmp.path(), "bose.toml", body);
    let out = tmp.path().join("runs");
    assert_eq!(diamag(&["thermo", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn export_round_trips_the_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
command = "sweep"
[grid]
dim = 1
spacing = 0.5
[physics]
betas = [1.0]
fugacities = [0.5]
[sweep]
sides = [4.0, 6.0, 8.0, 10.0]
"#;
    let cfg = config(tmp.path(), "sweep.toml", body);
    let out = tmp.path().join("runs");
    diamag(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--assert-level", "report-only"]);
    let dir = only_run_dir(&out);
    assert_eq!(diamag(&["export", dir.to_str().unwrap()]), 0);

    #[derive(serde::Deserialize)]
    struct P {
        #[serde(rename = "L")]
        side: f64,
        mean: f64,
        count: usize,
    }
    let table: Vec<P> = read_csv(&dir.join("tables/p_vs_L.csv")).unwrap();
    let records: Vec<ThermoRow> = read_csv(&dir.join("records.csv")).unwrap();
    assert_eq!(table.len(), 4);
    for t in &table {
        let r = records
            .iter()
            .find(|r| r.side == t.side && r.path.as_str() == "eigensum")
            .unwrap();
        assert_eq!(t.count, 1);
        assert_eq!(t.mean, r.pressure.unwrap(), "L = {}", t.side);
    }
    assert!(dir.join("tables/COLUMNS.md").is_file());
}

#[test]
fn export_of_an_empty_ledger_gives_header_only_tables() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("records.csv"), "model,seed,d,L,h,b,beta,z,epsilon,path,P,rho,X1,X2,X3\n").unwrap();
    let dest = tmp.path().join("t");
    assert_eq!(diamag(&["export", tmp.path().to_str().unwrap(), "--to", dest.to_str().unwrap()]), 0);
    for (f, header) in [
        ("p_vs_L.csv", "L,b,beta,z,epsilon,count,mean,std_error\n"),
        ("var_vs_L.csv", "L,b,beta,z,epsilon,observable,count,variance\n"),
        ("x2_vs_z.csv", "z,L,b,beta,epsilon,count,mean,std_error\n"),
        ("decay_fits.csv", "b,beta,z,epsilon,observable,rate,expected,residual,pass\n"),
    ] {
        assert_eq!(fs::read_to_string(dest.join(f)).unwrap(), header, "{f}");
    }
    let missing = tempfile::tempdir().unwrap();
    assert_eq!(diamag(&["export", missing.path().to_str().unwrap()]), 2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_diamag");
    assert_eq!(Command::new(bin).arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(Command::new(bin).arg("no-such-command").output().unwrap().status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "toy.toml", TOY);
    let o = Command::new(bin)
        .args(["thermo", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("r").to_str().unwrap()])
        .env("DIAMAG_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("thermo PASS"));
}
