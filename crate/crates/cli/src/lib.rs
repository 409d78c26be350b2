//! `diamag` command-line driver: TOML config in, content-addressed run
//! directory with CSV ledgers, manifest and PASS/FAIL summary out.

pub mod commands;
pub mod config;
pub mod export;
pub mod output;

use clap::{Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use config::{Command, RunConfig};
use output::{fresh_run_dir, unix_now, write, Manifest, Summary};

#[derive(Debug)]
pub enum Failure {
    /// Malformed or inconsistent input; exit code 2.
    Config(String),
    /// The computation itself could not be carried out; exit code 1.
    Runtime(String),
}

impl Failure {
    pub fn config(e: diamag::Error) -> Self {
        Failure::Config(e.to_string())
    }

    pub fn runtime(e: diamag::Error) -> Self {
        Failure::Runtime(e.to_string())
    }

    pub fn io(e: impl fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssertLevel {
    /// Any failed assertion makes the exit code 1.
    Strict,
    /// Failures are recorded in the summary only.
    ReportOnly,
}

#[derive(Parser, Debug)]
#[command(name = "diamag", version, about = "Finite-volume diamagnetism laboratory")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `seeds.base`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "DIAMAG_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Parent directory of run directories.
    #[arg(long, global = true, default_value = "runs")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = AssertLevel::Strict)]
    pub assert_level: AssertLevel,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Subcommand, Debug)]
pub enum Sub {
    /// Pressure, density and X1/X2 on one box along every computation path.
    Thermo,
    /// Exact and h-convergent lattice identities of the resolvent expansion.
    Identities,
    /// Contour validation, branch-point rejection and contour independence.
    ContourCheck,
    /// Deterministic or averaged observables along an L ladder.
    Sweep,
    /// Disorder ensemble: variances, self-averaging and split-sample checks.
    Ensemble,
    /// Spatial unit-cell average against the ensemble average.
    Ergodic,
    /// Boundary-layer scaling of diagonal resolvent differences.
    Boundary,
    /// Plot-ready tables from a sweep or ensemble run directory.
    Export {
        run_dir: PathBuf,
        /// Destination directory (default `<RUN_DIR>/tables`).
        #[arg(long = "to")]
        to: Option<PathBuf>,
    },
}

impl Sub {
    fn command(&self) -> Option<Command> {
        Some(match self {
            Sub::Thermo => Command::Thermo,
            Sub::Identities => Command::Identities,
            Sub::ContourCheck => Command::ContourCheck,
            Sub::Sweep => Command::Sweep,
            Sub::Ensemble => Command::Ensemble,
            Sub::Ergodic => Command::Ergodic,
            Sub::Boundary => Command::Boundary,
            Sub::Export { .. } => return None,
        })
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    if cli.threads > 0 {
        // a second call within one process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let Some(command) = cli.command.command() else {
        let Sub::Export { run_dir, to } = &cli.command else { unreachable!() };
        let dest = to.clone().unwrap_or_else(|| run_dir.join("tables"));
        let files = export::export_tables(run_dir, &dest)?;
        for f in files {
            println!("{}", f.display());
        }
        return Ok(0);
    };

    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Failure::Config(format!(
                "config is for `{}` but `{}` was requested",
                c.as_str(),
                command.as_str()
            )));
        }
    }
    cfg.command = Some(command);
    if let Some(s) = cli.seed {
        cfg.seeds.base = s;
    }
    let hash = cfg.hash();

    let started = unix_now();
    let t0 = Instant::now();
    let outcome = commands::run(command, &cfg)?;
    let total = t0.elapsed().as_secs_f64();

    let dir = fresh_run_dir(&cli.out, command.as_str(), &hash)?;
    let mut files = Vec::new();
    for l in &outcome.ledgers {
        write(&dir, &l.name, &l.bytes)?;
        files.push(l.name.clone());
    }
    let summary = Summary::new(command.as_str(), outcome.assertions, outcome.notes);
    write(&dir, "summary.json", &serde_json::to_vec_pretty(&summary).map_err(Failure::io)?)?;
    write(&dir, "summary.txt", summary.text().as_bytes())?;
    let mut timings = String::from("stage,seconds\n");
    for (stage, s) in outcome.timings.iter().chain(std::iter::once(&("total".to_string(), total))) {
        timings += &format!("\"{stage}\",{s}\n");
    }
    write(&dir, "timings.csv", timings.as_bytes())?;
    files.extend(["summary.json", "summary.txt", "timings.csv"].map(String::from));
    let manifest = Manifest {
        tool: "diamag".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.as_str().into(),
        config_hash: hash,
        config: serde_json::to_value(&cfg).map_err(Failure::io)?,
        assert_level: match cli.assert_level {
            AssertLevel::Strict => "strict",
            AssertLevel::ReportOnly => "report-only",
        }
        .into(),
        threads: rayon::current_num_threads(),
        started_unix: started,
        finished_unix: unix_now(),
        files,
    };
    write(&dir, "manifest.json", &serde_json::to_vec_pretty(&manifest).map_err(Failure::io)?)?;

    print!("{}", summary.text());
    println!("run directory: {}", dir.display());
    Ok(if summary.failed > 0 && cli.assert_level == AssertLevel::Strict { 1 } else { 0 })
}
