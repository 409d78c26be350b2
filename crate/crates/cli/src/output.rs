use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::Failure;

/// One checked statement of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    /// Short description of the mathematical statement being checked.
    pub anchor: String,
    pub value: f64,
    pub threshold: f64,
    /// How `value` is compared with `threshold`: `<=`, `>=`, `==`, `|x+1|<=`.
    pub relation: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, anchor: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            value,
            threshold,
            relation: "<=".into(),
            pass: value <= threshold,
            detail: String::new(),
        }
    }

    pub fn at_least(name: impl Into<String>, anchor: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            value,
            threshold,
            relation: ">=".into(),
            pass: value >= threshold,
            detail: String::new(),
        }
    }

    pub fn holds(name: impl Into<String>, anchor: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            relation: "==".into(),
            pass: ok,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

/// A CSV ledger rendered in memory.
pub struct Ledger {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Serializes `rows` with an explicit header, so an empty ledger still
/// carries its columns.
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(Failure::io)?;
    for r in rows {
        w.serialize(r).map_err(Failure::io)?;
    }
    w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))
}

pub fn ledger<T: Serialize>(name: &str, header: &[&str], rows: &[T]) -> Result<Ledger, Failure> {
    Ok(Ledger { name: name.into(), bytes: csv_bytes(header, rows)? })
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// A fresh directory `<out>/<command>-<hash16>`, suffixed `-2`, `-3`, …
/// when an earlier run already occupies the name.
pub fn fresh_run_dir(out: &Path, command: &str, hash: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(out).map_err(Failure::io)?;
    let stem = format!("{command}-{}", &hash[..16]);
    let mut k = 1;
    loop {
        let name = if k == 1 { stem.clone() } else { format!("{stem}-{k}") };
        let dir = out.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => k += 1,
            Err(e) => return Err(Failure::io(e)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub assert_level: String,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub status: String,
    pub passed: usize,
    pub failed: usize,
    pub assertions: Vec<Assertion>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Summary {
    pub fn new(command: &str, assertions: Vec<Assertion>, notes: Vec<String>) -> Self {
        let failed = assertions.iter().filter(|a| !a.pass).count();
        Self {
            command: command.into(),
            status: if failed == 0 { "PASS" } else { "FAIL" }.into(),
            passed: assertions.len() - failed,
            failed,
            assertions,
            notes,
        }
    }

    pub fn text(&self) -> String {
        let mut s = format!("{} {}: {} passed, {} failed\n", self.command, self.status, self.passed, self.failed);
        for a in &self.assertions {
            s += &format!(
                "{} {} value={:.6e} {} {:.6e} [{}]{}\n",
                if a.pass { "PASS" } else { "FAIL" },
                a.name,
                a.value,
                a.relation,
                a.threshold,
                a.anchor,
                if a.detail.is_empty() { String::new() } else { format!(" {}", a.detail) }
            );
        }
        for n in &self.notes {
            s += &format!("note: {n}\n");
        }
        s
    }
}

pub fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(dir.join(name), bytes).map_err(Failure::io)
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}
