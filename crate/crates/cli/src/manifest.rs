//! The run manifest: configuration, inputs, timings, checks and artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// A failed required check turns the run into a computational failure.
    pub required: bool,
    pub detail: String,
}

pub struct RunManifest {
    pub path: PathBuf,
    /// Set when `--manifest` chose the path explicitly.
    pub pinned: bool,
    subcommand: String,
    argv: Vec<String>,
    pub config: BTreeMap<String, String>,
    inputs: Vec<(PathBuf, String)>,
    stages: Vec<(String, f64)>,
    checks: Vec<Check>,
    artifacts: Vec<(PathBuf, String)>,
    results: BTreeMap<String, Value>,
    started: SystemTime,
    clock: Instant,
}

impl RunManifest {
    pub fn new(path: PathBuf, subcommand: &str) -> Self {
        RunManifest {
            path,
            pinned: false,
            subcommand: subcommand.to_string(),
            argv: std::env::args().collect(),
            config: BTreeMap::new(),
            inputs: Vec::new(),
            stages: Vec::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            results: BTreeMap::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    /// Place the manifest next to the primary output unless pinned.
    pub fn place(&mut self, path: PathBuf) {
        if !self.pinned {
            self.path = path;
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let sum = sha256_file(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push((path.to_path_buf(), sum));
        Ok(())
    }

    /// Run `f` and record its wall time under `name`.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stages.push((name.to_string(), t.elapsed().as_secs_f64()));
        out
    }

    pub fn check(&mut self, name: &str, passed: bool, required: bool, detail: String) {
        if !passed {
            log::warn!("check `{name}` failed: {detail}");
        }
        self.checks.push(Check { name: name.to_string(), passed, required, detail });
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn artifact(&mut self, path: &Path) -> CliResult<()> {
        let sum = sha256_file(path)?;
        self.artifacts.push((path.to_path_buf(), sum));
        Ok(())
    }

    #[cfg(test)]
    pub fn artifacts(&self) -> &[(PathBuf, String)] {
        &self.artifacts
    }

    pub fn failed_required(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.required && !c.passed).collect()
    }

    pub fn to_json(&self, outcome: &Result<(), CliError>) -> Value {
        let started = self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let status = match outcome {
            Ok(()) => json!({ "status": "success", "exit_code": 0 }),
            Err(e) => {
                json!({ "status": "failure", "kind": e.kind(), "exit_code": e.exit_code(), "message": e.to_string() })
            }
        };
        json!({
            "tool": "logchoquard",
            "version": logchoquard::VERSION,
            "subcommand": self.subcommand,
            "argv": self.argv,
            "config": self.config,
            "inputs": self.inputs.iter().map(|(p, h)| json!({ "path": p.display().to_string(), "sha256": h })).collect::<Vec<_>>(),
            "started_unix": started,
            "wall_clock_s": self.clock.elapsed().as_secs_f64(),
            "stages": self.stages.iter().map(|(n, t)| json!({ "name": n, "seconds": t })).collect::<Vec<_>>(),
            "checks": self.checks.iter().map(|c| json!({ "name": c.name, "passed": c.passed, "required": c.required, "detail": c.detail })).collect::<Vec<_>>(),
            "results": self.results,
            "artifacts": self.artifacts.iter().map(|(p, h)| json!({ "path": p.display().to_string(), "sha256": h })).collect::<Vec<_>>(),
            "outcome": status,
        })
    }

    pub fn write(&self, outcome: &Result<(), CliError>) -> std::io::Result<()> {
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let text = serde_json::to_string_pretty(&self.to_json(outcome)).expect("manifest serializes");
        fs::write(&self.path, text + "\n")
    }
}
