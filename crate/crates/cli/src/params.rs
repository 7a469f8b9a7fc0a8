//! Parameter resolution: command-line flag, then config file, then default.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use logchoquard::field::io::parse_key_values;

use crate::error::{CliError, CliResult};

/// Largest `nx · ny` accepted without `--max-cells`.
pub const DEFAULT_MAX_CELLS: usize = 1 << 24;

pub struct Params {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    /// Resolved values, for the manifest and CSV headers.
    pub snapshot: BTreeMap<String, String>,
    pub max_cells: usize,
}

/// Shortest text for a resolved value: `1e-10` rather than `0.0000000001`.
fn compact(s: String) -> String {
    match s.parse::<f64>() {
        Ok(v) if s.contains('.') && format!("{v:?}").len() < s.len() => format!("{v:?}"),
        _ => s,
    }
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Params {
    pub fn new(config: Option<&Path>, max_cells: Option<usize>) -> CliResult<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in
                parse_key_values(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?
            {
                if file.insert(normalize(&k), v).is_some() {
                    return Err(CliError::usage(format!("config {}: duplicate key `{k}`", path.display())));
                }
            }
        }
        Ok(Params {
            file,
            used: BTreeSet::new(),
            snapshot: BTreeMap::new(),
            max_cells: max_cells.unwrap_or(DEFAULT_MAX_CELLS),
        })
    }

    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let key = normalize(key);
        self.used.insert(key.clone());
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(&key) {
                Some(s) => Some(s.parse::<T>().map_err(|e| CliError::usage(format!("config key `{key}`: {e}")))?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.snapshot.insert(key, compact(v.to_string()));
        }
        Ok(value)
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.get_opt(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.snapshot.insert(normalize(key), compact(default.to_string()));
                Ok(default)
            }
        }
    }

    pub fn positive(&mut self, key: &str, flag: Option<f64>, default: f64) -> CliResult<f64> {
        let v = self.get(key, flag, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::usage(format!("--{} must be positive, got {v}", key.replace('_', "-"))));
        }
        Ok(v)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>, default: &str) -> CliResult<PathBuf> {
        let p = self.path_opt(key, flag)?.unwrap_or_else(|| PathBuf::from(default));
        self.snapshot.insert(normalize(key), p.display().to_string());
        Ok(p)
    }

    pub fn path_opt(&mut self, key: &str, flag: Option<PathBuf>) -> CliResult<Option<PathBuf>> {
        Ok(self.get_opt(key, flag.map(PathDisplay))?.map(|p| p.0))
    }

    /// Comma-separated list of numbers.
    pub fn list(&mut self, key: &str, flag: Option<String>, default: &str) -> CliResult<Vec<f64>> {
        let raw = self.get(key, flag, default.to_string())?;
        raw.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::usage(format!("--{key}: `{s}`: {e}"))))
            .collect()
    }

    /// Reject `nx · ny` above the memory cap.
    pub fn guard_cells(&self, nx: usize, ny: usize) -> CliResult<()> {
        match nx.checked_mul(ny) {
            Some(c) if c <= self.max_cells && nx > 0 && ny > 0 => Ok(()),
            _ => Err(CliError::usage(format!(
                "grid {nx} x {ny} exceeds the memory guard of {} cells (raise with --max-cells)",
                self.max_cells
            ))),
        }
    }

    /// Config-file keys that no resolved parameter consumed.
    pub fn finish(&self) -> CliResult<()> {
        let unknown: Vec<&str> = self.file.keys().filter(|k| !self.used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::usage(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }
}

/// `PathBuf` with the `FromStr + Display` pair the resolver needs.
struct PathDisplay(PathBuf);

impl FromStr for PathDisplay {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(PathDisplay(PathBuf::from(s)))
    }
}

impl Display for PathDisplay {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0.display())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_file(text: &str) -> (tempfile::TempDir, Params) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, text).unwrap();
        let p = Params::new(Some(&path), None).unwrap();
        (dir, p)
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let (_d, mut p) = with_file("a = 2.5\nrmax = 30\n");
        assert_eq!(p.get("a", Some(1.5), 1.0).unwrap(), 1.5);
        assert_eq!(p.get("rmax", None, 20.0).unwrap(), 30.0);
        assert_eq!(p.get("n", None, 2000usize).unwrap(), 2000);
        assert_eq!(p.snapshot["a"], "1.5");
        assert_eq!(p.snapshot["n"], "2000");
        p.finish().unwrap();
    }

    #[test]
    fn unknown_and_malformed_keys_are_usage_errors() {
        let (_d, mut p) = with_file("a = 1\nbogus = 3\n");
        p.get("a", None, 1.0).unwrap();
        assert!(matches!(p.finish(), Err(CliError::Usage(_))));
        let (_d, mut p) = with_file("n = many\n");
        assert!(matches!(p.get("n", None, 1usize), Err(CliError::Usage(_))));
        let (_d, mut p) = with_file("tol = -1\n");
        assert!(matches!(p.positive("tol", None, 1e-10), Err(CliError::Usage(_))));
    }

    #[test]
    fn dashes_and_underscores_match() {
        let (_d, mut p) = with_file("xi-max = 0.25\n");
        assert_eq!(p.get("xi_max", None, 0.5).unwrap(), 0.25);
    }

    #[test]
    fn memory_guard() {
        let p = Params::new(None, None).unwrap();
        assert!(p.guard_cells(100_000, 100_000).is_err());
        assert!(p.guard_cells(usize::MAX, 2).is_err());
        assert!(p.guard_cells(0, 16).is_err());
        p.guard_cells(512, 512).unwrap();
    }

    #[test]
    fn snapshot_uses_short_floats() {
        let mut p = Params::new(None, None).unwrap();
        p.get("fp_tol", None, 1e-10).unwrap();
        p.get("a", None, 1.0).unwrap();
        p.get("eps", None, 0.05).unwrap();
        assert_eq!(p.snapshot["fp_tol"], "1e-10");
        assert_eq!(p.snapshot["a"], "1");
        assert_eq!(p.snapshot["eps"], "0.05");
    }

    #[test]
    fn lists_parse() {
        let mut p = Params::new(None, None).unwrap();
        assert_eq!(p.list("eps", None, "0.2, 0.1,0.05").unwrap(), vec![0.2, 0.1, 0.05]);
        assert!(p.list("eps", Some("0.2,x".into()), "").is_err());
    }
}
