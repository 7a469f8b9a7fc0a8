//! Artifact writers. Every file written here is checksummed into the manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use logchoquard::field::io::{sidecar_path, write_field, write_radial_csv, FieldMeta};
use logchoquard::field::{Field2D, RadialProfile};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

/// `# logchoquard <version> <subcommand> key=value ...`
pub fn provenance(subcommand: &str, config: &BTreeMap<String, String>) -> String {
    let mut s = format!("# logchoquard {} {subcommand}", logchoquard::VERSION);
    for (k, v) in config {
        s.push_str(&format!(" {k}={v}"));
    }
    s
}

pub fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    Ok(())
}

/// Outputs may never overwrite inputs.
pub fn refuse_overwrite(outputs: &[&Path], inputs: &[&Path]) -> CliResult<()> {
    for o in outputs {
        for i in inputs {
            let same = match (fs::canonicalize(o), fs::canonicalize(i)) {
                (Ok(a), Ok(b)) => a == b,
                _ => o == i,
            };
            if same {
                return Err(CliError::usage(format!("output {} would overwrite input {}", o.display(), i.display())));
            }
        }
    }
    Ok(())
}

/// `path` with its extension replaced, or `suffix` appended to the stem.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// RFC-4180 table with a `#` provenance line on top.
pub struct Table {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create(path: &Path, provenance: &str, header: &[&str]) -> CliResult<Self> {
        ensure_parent(path)?;
        let mut file =
            BufWriter::new(File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?);
        write!(file, "{provenance}\r\n")?;
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(file);
        writer.write_record(header)?;
        Ok(Table { path: path.to_path_buf(), writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self, m: &mut RunManifest) -> CliResult<()> {
        self.writer.flush()?;
        drop(self.writer);
        m.artifact(&self.path)
    }
}

pub fn field(path: &Path, f: &Field2D, meta: &FieldMeta, m: &mut RunManifest) -> CliResult<()> {
    ensure_parent(path)?;
    write_field(path, f, meta)?;
    m.artifact(path)?;
    m.artifact(&sidecar_path(path))
}

pub fn radial(path: &Path, p: &RadialProfile, provenance: &str, m: &mut RunManifest) -> CliResult<()> {
    ensure_parent(path)?;
    write_radial_csv(File::create(path)?, p, &[provenance])?;
    m.artifact(path)
}

pub fn text(path: &Path, body: &str, m: &mut RunManifest) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, body)?;
    m.artifact(path)
}

/// Shortest round-trip decimal.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `key = value` lines for text reports.
pub fn report<K: AsRef<str>>(entries: &[(K, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{} = {v}\n", k.as_ref())).collect()
}
