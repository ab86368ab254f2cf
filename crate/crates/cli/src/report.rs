//! Output directory, JSON reports and CSV files.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

const LOCK: &str = ".kinkspec.lock";

/// 17 significant digits, the shortest width that round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// An output directory held exclusively for the duration of one run.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

fn io(context: String) -> impl FnOnce(std::io::Error) -> CliError {
    move |source| CliError::Io { context, source }
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(io(format!("creating {}", dir.display())))?;
        let lock = dir.join(LOCK);
        OpenOptions::new().write(true).create_new(true).open(&lock).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::config("--out", format!("{} is in use by another run (remove {LOCK} if stale)", dir.display()))
            } else {
                io(format!("locking {}", dir.display()))(e)
            }
        })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(io(format!("writing {}", path.display())))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    /// Writes equal-length columns under `header`.
    pub fn csv_columns(&mut self, name: &str, header: &[String], columns: &[&[f64]]) -> Result<(), CliError> {
        let rows = columns.iter().map(|c| c.len()).max().unwrap_or(0);
        let mut w = self.open(name)?;
        let ctx = format!("writing {name}");
        let mut body = header.join(",");
        body.push('\n');
        for i in 0..rows {
            let line: Vec<String> = columns.iter().map(|c| c.get(i).map_or(String::new(), |v| fmt17(*v))).collect();
            body.push_str(&line.join(","));
            body.push('\n');
        }
        w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io(ctx))
    }

    /// Writes rows of preformatted cells.
    pub fn csv_rows(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        let mut body = header.join(",");
        body.push('\n');
        for r in rows {
            body.push_str(&r.join(","));
            body.push('\n');
        }
        w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io(format!("writing {name}")))
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialise");
        text.push('\n');
        let mut w = self.open(name)?;
        w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(io(format!("writing {name}")))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.dir.join(LOCK));
    }
}

/// A measured quantity against its acceptance bound.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance }
    }

    /// A yes/no condition, recorded as value `1` (holds) or `0`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, tolerance: 1.0, pass: ok }
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub command: &'static str,
    pub version: &'static str,
    pub config: &'a ExperimentConfig,
    pub outputs: serde_json::Value,
    pub checks: &'a [Check],
    pub pass: bool,
    pub files: Vec<String>,
    /// Wall-clock data lives in this file so the report stays byte-identical.
    pub timing_file: &'static str,
}

/// The `check | value | tolerance | status` table.
pub fn table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  {:>12}  {:>12}  status\n", "check", "value", "tolerance");
    for c in checks {
        let pad = width - c.name.chars().count();
        out.push_str(&format!(
            "{}{}  {:>12.4e}  {:>12.4e}  {}\n",
            c.name,
            " ".repeat(pad),
            c.value,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, std::f64::consts::PI, 1e21] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn directory_is_exclusive() {
        let tmp = tempfile::tempdir().unwrap();
        let a = OutputDir::create(tmp.path()).unwrap();
        assert!(OutputDir::create(tmp.path()).is_err());
        drop(a);
        OutputDir::create(tmp.path()).unwrap();
    }
}
