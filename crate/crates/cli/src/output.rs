//! Machine-readable result emission: a JSON envelope per run plus CSV files
//! with fixed 17-significant-digit floats, so outputs diff cleanly across
//! runs and machines.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const TOOL: &str = "kpartite";

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub outputs: T,
}

/// Fixed-width float for CSV cells: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_report<T: Serialize>(
    dir: &Path,
    envelope: &Envelope<'_, T>,
) -> Result<PathBuf, CliError> {
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(envelope)
        .map_err(|e| CliError::io(format!("serialize report: {e}")))?;
    fs::write(&path, text + "\n")
        .map_err(|e| CliError::io(format!("write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_csv<I>(dir: &Path, name: &str, preamble: &[String], header: &str, rows: I) -> Result<PathBuf, CliError>
where
    I: IntoIterator<Item = String>,
{
    let path = dir.join(name);
    let file =
        fs::File::create(&path).map_err(|e| CliError::io(format!("create {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    let mut emit = |line: &str| -> Result<(), CliError> {
        writeln!(w, "{line}").map_err(|e| CliError::io(format!("write {}: {e}", path.display())))
    };
    for line in preamble {
        emit(line)?;
    }
    emit(header)?;
    for row in rows {
        emit(&row)?;
    }
    Ok(path)
}
