//! CSV ingestion and atomic file output.
//!
//! Samples travel as comma-separated rows of d decimal floats; lines
//! starting with `#` are comments; no header row. Floats are written with
//! 17 significant digits so a synth → analyze round trip is bit-exact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use moment_spectra::SampleSet;

use crate::CliError;

pub fn read_samples(path: &Path) -> Result<SampleSet, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;

    let mut dim = 0usize;
    let mut points: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or_default();
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if dim == 0 {
            dim = record.len();
        } else if record.len() != dim {
            return Err(CliError::Data(format!(
                "{}: line {line}: expected {dim} columns, found {}",
                path.display(),
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {line}, column {}: not a number: {field:?}",
                    path.display(),
                    col + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::Data(format!(
                    "{}: line {line}, column {}: non-finite value",
                    path.display(),
                    col + 1
                )));
            }
            points.push(value);
        }
    }
    if points.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no sample rows",
            path.display()
        )));
    }
    SampleSet::uniform(dim, points).map_err(|e| CliError::Data(e.to_string()))
}

/// Writes via a sibling temp file plus rename so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let tmp: PathBuf = {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(format!(".tmp.{}", std::process::id()));
        path.with_file_name(name)
    };
    let io_err = |e: std::io::Error| CliError::Data(format!("{}: {e}", path.display()));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(contents).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

/// CSV body for a sample set: d columns, one row per point, 17
/// significant digits.
pub fn samples_to_csv(header: &str, s: &SampleSet) -> String {
    let mut out = String::new();
    out.push_str(header);
    for k in 0..s.len() {
        let row: Vec<String> = s.point(k).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV body for per-atom decomposition masses: the original coordinates
/// plus the two half-measure masses.
pub fn assignment_to_csv(s: &SampleSet, mass1: &[f64], mass2: &[f64]) -> String {
    let d = s.dim();
    let mut out = String::new();
    let coords: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    out.push_str(&format!("# columns: {},w1,w2\n", coords.join(",")));
    for k in 0..s.len() {
        let mut row: Vec<String> = s.point(k).iter().map(|v| format!("{v:.16e}")).collect();
        row.push(format!("{:.16e}", mass1[k]));
        row.push(format!("{:.16e}", mass2[k]));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
