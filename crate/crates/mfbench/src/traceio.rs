//! Trace and verdict CSV files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mfcore::diagnostics::IterRecord;
use thiserror::Error;

pub const TRACE_HEADER: [&str; 8] = ["iter", "error", "sigma_r_core", "leakage_x", "leakage_y", "weak_opt", "eta_used", "elapsed_ns"];
pub const VERDICT_HEADER: [&str; 8] = [
    "run_id",
    "verdict",
    "phase2_slope",
    "termination",
    "align_ok",
    "sigma_bound_ok",
    "quad_contract_ok",
    "weakopt_plateau_ok",
];
const CONFIG_PREFIX: &str = "# config: ";

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Malformed { path: PathBuf, line: u64, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TraceIoError + '_ {
    move |source| TraceIoError::Io { path: path.to_path_buf(), source }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<fs::File, TraceIoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::File::create(path).map_err(io_err(path))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, TraceIoError> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_io(path: &Path, e: csv::Error) -> TraceIoError {
    TraceIoError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

pub fn write_trace(path: &Path, config: &str, records: &[IterRecord]) -> Result<(), TraceIoError> {
    let mut file = create(path)?;
    file.write_all(format!("{CONFIG_PREFIX}{config}\n").as_bytes()).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(TRACE_HEADER).map_err(|e| csv_io(path, e))?;
    for r in records {
        let row = [
            r.t.to_string(),
            fmt_float(r.error),
            fmt_float(r.sigma_r_core),
            fmt_float(r.leakage_x),
            r.leakage_y.map(fmt_float).unwrap_or_default(),
            fmt_float(r.weak_opt),
            fmt_float(r.eta_used),
            r.elapsed_ns.to_string(),
        ];
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub config: String,
    pub records: Vec<IterRecord>,
}

/// csv's own message carries a position relative to the stripped body;
/// callers report file lines instead.
fn describe(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => format!("expected {expected_len} fields, found {len}"),
        csv::ErrorKind::Utf8 { err, .. } => format!("invalid UTF-8 in field {}", err.field() + 1),
        _ => e.to_string(),
    }
}

pub fn read_trace(path: &Path) -> Result<TraceFile, TraceIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let malformed = |line: u64, msg: String| TraceIoError::Malformed { path: path.to_path_buf(), line, msg };
    let first = text.lines().next().ok_or_else(|| malformed(1, "empty file".into()))?;
    let config = first
        .strip_prefix(CONFIG_PREFIX)
        .ok_or_else(|| malformed(1, format!("expected a '{}' line", CONFIG_PREFIX.trim_end())))?
        .to_string();
    let body = &text[first.len()..].trim_start_matches(['\r', '\n']);

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header = rdr.headers().map_err(|e| malformed(2, describe(&e)))?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(malformed(2, format!("header must be '{}'", TRACE_HEADER.join(","))));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        // +1 for the config line we stripped
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() + 1).unwrap_or(0);
            malformed(line, describe(&e))
        })?;
        let line = row.position().map(|p| p.line() + 1).unwrap_or(0);
        let float = |i: usize| -> Result<f64, TraceIoError> {
            row[i].parse::<f64>().map_err(|_| malformed(line, format!("column '{}': bad number '{}'", TRACE_HEADER[i], &row[i])))
        };
        let int = |i: usize| -> Result<u64, TraceIoError> {
            row[i].parse::<u64>().map_err(|_| malformed(line, format!("column '{}': bad integer '{}'", TRACE_HEADER[i], &row[i])))
        };
        records.push(IterRecord {
            t: int(0)? as usize,
            error: float(1)?,
            sigma_r_core: float(2)?,
            leakage_x: float(3)?,
            leakage_y: if row[4].is_empty() { None } else { Some(float(4)?) },
            weak_opt: float(5)?,
            eta_used: float(6)?,
            elapsed_ns: int(7)?,
        });
    }
    Ok(TraceFile { config, records })
}

pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), TraceIoError> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_io(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: usize, y: Option<f64>) -> IterRecord {
        IterRecord {
            t,
            error: 0.1 / (t as f64 + 1.0),
            sigma_r_core: 0.5,
            leakage_x: 0.0,
            leakage_y: y,
            weak_opt: f64::NAN,
            eta_used: 0.5,
            elapsed_ns: 42,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let recs = vec![rec(0, None), rec(1, None)];
        write_trace(&path, "m=3", &recs).unwrap();
        let back = read_trace(&path).unwrap();
        assert_eq!(back.config, "m=3");
        for (a, b) in recs.iter().zip(&back.records) {
            assert_eq!(a.error.to_bits(), b.error.to_bits());
            assert!(b.weak_opt.is_nan());
            assert_eq!(b.leakage_y, None);
        }
        let recs = vec![rec(0, Some(1e-17))];
        write_trace(&path, "m=3", &recs).unwrap();
        assert_eq!(read_trace(&path).unwrap().records[0].leakage_y, Some(1e-17));
    }

    #[test]
    fn malformed_inputs_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "").unwrap();
        assert!(matches!(read_trace(&path), Err(TraceIoError::Malformed { line: 1, .. })));
        fs::write(&path, "# config: m=3\niter,error\n").unwrap();
        assert!(matches!(read_trace(&path), Err(TraceIoError::Malformed { line: 2, .. })));
        let good = format!("# config: m=3\n{}\n0,1,1,0,,0,0,1\n1,x,1,0,,0,0,1\n", TRACE_HEADER.join(","));
        fs::write(&path, good).unwrap();
        let err = read_trace(&path).unwrap_err();
        assert!(matches!(err, TraceIoError::Malformed { line: 4, .. }), "{err}");
        assert!(err.to_string().contains("bad.csv:4"));
        let ragged = format!("# config: m=3\n{}\n0,1,1,0,,0,0,1\n1,1,1\n", TRACE_HEADER.join(","));
        fs::write(&path, ragged).unwrap();
        let err = read_trace(&path).unwrap_err().to_string();
        assert!(err.ends_with("bad.csv:4: expected 8 fields, found 3"), "{err}");
    }
}
