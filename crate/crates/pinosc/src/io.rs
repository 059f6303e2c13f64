//! File contracts: single-signal trace CSVs, matrix CSVs and versioned JSON
//! documents.
//!
//! Trace CSV contract: a header line `# columns: time_s,<name>_<unit>`
//! followed by one `time,value` pair per line; decimal points, no thousands
//! separators, scientific notation with 13 significant digits. Writing is
//! deterministic, so write -> read -> write is byte-stable.

use std::fmt::Write as _;
use std::path::Path;

use crate::trace::{TimeTrace, Unit};

/// Schema version stamped into every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: file holds no samples")]
    Empty { path: String },
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column name (`<name>_<unit>`) for a trace.
pub fn column_name(name: &str, unit: Unit) -> String {
    format!("{}_{}", name, unit.suffix())
}

/// Serialize a trace to the CSV contract. The `# grid:` line carries the
/// exact time axis so a read/analyze round trip is bit-identical; readers
/// fall back to reconstructing the grid from the time column when the line
/// is absent (externally produced files).
pub fn trace_to_csv(trace: &TimeTrace, name: &str) -> String {
    let mut out = String::with_capacity(trace.len() * 44 + 96);
    let _ = writeln!(out, "# columns: time_s,{}", column_name(name, trace.unit));
    let _ = writeln!(
        out,
        "# grid: t0={},dt={}",
        fmt_float(trace.t0),
        fmt_float(trace.dt)
    );
    for (i, &v) in trace.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{}", fmt_float(trace.time(i)), fmt_float(v));
    }
    out
}

pub fn write_trace(path: &Path, trace: &TimeTrace, name: &str) -> Result<(), IoError> {
    std::fs::write(path, trace_to_csv(trace, name)).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Parse a trace CSV; returns the trace and its column name (unit decoded
/// from the suffix when recognized). Malformed rows report their line
/// number.
pub fn parse_trace_csv(text: &str, path_label: &str) -> Result<(TimeTrace, String), IoError> {
    let mut times: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut name = String::from("signal");
    let mut unit = Unit::Arbitrary;
    let mut grid: Option<(f64, f64)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(g) = rest.trim().strip_prefix("grid:") {
                let mut t0 = None;
                let mut dt = None;
                for field in g.trim().split(',') {
                    if let Some(v) = field.trim().strip_prefix("t0=") {
                        t0 = v.parse().ok();
                    } else if let Some(v) = field.trim().strip_prefix("dt=") {
                        dt = v.parse().ok();
                    }
                }
                if let (Some(t0), Some(dt)) = (t0, dt) {
                    grid = Some((t0, dt));
                }
            }
            if let Some(cols) = rest.trim().strip_prefix("columns:") {
                let mut parts = cols.trim().split(',');
                let time_col = parts.next().unwrap_or("").trim();
                if time_col != "time_s" {
                    return Err(IoError::Malformed {
                        path: path_label.into(),
                        line: line_no,
                        message: format!("first column must be time_s, got {time_col:?}"),
                    });
                }
                if let Some(value_col) = parts.next() {
                    let value_col = value_col.trim();
                    if let Some(pos) = value_col.rfind('_') {
                        if let Some(u) = Unit::from_suffix(&value_col[pos + 1..]) {
                            unit = u;
                            name = value_col[..pos].to_string();
                        } else if let Some(u) = double_suffix(value_col) {
                            unit = u.1;
                            name = u.0;
                        } else {
                            name = value_col.to_string();
                        }
                    } else {
                        name = value_col.to_string();
                    }
                }
            }
            continue;
        }
        let mut fields = line.split(',');
        let (Some(ts), Some(vs)) = (fields.next(), fields.next()) else {
            return Err(IoError::Malformed {
                path: path_label.into(),
                line: line_no,
                message: "expected two comma-separated fields".into(),
            });
        };
        if fields.next().is_some() {
            return Err(IoError::Malformed {
                path: path_label.into(),
                line: line_no,
                message: "expected exactly two fields".into(),
            });
        }
        let t: f64 = ts.trim().parse().map_err(|_| IoError::Malformed {
            path: path_label.into(),
            line: line_no,
            message: format!("unparseable time {ts:?}"),
        })?;
        let v: f64 = vs.trim().parse().map_err(|_| IoError::Malformed {
            path: path_label.into(),
            line: line_no,
            message: format!("unparseable value {vs:?}"),
        })?;
        times.push(t);
        values.push(v);
    }

    if values.is_empty() {
        return Err(IoError::Empty {
            path: path_label.into(),
        });
    }
    if values.len() < 2 {
        return Err(IoError::Malformed {
            path: path_label.into(),
            line: 0,
            message: "a trace needs at least 2 samples".into(),
        });
    }

    // Exact grid when the writer recorded it; otherwise the span-averaged
    // step, which is immune to the one-ulp cancellation of adjacent
    // differences when t0 >> dt.
    let (t0, dt) = grid.unwrap_or_else(|| {
        (
            (times[0]),
            (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64,
        )
    });
    if !(dt > 0.0) {
        return Err(IoError::Malformed {
            path: path_label.into(),
            line: 3,
            message: format!("non-increasing time axis (dt = {dt})"),
        });
    }
    for (i, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > 1e-6 * dt {
            return Err(IoError::Malformed {
                path: path_label.into(),
                line: i + 3,
                message: format!("non-uniform sampling: step {step} vs dt {dt}"),
            });
        }
    }

    let trace = TimeTrace::new(t0, dt, values, unit).map_err(|e| IoError::Malformed {
        path: path_label.into(),
        line: 0,
        message: e.to_string(),
    })?;
    Ok((trace, name))
}

/// Units whose suffix itself contains an underscore (e.g. `a_cm2`).
fn double_suffix(col: &str) -> Option<(String, Unit)> {
    for unit in [Unit::AmpPerCm2, Unit::PhotonsPerSec, Unit::VoltPerCm] {
        let suffix = format!("_{}", unit.suffix());
        if let Some(name) = col.strip_suffix(&suffix) {
            return Some((name.to_string(), unit));
        }
    }
    None
}

pub fn read_trace(path: &Path) -> Result<(TimeTrace, String), IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    parse_trace_csv(&text, &path.display().to_string())
}

/// Matrix CSV: header `# columns: t_kelvin,v_<bias...>`, one row per
/// temperature. Works for numeric and string-valued matrices.
pub fn matrix_to_csv<T: std::fmt::Display>(
    voltages: &[f64],
    temperatures: &[f64],
    rows: &[Vec<T>],
) -> String {
    let mut out = String::new();
    let header: Vec<String> = voltages
        .iter()
        .map(|v| format!("v_{}", fmt_float(*v)))
        .collect();
    let _ = writeln!(out, "# columns: t_kelvin,{}", header.join(","));
    for (ti, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{},{}", fmt_float(temperatures[ti]), cells.join(","));
    }
    out
}

/// Strength matrix with NaN cells rendered as `nan`.
pub fn strength_matrix_csv(voltages: &[f64], temperatures: &[f64], m: &[Vec<f64>]) -> String {
    let rows: Vec<Vec<String>> = m
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    if v.is_nan() {
                        "nan".into()
                    } else {
                        fmt_float(v)
                    }
                })
                .collect()
        })
        .collect();
    matrix_to_csv(voltages, temperatures, &rows)
}

/// Wrap a serializable payload in a versioned JSON document.
pub fn json_document<T: serde::Serialize>(kind: &str, payload: &T) -> serde_json::Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "payload": payload,
    })
}

pub fn write_json(path: &Path, doc: &serde_json::Value) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(doc).expect("serializable document");
    std::fs::write(path, text + "\n").map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Deterministic per-task seed derivation: the splitmix64 finalizer applied
/// to the master seed advanced by the task index, so every cell's stream is
/// independent of scheduling and worker count.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
