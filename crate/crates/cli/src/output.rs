//! CSV and JSON writers. Reals are printed with 17 significant digits.

use std::path::Path;

use dressed_resolvent::Complex64;
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `{"re": [[..]], "im": [[..]]}`, row-major.
pub fn complex_matrix(m: &DMatrix<Complex64>) -> Value {
    let part = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
            .collect()
    };
    json!({ "re": part(|c| c.re), "im": part(|c| c.im) })
}

/// Header cell with its unit, e.g. `energy [J]`.
pub fn col(name: &str, unit: &str) -> String {
    format!("{name} [{unit}]")
}
