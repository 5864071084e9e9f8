//! File formats shared by the library and the command-line tool.
//!
//! * System files: JSON with row-major `A`, `B` (optional), `C`.
//! * Scenario files: JSON with 1-based attacked index lists `K`, `L`, the
//!   injected signals `E` (p x T) and `W` (m x (T-1)), and the horizon `T`.
//! * Measurement/input files: plain CSV, one time step per column.
//! * Pole files: JSON list of `[re, im]` pairs.
//!
//! All JSON emitted by this crate carries `"schema": 1`.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{AttackScenario, LinearSystem};

pub const SCHEMA_VERSION: u32 = 1;

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>, Error> {
    if rows.is_empty() {
        return Err(Error::Schema(format!("{name}: matrix must have at least one row")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Schema(format!("{name}: ragged rows")));
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::Schema(format!("{name}[{i}][{j}]: not a finite number")));
            }
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

#[derive(Debug, Serialize, Deserialize)]
struct SystemFile {
    #[serde(default = "default_schema")]
    schema: u32,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn check_schema(schema: u32) -> Result<(), Error> {
    if schema != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "unsupported schema version {schema} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

/// Parse a system from JSON text.
pub fn system_from_json(text: &str) -> Result<LinearSystem, Error> {
    let file: SystemFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    check_schema(file.schema)?;
    let a = rows_to_matrix(&file.a, "A")?;
    let n = a.nrows();
    let b = match &file.b {
        Some(rows) if !rows.is_empty() && !rows[0].is_empty() => rows_to_matrix(rows, "B")?,
        _ => DMatrix::zeros(n, 0),
    };
    let c = rows_to_matrix(&file.c, "C")?;
    LinearSystem::new(a, b, c)
}

/// Serialize a system to JSON text.
pub fn system_to_json(system: &LinearSystem) -> String {
    let file = SystemFile {
        schema: SCHEMA_VERSION,
        a: matrix_to_rows(system.a()),
        b: (system.m() > 0).then(|| matrix_to_rows(system.b())),
        c: matrix_to_rows(system.c()),
    };
    serde_json::to_string_pretty(&file).expect("system serializes")
}

pub fn load_system(path: impl AsRef<Path>) -> Result<LinearSystem, Error> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    system_from_json(&text)
}

pub fn save_system(system: &LinearSystem, path: impl AsRef<Path>) -> Result<(), Error> {
    std::fs::write(path.as_ref(), system_to_json(system))
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    #[serde(default = "default_schema")]
    schema: u32,
    /// 1-based attacked sensor indices.
    #[serde(rename = "K", default)]
    sensors: Vec<usize>,
    /// 1-based attacked actuator indices.
    #[serde(rename = "L", default)]
    actuators: Vec<usize>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    e: Option<Vec<Vec<f64>>>,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    w: Option<Vec<Vec<f64>>>,
    #[serde(rename = "T")]
    horizon: usize,
}

fn one_based_to_set(indices: &[usize], count: usize, what: &str) -> Result<BTreeSet<usize>, Error> {
    let mut set = BTreeSet::new();
    for &i in indices {
        if i == 0 || i > count {
            return Err(Error::Schema(format!(
                "{what} index {i} out of range 1..={count}"
            )));
        }
        set.insert(i - 1);
    }
    Ok(set)
}

/// Parse a scenario from JSON text; `p` and `m` come from the system the
/// scenario applies to (omitted signals default to zero).
pub fn scenario_from_json(text: &str, p: usize, m: usize) -> Result<AttackScenario, Error> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    check_schema(file.schema)?;
    if file.horizon == 0 {
        return Err(Error::Schema("T: horizon must be at least 1".into()));
    }
    let sensors = one_based_to_set(&file.sensors, p, "K: sensor")?;
    let actuators = one_based_to_set(&file.actuators, m, "L: actuator")?;
    let e = match &file.e {
        Some(rows) => {
            let e = rows_to_matrix(rows, "E")?;
            if e.nrows() != p || e.ncols() != file.horizon {
                return Err(Error::Schema(format!(
                    "E: expected {p}x{}, got {}x{}",
                    file.horizon,
                    e.nrows(),
                    e.ncols()
                )));
            }
            e
        }
        None => DMatrix::zeros(p, file.horizon),
    };
    let w = match &file.w {
        Some(rows) if file.horizon > 1 => {
            let w = rows_to_matrix(rows, "W")?;
            if w.nrows() != m || w.ncols() != file.horizon - 1 {
                return Err(Error::Schema(format!(
                    "W: expected {m}x{}, got {}x{}",
                    file.horizon - 1,
                    w.nrows(),
                    w.ncols()
                )));
            }
            w
        }
        _ => DMatrix::zeros(m, file.horizon - 1),
    };
    AttackScenario::new(sensors, actuators, e, w)
}

pub fn load_scenario(path: impl AsRef<Path>, p: usize, m: usize) -> Result<AttackScenario, Error> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    scenario_from_json(&text, p, m)
}

/// Serialize a scenario to JSON text (1-based index lists).
pub fn scenario_to_json(scenario: &AttackScenario) -> String {
    let file = ScenarioFile {
        schema: SCHEMA_VERSION,
        sensors: scenario.sensor_set().iter().map(|&i| i + 1).collect(),
        actuators: scenario.actuator_set().iter().map(|&i| i + 1).collect(),
        e: Some(matrix_to_rows(scenario.e())),
        w: (scenario.w().ncols() > 0).then(|| matrix_to_rows(scenario.w())),
        horizon: scenario.horizon(),
    };
    serde_json::to_string_pretty(&file).expect("scenario serializes")
}

/// Parse a matrix from CSV text: one row per line, one time step per column.
pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>, Error> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in trimmed.split(',').enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::Schema(format!("line {} column {}: not a number: {field:?}", lineno + 1, col + 1))
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    rows_to_matrix(&rows, "csv")
}

/// Render a matrix as CSV, one row per line.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let fields: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>, Error> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    matrix_from_csv(&text)
}

pub fn save_matrix_csv(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<(), Error> {
    std::fs::write(path.as_ref(), matrix_to_csv(m))
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
}

/// Parse a state vector from a JSON array of numbers.
pub fn vector_from_json(text: &str) -> Result<DVector<f64>, Error> {
    let values: Vec<f64> = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Schema("vector contains a non-finite entry".into()));
    }
    Ok(DVector::from_vec(values))
}

pub fn load_vector_json(path: impl AsRef<Path>) -> Result<DVector<f64>, Error> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    vector_from_json(&text)
}

/// Parse a pole list from a JSON array of `[re, im]` pairs.
pub fn poles_from_json(text: &str) -> Result<Vec<Complex<f64>>, Error> {
    let pairs: Vec<[f64; 2]> = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if pairs.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Schema("pole list contains a non-finite entry".into()));
    }
    Ok(pairs.iter().map(|p| Complex::new(p[0], p[1])).collect())
}

pub fn load_poles(path: impl AsRef<Path>) -> Result<Vec<Complex<f64>>, Error> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    poles_from_json(&text)
}

/// Sensor/actuator labels sidecar for generated swing systems.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelsFile {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub sensors: Vec<String>,
    pub actuators: Vec<String>,
}
