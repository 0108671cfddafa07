//! JSON documents exchanged between commands.
//!
//! Matrices are arrays of columns; every matrix entry and coefficient is
//! written with 17 significant digits so that reading a file back gives the
//! identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::albrekht::{
    DegreeReport, PolyFeedbackLaw, PolyValueFunction, QqrSolution, QuadraticSystem,
};
use crate::error::{QqrError, Result};
use crate::kron::{symmetrize, CoeffVector, Matrix};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemFile {
    pub name: String,
    pub system: QuadraticSystem,
    pub metadata: SystemMetadata,
}

fn push_number(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("writing to a String cannot fail");
}

fn numbers_json(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 24 + 2);
    out.push('[');
    for (i, &x) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_number(&mut out, x);
    }
    out.push(']');
    out
}

fn columns_json(m: &Matrix) -> String {
    let mut out = String::from("[");
    for (j, col) in m.column_iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        out.push_str(&numbers_json(col.as_slice()));
    }
    out.push(']');
    out
}

fn raw(s: String) -> Box<RawValue> {
    RawValue::from_string(s).expect("generated JSON is well formed")
}

#[derive(Serialize)]
struct SystemOut<'a> {
    name: &'a str,
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Box<RawValue>,
    #[serde(rename = "B")]
    b: Box<RawValue>,
    #[serde(rename = "N")]
    nq: Box<RawValue>,
    #[serde(rename = "Q2")]
    q2: Box<RawValue>,
    #[serde(rename = "R2")]
    r2: Box<RawValue>,
    metadata: &'a SystemMetadata,
}

#[derive(Deserialize)]
struct SystemIn {
    name: String,
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "N")]
    nq: Vec<Vec<f64>>,
    #[serde(rename = "Q2")]
    q2: Vec<Vec<f64>>,
    #[serde(rename = "R2")]
    r2: Vec<Vec<f64>>,
    #[serde(default)]
    metadata: SystemMetadata,
}

pub fn system_file_json(file: &SystemFile) -> String {
    let sys = &file.system;
    let out = SystemOut {
        name: &file.name,
        n: sys.state_dim(),
        m: sys.input_dim(),
        a: raw(columns_json(&sys.a)),
        b: raw(columns_json(&sys.b)),
        nq: raw(columns_json(&sys.n)),
        q2: raw(columns_json(&sys.q2)),
        r2: raw(columns_json(&sys.r2)),
        metadata: &file.metadata,
    };
    let mut s = serde_json::to_string_pretty(&out).expect("system document serializes");
    s.push('\n');
    s
}

fn matrix_from_columns(
    field: &str,
    cols: Vec<Vec<f64>>,
    rows: usize,
    ncols: usize,
) -> Result<Matrix> {
    if cols.len() != ncols {
        return Err(QqrError::parse(
            field,
            format!("expected {ncols} columns, found {}", cols.len()),
        ));
    }
    let mut data = Vec::with_capacity(rows * ncols);
    for (j, col) in cols.into_iter().enumerate() {
        if col.len() != rows {
            return Err(QqrError::parse(
                field,
                format!("column {j} has {} entries, expected {rows}", col.len()),
            ));
        }
        data.extend(col);
    }
    Ok(Matrix::from_vec(rows, ncols, data))
}

pub fn read_system(text: &str) -> Result<SystemFile> {
    let doc: SystemIn =
        serde_json::from_str(text).map_err(|e| QqrError::parse("system file", e.to_string()))?;
    let (n, m) = (doc.n, doc.m);
    if n == 0 || m == 0 {
        return Err(QqrError::parse("n/m", "dimensions must be positive"));
    }
    let system = QuadraticSystem {
        a: matrix_from_columns("A", doc.a, n, n)?,
        b: matrix_from_columns("B", doc.b, n, m)?,
        n: matrix_from_columns("N", doc.nq, n, n * n)?,
        q2: matrix_from_columns("Q2", doc.q2, n, n)?,
        r2: matrix_from_columns("R2", doc.r2, m, m)?,
    };
    system
        .validate()
        .map_err(|e| QqrError::parse("system", e.to_string()))?;
    Ok(SystemFile {
        name: doc.name,
        system,
        metadata: doc.metadata,
    })
}

pub fn save_system(path: &Path, file: &SystemFile) -> Result<()> {
    std::fs::write(path, system_file_json(file))?;
    Ok(())
}

pub fn load_system(path: &Path) -> Result<SystemFile> {
    read_system(&std::fs::read_to_string(path)?)
}

/// Canonical coefficients of a synthesized law: permutation-symmetric `v_d`
/// and rows of `K_d`.
#[derive(Clone, Debug)]
pub struct CoefficientFile {
    pub system: String,
    pub method: String,
    pub value: PolyValueFunction,
    pub feedback: PolyFeedbackLaw,
    pub riccati_residual: f64,
    pub stability_margin: f64,
    pub reports: Vec<DegreeReport>,
}

impl CoefficientFile {
    /// Symmetrizes every coefficient of `solution`.
    pub fn from_solution(system: &str, method: &str, solution: &QqrSolution) -> Result<Self> {
        let value =
            PolyValueFunction::new(solution.value.coeffs().iter().map(symmetrize).collect())?;
        let n = solution.value.base_dim();
        let gains = solution
            .feedback
            .gains()
            .iter()
            .enumerate()
            .map(|(i, k)| symmetrize_rows(k, n, i + 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoefficientFile {
            system: system.to_owned(),
            method: method.to_owned(),
            value,
            feedback: PolyFeedbackLaw::new(gains)?,
            riccati_residual: solution.riccati.residual,
            stability_margin: solution.riccati.margin,
            reports: solution.reports.clone(),
        })
    }
}

/// Applies [`symmetrize`] to each row of the degree-`d` gain `k` over `n`
/// states.
pub fn symmetrize_rows(k: &Matrix, n: usize, d: usize) -> Result<Matrix> {
    let mut out = k.clone();
    for (i, row) in k.row_iter().enumerate() {
        let c = CoeffVector::new(n, d, row.iter().copied().collect())?;
        out.set_row(
            i,
            &nalgebra::RowDVector::from_row_slice(symmetrize(&c).values()),
        );
    }
    Ok(out)
}

#[derive(Serialize)]
struct ValueOut {
    order: usize,
    coefficients: Box<RawValue>,
}

#[derive(Serialize)]
struct GainOut {
    degree: usize,
    rows: Box<RawValue>,
}

#[derive(Serialize)]
struct CoefficientsOut<'a> {
    system: &'a str,
    method: &'a str,
    n: usize,
    m: usize,
    degree: usize,
    value: Vec<ValueOut>,
    feedback: Vec<GainOut>,
    riccati_residual: f64,
    stability_margin: f64,
    reports: &'a [DegreeReport],
}

#[derive(Deserialize)]
struct ValueIn {
    order: usize,
    coefficients: Vec<f64>,
}

#[derive(Deserialize)]
struct GainIn {
    degree: usize,
    rows: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct CoefficientsIn {
    system: String,
    method: String,
    n: usize,
    m: usize,
    value: Vec<ValueIn>,
    feedback: Vec<GainIn>,
    #[serde(default)]
    riccati_residual: Option<f64>,
    #[serde(default)]
    stability_margin: Option<f64>,
}

fn rows_json(k: &Matrix) -> String {
    let mut out = String::from("[");
    for (i, row) in k.row_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let row: Vec<f64> = row.iter().copied().collect();
        out.push_str(&numbers_json(&row));
    }
    out.push(']');
    out
}

pub fn coefficient_file_json(file: &CoefficientFile) -> String {
    let out = CoefficientsOut {
        system: &file.system,
        method: &file.method,
        n: file.value.base_dim(),
        m: file.feedback.input_dim(),
        degree: file.feedback.degree(),
        value: file
            .value
            .coeffs()
            .iter()
            .map(|c| ValueOut {
                order: c.order(),
                coefficients: raw(numbers_json(c.values())),
            })
            .collect(),
        feedback: file
            .feedback
            .gains()
            .iter()
            .enumerate()
            .map(|(i, k)| GainOut {
                degree: i + 1,
                rows: raw(rows_json(k)),
            })
            .collect(),
        riccati_residual: file.riccati_residual,
        stability_margin: file.stability_margin,
        reports: &file.reports,
    };
    let mut s = serde_json::to_string_pretty(&out).expect("coefficient document serializes");
    s.push('\n');
    s
}

pub fn read_coefficients(text: &str) -> Result<CoefficientFile> {
    let doc: CoefficientsIn = serde_json::from_str(text)
        .map_err(|e| QqrError::parse("coefficient file", e.to_string()))?;
    let (n, m) = (doc.n, doc.m);
    let mut coeffs = Vec::new();
    for (i, v) in doc.value.into_iter().enumerate() {
        if v.order != i + 2 {
            return Err(QqrError::parse(
                "value",
                format!("entry {i} has order {}, expected {}", v.order, i + 2),
            ));
        }
        let c = CoeffVector::new(n, v.order, v.coefficients)
            .map_err(|e| QqrError::parse(format!("value[{i}].coefficients"), e.to_string()))?;
        coeffs.push(c);
    }
    let mut gains = Vec::new();
    for (i, k) in doc.feedback.into_iter().enumerate() {
        if k.degree != i + 1 {
            return Err(QqrError::parse(
                "feedback",
                format!("entry {i} has degree {}, expected {}", k.degree, i + 1),
            ));
        }
        let cols = n
            .checked_pow(k.degree as u32)
            .ok_or_else(|| QqrError::parse("feedback", "size overflow"))?;
        if k.rows.len() != m || k.rows.iter().any(|r| r.len() != cols) {
            return Err(QqrError::parse(
                format!("feedback[{i}].rows"),
                format!("expected {m} rows of {cols} entries"),
            ));
        }
        gains.push(Matrix::from_row_iterator(
            m,
            cols,
            k.rows.into_iter().flatten(),
        ));
    }
    let value =
        PolyValueFunction::new(coeffs).map_err(|e| QqrError::parse("value", e.to_string()))?;
    let feedback =
        PolyFeedbackLaw::new(gains).map_err(|e| QqrError::parse("feedback", e.to_string()))?;
    Ok(CoefficientFile {
        system: doc.system,
        method: doc.method,
        value,
        feedback,
        riccati_residual: doc.riccati_residual.unwrap_or(f64::NAN),
        stability_margin: doc.stability_margin.unwrap_or(f64::NAN),
        reports: Vec::new(),
    })
}

/// Largest per-coefficient relative differences between two coefficient
/// files, `‖a_d − b_d‖ / ‖a_d‖` (absolute where `a_d = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disparity {
    pub value: f64,
    pub feedback: f64,
}

impl Disparity {
    pub fn max(&self) -> f64 {
        self.value.max(self.feedback)
    }
}

fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn coefficient_disparity(a: &CoefficientFile, b: &CoefficientFile) -> Result<Disparity> {
    let shape = |f: &CoefficientFile| {
        (
            f.value.base_dim(),
            f.feedback.input_dim(),
            f.feedback.degree(),
        )
    };
    if shape(a) != shape(b) || a.value.degree() != b.value.degree() {
        return Err(QqrError::contract(
            "coefficient_disparity",
            format!("(n, m, degree) differ: {:?} vs {:?}", shape(a), shape(b)),
        ));
    }
    let value = a
        .value
        .coeffs()
        .iter()
        .zip(b.value.coeffs())
        .map(|(x, y)| relative_difference(x.values(), y.values()))
        .fold(0.0, f64::max);
    let feedback = a
        .feedback
        .gains()
        .iter()
        .zip(b.feedback.gains())
        .map(|(x, y)| relative_difference(x.as_slice(), y.as_slice()))
        .fold(0.0, f64::max);
    Ok(Disparity { value, feedback })
}

pub fn save_coefficients(path: &Path, file: &CoefficientFile) -> Result<()> {
    std::fs::write(path, coefficient_file_json(file))?;
    Ok(())
}

pub fn load_coefficients(path: &Path) -> Result<CoefficientFile> {
    read_coefficients(&std::fs::read_to_string(path)?)
}
