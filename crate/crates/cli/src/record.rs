use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qqr::albrekht::{DegreeReport, StageTimings};
use serde::Serialize;
use serde_json::Value;

/// Wall-clock seconds per stage plus the running total in execution order.
#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub riccati: f64,
    pub schur: f64,
    pub rhs: Vec<f64>,
    pub solve: Vec<f64>,
    pub feedback: Vec<f64>,
    pub cumulative: Vec<(String, f64)>,
    pub total: f64,
}

impl From<&StageTimings> for Timings {
    fn from(t: &StageTimings) -> Self {
        let mut cumulative = Vec::new();
        let mut clock = 0.0;
        let mut mark = |label: String, dt: f64| {
            clock += dt;
            cumulative.push((label, clock));
        };
        mark("riccati".into(), t.riccati);
        mark("schur".into(), t.schur);
        for (i, ((rhs, solve), feedback)) in t.rhs.iter().zip(&t.solve).zip(&t.feedback).enumerate()
        {
            let p = i + 3;
            mark(format!("rhs_{p}"), *rhs);
            mark(format!("solve_{p}"), *solve);
            mark(format!("feedback_{}", p - 1), *feedback);
        }
        Timings {
            riccati: t.riccati,
            schur: t.schur,
            rhs: t.rhs.clone(),
            solve: t.solve.clone(),
            feedback: t.feedback.clone(),
            cumulative,
            total: clock,
        }
    }
}

/// Provenance of one command invocation, or of one bench row.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    /// `ok`, `not computed: size`, or `failed: <message>`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
    pub reports: Vec<DegreeReport>,
    pub outputs: Vec<PathBuf>,
}

impl RunRecord {
    pub fn new(command: &str) -> Self {
        RunRecord {
            command: command.to_owned(),
            parameters: BTreeMap::new(),
            status: "ok".to_owned(),
            timings: None,
            reports: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters.insert(
            key.to_owned(),
            serde_json::to_value(value).expect("parameters serialize"),
        );
        self
    }
}

/// `coeffs.json` → `coeffs.run.json`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}
