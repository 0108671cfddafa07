use qqr::albrekht::solve_qqr;
use qqr::problems::{coefficient_disparity, CoefficientFile, SystemFile};
use qqr::QqrError;
use serde::Serialize;

use crate::commands::{burgers_file, random_file, solver_method, stage_of};
use crate::record::{sidecar, write_json, RunRecord};
use crate::{BenchArgs, Failure, Method, Problem};

/// One CSV row; `record` indexes the run-record sidecar.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub n: usize,
    pub method: &'static str,
    pub status: String,
    pub riccati_s: Option<f64>,
    pub schur_s: Option<f64>,
    pub rhs_s: Option<f64>,
    pub solve_s: Option<f64>,
    pub feedback_s: Option<f64>,
    pub total_s: Option<f64>,
    pub value_rel_diff: Option<f64>,
    pub feedback_rel_diff: Option<f64>,
    pub record: usize,
}

fn parse_range(spec: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Usage(format!("--range expects start:stop:step, got `{spec}`"));
    let parts: Vec<usize> = spec
        .split(':')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [start, stop, step] if step > 0 && start <= stop => {
            Ok((start..=stop).step_by(step).collect())
        }
        [start, stop] if start <= stop => Ok((start..=stop).collect()),
        _ => Err(bad()),
    }
}

pub fn sizes(a: &BenchArgs) -> Result<Vec<usize>, Failure> {
    let sizes = match (&a.sizes, &a.range) {
        (Some(s), _) => s.clone(),
        (None, Some(r)) => parse_range(r)?,
        (None, None) => Vec::new(),
    };
    if sizes.is_empty() {
        return Err(Failure::Usage(
            "empty size list; give --sizes or --range".to_owned(),
        ));
    }
    Ok(sizes)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Recursive => "recursive",
        Method::Full => "full",
    }
}

pub fn run(a: &BenchArgs) -> Result<(), Failure> {
    let sizes = sizes(a)?;
    if a.methods.is_empty() {
        return Err(Failure::Usage("empty method list".to_owned()));
    }
    if !(1..=qqr::albrekht::MAX_FEEDBACK_DEGREE).contains(&a.degree) {
        return Err(Failure::Usage(format!(
            "--degree must lie in 1..={}, got {}",
            qqr::albrekht::MAX_FEEDBACK_DEGREE,
            a.degree
        )));
    }
    let m = a.m.unwrap_or(match a.problem {
        Problem::Random => 1,
        Problem::Burgers => 2,
    });

    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &n in &sizes {
        let generated: Result<SystemFile, Failure> = match a.problem {
            Problem::Random => random_file(n, m, a.seed),
            Problem::Burgers => burgers_file(n, m, a.eps),
        };
        let mut solved: Vec<Option<CoefficientFile>> = Vec::new();
        let first = rows.len();
        for &method in &a.methods {
            let solver = solver_method(method, a.cap_bytes);
            let mut record = RunRecord::new("bench")
                .param("problem", format!("{:?}", a.problem).to_lowercase())
                .param("n", n)
                .param("m", m)
                .param("degree", a.degree)
                .param("method", solver.name())
                .param("cap_bytes", a.cap_bytes);
            record = match a.problem {
                Problem::Random => record.param("seed", a.seed),
                Problem::Burgers => record.param("eps", a.eps),
            };
            let mut row = Row {
                n,
                method: method_name(method),
                status: String::new(),
                riccati_s: None,
                schur_s: None,
                rhs_s: None,
                solve_s: None,
                feedback_s: None,
                total_s: None,
                value_rel_diff: None,
                feedback_rel_diff: None,
                record: records.len(),
            };
            let outcome = match &generated {
                Err(f) => Err(f.to_string()),
                Ok(file) => match solve_qqr(&file.system, a.degree, solver) {
                    Ok(sol) => {
                        let t = &sol.timings;
                        row.riccati_s = Some(t.riccati);
                        row.schur_s = Some(t.schur);
                        row.rhs_s = Some(t.rhs.iter().sum());
                        row.solve_s = Some(t.solve.iter().sum());
                        row.feedback_s = Some(t.feedback.iter().sum());
                        row.total_s = Some(t.total());
                        record.timings = Some(t.into());
                        record.reports = sol.reports.clone();
                        CoefficientFile::from_solution(&file.name, solver.name(), &sol)
                            .map_err(|e| e.to_string())
                    }
                    Err(QqrError::SizeLimit { .. }) => Err("not computed: size".to_owned()),
                    Err(e) => Err(format!("failed in {}: {e}", stage_of(&e))),
                },
            };
            row.status = match &outcome {
                Ok(_) => "ok".to_owned(),
                Err(s) if s.starts_with("not computed") || s.starts_with("failed") => s.clone(),
                Err(s) => format!("failed: {s}"),
            };
            record.status = row.status.clone();
            println!(
                "n={n:<4} {:<9} {}{}",
                row.method,
                row.status,
                row.total_s
                    .map(|t| format!(" ({t:.3} s)"))
                    .unwrap_or_default()
            );
            solved.push(outcome.ok());
            records.push(record);
            rows.push(row);
        }
        // Every solved method is compared with the first solved one of a different path.
        for i in 0..solved.len() {
            let other =
                (0..solved.len()).find(|&j| a.methods[j] != a.methods[i] && solved[j].is_some());
            if let (Some(mine), Some(j)) = (&solved[i], other) {
                let theirs = solved[j].as_ref().expect("filtered on is_some");
                if let Ok(d) = coefficient_disparity(theirs, mine) {
                    rows[first + i].value_rel_diff = Some(d.value);
                    rows[first + i].feedback_rel_diff = Some(d.feedback);
                }
            }
        }
    }

    let mut w = csv::Writer::from_path(&a.out).map_err(|e| Failure::Core {
        stage: "writing table",
        error: e.into(),
    })?;
    for row in &rows {
        w.serialize(row).map_err(|e| Failure::Core {
            stage: "writing table",
            error: e.into(),
        })?;
    }
    w.flush()?;
    let run_path = sidecar(&a.out, "run.json");
    write_json(&run_path, &records)?;
    println!(
        "{} rows -> {}, {}",
        rows.len(),
        a.out.display(),
        run_path.display()
    );
    Ok(())
}
