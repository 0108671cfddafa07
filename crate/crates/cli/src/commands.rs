use std::path::PathBuf;

use qqr::albrekht::{solve_qqr, SolverMethod};
use qqr::problems::{
    burgers_system, load_coefficients, load_system, random_system, save_coefficients, save_system,
    BurgersSpec, CoefficientFile, RandomSpec, SystemFile, SystemMetadata, RANDOM_GENERATOR,
};
use qqr::simulate::{
    compare_trajectory, integrate_closed_loop, random_direction_state, ValueComparison,
};
use qqr::QqrError;
use serde::Serialize;

use crate::record::{sidecar, write_json, RunRecord};
use crate::{BurgersArgs, Failure, Method, RandomArgs, SimulateArgs, SolveArgs};

pub fn solver_method(method: Method, cap: u64) -> SolverMethod {
    match method {
        Method::Recursive => SolverMethod::Recursive,
        Method::Full => SolverMethod::Full { cap },
    }
}

/// Names the pipeline stage an error of `solve_qqr` comes from.
pub fn stage_of(error: &QqrError) -> &'static str {
    match error {
        QqrError::Unstabilizable(_) | QqrError::Accuracy { .. } => "Riccati stage",
        QqrError::SizeLimit { .. } => "full Kronecker assembly",
        QqrError::SingularResonance { .. } | QqrError::NoConvergence { .. } => {
            "Kronecker-sum solve"
        }
        QqrError::Contract { .. } => "arguments",
        _ => "solve",
    }
}

pub fn random_file(n: usize, m: usize, seed: u64) -> Result<SystemFile, Failure> {
    let system =
        random_system(&RandomSpec { n, m, seed }).map_err(Failure::core("generate random"))?;
    Ok(SystemFile {
        name: format!("random-n{n}-m{m}-seed{seed}"),
        system,
        metadata: SystemMetadata {
            generator: Some(RANDOM_GENERATOR.to_owned()),
            seed: Some(seed),
            eps: None,
        },
    })
}

pub fn burgers_file(n: usize, m: usize, eps: f64) -> Result<SystemFile, Failure> {
    let system =
        burgers_system(&BurgersSpec { n, m, eps }).map_err(Failure::core("generate burgers"))?;
    Ok(SystemFile {
        name: format!("burgers-n{n}-m{m}"),
        system,
        metadata: SystemMetadata {
            generator: Some("burgers".to_owned()),
            seed: None,
            eps: Some(eps),
        },
    })
}

pub fn generate_random(a: &RandomArgs) -> Result<(), Failure> {
    let file = random_file(a.n, a.m, a.seed)?;
    save_system(&a.out, &file).map_err(Failure::core("writing system"))?;
    println!(
        "{}: n={} m={} generator={RANDOM_GENERATOR} seed={} -> {}",
        file.name,
        a.n,
        a.m,
        a.seed,
        a.out.display()
    );
    Ok(())
}

pub fn generate_burgers(a: &BurgersArgs) -> Result<(), Failure> {
    let file = burgers_file(a.n, a.m, a.eps)?;
    save_system(&a.out, &file).map_err(Failure::core("writing system"))?;
    println!(
        "{}: n={} m={} generator=burgers eps={} -> {}",
        file.name,
        a.n,
        a.m,
        a.eps,
        a.out.display()
    );
    Ok(())
}

pub fn solve(a: &SolveArgs) -> Result<(), Failure> {
    let file = load_system(&a.system).map_err(Failure::core("reading system"))?;
    let method = solver_method(a.method, a.cap_bytes);
    let run_path = sidecar(&a.out, "run.json");
    let mut record = RunRecord::new("solve")
        .param("system", &a.system)
        .param("degree", a.degree)
        .param("method", method.name())
        .param("cap_bytes", a.cap_bytes);
    match solve_qqr(&file.system, a.degree, method) {
        Ok(solution) => {
            let coeffs = CoefficientFile::from_solution(&file.name, method.name(), &solution)
                .map_err(Failure::core("symmetrization"))?;
            save_coefficients(&a.out, &coeffs).map_err(Failure::core("writing coefficients"))?;
            record.timings = Some((&solution.timings).into());
            record.reports = solution.reports.clone();
            record.outputs = vec![a.out.clone(), run_path.clone()];
            write_json(&run_path, &record)?;
            println!(
                "{} degree {} ({}): Riccati residual {:.2e}, margin {:.3e}, {:.3} s -> {}",
                file.name,
                a.degree,
                method.name(),
                solution.riccati.residual,
                solution.riccati.margin,
                solution.timings.total(),
                a.out.display()
            );
            Ok(())
        }
        Err(error) => {
            record.status = match error {
                QqrError::SizeLimit { .. } => "not computed: size".to_owned(),
                ref e => format!("failed: {e}"),
            };
            record.outputs = vec![run_path.clone()];
            write_json(&run_path, &record)?;
            Err(Failure::Core {
                stage: stage_of(&error),
                error,
            })
        }
    }
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    system: &'a str,
    coefficients: &'a PathBuf,
    degree: usize,
    x0: &'a [f64],
    #[serde(rename = "T")]
    t_final: f64,
    dt: f64,
    steps: usize,
    diverged: bool,
    comparison: &'a ValueComparison,
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let file = load_system(&a.system).map_err(Failure::core("reading system"))?;
    let coeffs =
        load_coefficients(&a.coefficients).map_err(Failure::core("reading coefficients"))?;
    let (n, m) = (file.system.state_dim(), file.system.input_dim());
    if coeffs.value.base_dim() != n || coeffs.feedback.input_dim() != m {
        return Err(Failure::Usage(format!(
            "coefficients are for n={}, m={} but the system has n={n}, m={m}",
            coeffs.value.base_dim(),
            coeffs.feedback.input_dim()
        )));
    }
    let degree = a.degree.unwrap_or(coeffs.feedback.degree());
    if !(1..=coeffs.feedback.degree()).contains(&degree) {
        return Err(Failure::Usage(format!(
            "--degree must lie in 1..={}, got {degree}",
            coeffs.feedback.degree()
        )));
    }
    let law = coeffs.feedback.truncated(degree);
    let value = coeffs.value.truncated(degree + 1);

    let x0 = match (&a.x0, a.scale) {
        (Some(x0), _) if x0.len() != n => {
            return Err(Failure::Usage(format!(
                "--x0 has {} entries, the system has n={n}",
                x0.len()
            )))
        }
        (Some(x0), _) => x0.clone(),
        (None, Some(scale)) => random_direction_state(n, scale, a.seed),
        (None, None) => {
            return Err(Failure::Usage(
                "give --x0 or --scale with --direction random".to_owned(),
            ))
        }
    };

    let traj = integrate_closed_loop(&file.system, &law, &x0, a.t_final, a.dt)
        .map_err(Failure::core("simulation"))?;
    let comparison =
        compare_trajectory(&traj, &value, &x0).map_err(Failure::core("value comparison"))?;
    traj.save_csv(&a.out)
        .map_err(Failure::core("writing trajectory"))?;
    let cmp_path = a
        .comparison
        .clone()
        .unwrap_or_else(|| sidecar(&a.out, "comparison.json"));
    let summary = SimulationSummary {
        system: &file.name,
        coefficients: &a.coefficients,
        degree,
        x0: &x0,
        t_final: a.t_final,
        dt: a.dt,
        steps: traj.times.len() - 1,
        diverged: traj.diverged,
        comparison: &comparison,
    };
    write_json(&cmp_path, &summary)?;
    println!(
        "{} degree {degree}: J_sim {:.10e}, v {:.10e}, gap {:.3e}{}{} -> {}, {}",
        file.name,
        comparison.j_sim,
        comparison.v_poly,
        comparison.gap,
        if comparison.horizon_limited {
            " (horizon limited)"
        } else {
            ""
        },
        if traj.diverged { " (diverged)" } else { "" },
        a.out.display(),
        cmp_path.display()
    );
    Ok(())
}
