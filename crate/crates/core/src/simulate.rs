//! Closed-loop simulation of `ẋ = Ax + B𝒦(x) + N(x⊗x)` with the running
//! cost `x′Q₂x + u′R₂u` carried as an extra state, so that the cost
//! quadrature is the same RK4 rule as the state update.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::albrekht::{PolyFeedbackLaw, PolyValueFunction, QuadraticSystem};
use crate::error::{QqrError, Result};
use crate::kron::{norm2, Matrix};

/// Integration stops once `‖x‖ > DIVERGENCE_FACTOR·‖x₀‖`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
/// A run is horizon-limited when the quadratic tail exceeds this share of the cost.
pub const TAIL_FRACTION: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    /// Accumulated `∫ x′Q₂x + u′R₂u` up to each time.
    pub cost_to_t: Vec<f64>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states
            .last()
            .expect("a trajectory holds at least the initial state")
    }

    pub fn final_cost(&self) -> f64 {
        *self
            .cost_to_t
            .last()
            .expect("a trajectory holds at least the initial state")
    }

    /// Writes `t,x1..xn,u1..um,cost`, one row per time, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.states[0].len();
        let m = self.controls[0].len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_owned()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.push("cost".to_owned());
        w.write_record(&header)?;
        for k in 0..self.times.len() {
            let row = std::iter::once(self.times[k])
                .chain(self.states[k].iter().copied())
                .chain(self.controls[k].iter().copied())
                .chain(std::iter::once(self.cost_to_t[k]))
                .map(|x| format!("{x:.16e}"));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

struct ClosedLoop<'a> {
    sys: &'a QuadraticSystem,
    law: &'a PolyFeedbackLaw,
}

impl ClosedLoop<'_> {
    /// `(ẋ, running cost, u)`.
    fn eval(&self, x: &[f64]) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let u = self.law.eval(x)?;
        let f = self.sys.drift(x, &u);
        let xv = nalgebra::DVectorView::from_slice(x, x.len());
        let uv = nalgebra::DVectorView::from_slice(&u, u.len());
        let running = xv.dot(&(&self.sys.q2 * xv)) + uv.dot(&(&self.sys.r2 * uv));
        Ok((f, running, u))
    }
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final > 0.0 && dt > 0.0 && t_final.is_finite() && dt.is_finite()) {
        return Err(QqrError::contract(
            "integrate_closed_loop",
            "T and dt must be positive and finite",
        ));
    }
    let steps = (t_final / dt).round();
    if steps < 1.0 || (steps * dt - t_final).abs() > 1e-9 * t_final {
        return Err(QqrError::contract(
            "integrate_closed_loop",
            format!("T = {t_final} is not an integral multiple of dt = {dt}"),
        ));
    }
    Ok(steps as usize)
}

/// Fixed-step RK4 on the closed loop `u = 𝒦(x)`.
pub fn integrate_closed_loop(
    sys: &QuadraticSystem,
    law: &PolyFeedbackLaw,
    x0: &[f64],
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    let steps = step_count(t_final, dt)?;
    let n = sys.state_dim();
    if x0.len() != n || law.base_dim() != n || law.input_dim() != sys.input_dim() {
        return Err(QqrError::contract(
            "integrate_closed_loop",
            format!(
                "x0 has length {}, law maps {} states to {} inputs, system has {n} states and {} inputs",
                x0.len(),
                law.base_dim(),
                law.input_dim(),
                sys.input_dim()
            ),
        ));
    }
    let field = ClosedLoop { sys, law };
    let limit = DIVERGENCE_FACTOR * norm2(x0);

    let (_, _, u0) = field.eval(x0)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        controls: vec![u0],
        cost_to_t: vec![0.0],
        diverged: false,
    };
    let mut x = x0.to_vec();
    let mut cost = 0.0;
    for k in 1..=steps {
        let (k1, c1, _) = field.eval(&x)?;
        let (k2, c2, _) = field.eval(&axpy(&x, 0.5 * dt, &k1))?;
        let (k3, c3, _) = field.eval(&axpy(&x, 0.5 * dt, &k2))?;
        let (k4, c4, _) = field.eval(&axpy(&x, dt, &k3))?;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        cost += dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
        let size = norm2(&x);
        if size.is_nan() || size > limit || !cost.is_finite() {
            traj.diverged = true;
            break;
        }
        let (_, _, u) = field.eval(&x)?;
        traj.times.push(k as f64 * dt);
        traj.states.push(x.clone());
        traj.controls.push(u);
        traj.cost_to_t.push(cost);
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueComparison {
    /// Cost accumulated over `[0, T]`.
    pub j_sim: f64,
    /// Polynomial value function at `x₀`.
    pub v_poly: f64,
    pub gap: f64,
    /// `x(T)′V₂x(T)`.
    pub tail_estimate: f64,
    /// Set when the tail exceeds [`TAIL_FRACTION`] of `j_sim`.
    pub horizon_limited: bool,
    /// Cleared when the trajectory diverged.
    pub valid: bool,
}

/// Simulates the law from `x0` and compares the realized cost with the value
/// function.
pub fn compare_value(
    sys: &QuadraticSystem,
    value: &PolyValueFunction,
    law: &PolyFeedbackLaw,
    x0: &[f64],
    t_final: f64,
    dt: f64,
) -> Result<ValueComparison> {
    let traj = integrate_closed_loop(sys, law, x0, t_final, dt)?;
    compare_trajectory(&traj, value, x0)
}

/// Compares an already integrated trajectory with the value function.
pub fn compare_trajectory(
    traj: &Trajectory,
    value: &PolyValueFunction,
    x0: &[f64],
) -> Result<ValueComparison> {
    let v_poly = value.eval(x0)?;
    let j_sim = traj.final_cost();
    if traj.diverged {
        return Ok(ValueComparison {
            j_sim,
            v_poly,
            gap: f64::NAN,
            tail_estimate: f64::NAN,
            horizon_limited: false,
            valid: false,
        });
    }
    let n = value.base_dim();
    let v2 = value.coeff(2).expect("a value function always holds v₂");
    let v2 = Matrix::from_column_slice(n, n, v2.values());
    let xt = nalgebra::DVectorView::from_slice(traj.final_state(), n);
    let tail_estimate = xt.dot(&(&v2 * xt));
    Ok(ValueComparison {
        j_sim,
        v_poly,
        gap: (j_sim - v_poly).abs(),
        tail_estimate,
        horizon_limited: tail_estimate > TAIL_FRACTION * j_sim,
        valid: true,
    })
}

/// `scale · d/‖d‖` for `d` uniform in `[−1, 1)ⁿ`, drawn with ChaCha20.
pub fn random_direction_state(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let len = norm2(&d);
    d.iter().map(|x| scale * x / len).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::albrekht::{solve_qqr, SolverMethod};
    use crate::problems::{burgers_system, mass_matrix, BurgersSpec};
    use proptest::prelude::*;

    fn scalar(a: f64, nq: f64) -> QuadraticSystem {
        let m = |x| Matrix::from_element(1, 1, x);
        QuadraticSystem::new(m(a), m(1.0), m(nq), m(1.0), m(1.0)).unwrap()
    }

    #[test]
    fn origin_stays_put() {
        let sys = scalar(1.0, 1.0);
        let s = solve_qqr(&sys, 3, SolverMethod::Recursive).unwrap();
        let traj = integrate_closed_loop(&sys, &s.feedback, &[0.0], 1.0, 0.1).unwrap();
        assert!(traj.states.iter().all(|x| x[0] == 0.0));
        assert_eq!(traj.final_cost(), 0.0);
        let c = compare_value(&sys, &s.value, &s.feedback, &[0.0], 1.0, 0.1).unwrap();
        assert_eq!(
            (c.j_sim, c.v_poly, c.gap, c.tail_estimate),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn scalar_lqr_cost() {
        let sys = scalar(-1.0, 0.0);
        let s = solve_qqr(&sys, 1, SolverMethod::Recursive).unwrap();
        let c = compare_value(&sys, &s.value, &s.feedback, &[1.0], 20.0, 1e-3).unwrap();
        assert!((c.j_sim - (2f64.sqrt() - 1.0)).abs() <= 1e-6);
        assert!(c.gap <= 1e-6 && c.valid && !c.horizon_limited);
    }

    #[test]
    fn scalar_qqr_converges() {
        let sys = scalar(1.0, 1.0);
        let s = solve_qqr(&sys, 3, SolverMethod::Recursive).unwrap();
        let traj = integrate_closed_loop(&sys, &s.feedback, &[0.1], 20.0, 1e-2).unwrap();
        assert!(!traj.diverged);
        assert!(traj.final_state()[0].abs() < 1e-10);
        let c = compare_trajectory(&traj, &s.value, &[0.1]).unwrap();
        assert!(c.gap < 5e-5 * c.j_sim, "{c:?}");
    }

    #[test]
    fn higher_degree_laws_track_the_value_better() {
        let sys = scalar(1.0, 1.0);
        let s = solve_qqr(&sys, 3, SolverMethod::Recursive).unwrap();
        let gaps: Vec<f64> = (1..=3)
            .map(|d| {
                let c = compare_value(
                    &sys,
                    &s.value.truncated(d + 1),
                    &s.feedback.truncated(d),
                    &[0.05],
                    20.0,
                    1e-3,
                )
                .unwrap();
                c.gap
            })
            .collect();
        assert!(gaps[2] <= gaps[1] && gaps[1] <= gaps[0], "{gaps:?}");
    }

    #[test]
    fn rk4_refinement() {
        let sys = scalar(1.0, 1.0);
        let s = solve_qqr(&sys, 2, SolverMethod::Recursive).unwrap();
        let j = |dt: f64| {
            integrate_closed_loop(&sys, &s.feedback, &[0.5], 10.0, dt)
                .unwrap()
                .final_cost()
        };
        let (coarse, mid, fine) = (j(0.1), j(0.05), j(0.025));
        let ratio = (coarse - mid).abs() / (mid - fine).abs();
        assert!((ratio.log2() - 4.0).abs() < 0.3, "ratio {ratio}");
        assert!((coarse - mid).abs() <= 10.0 * 0.1f64.powi(4));
    }

    #[test]
    fn divergence_is_flagged() {
        // Open loop of an unstable plant through a zero law.
        let sys = scalar(1.0, 1.0);
        let law = PolyFeedbackLaw::new(vec![Matrix::zeros(1, 1)]).unwrap();
        let traj = integrate_closed_loop(&sys, &law, &[1.0], 10.0, 1e-3).unwrap();
        assert!(traj.diverged);
        assert!(traj.states.iter().all(|x| x[0].is_finite()));
        let s = solve_qqr(&sys, 1, SolverMethod::Recursive).unwrap();
        let c = compare_trajectory(&traj, &s.value, &[1.0]).unwrap();
        assert!(!c.valid && c.gap.is_nan());
    }

    #[test]
    fn bad_grids_are_rejected() {
        let sys = scalar(-1.0, 0.0);
        let law = PolyFeedbackLaw::new(vec![Matrix::zeros(1, 1)]).unwrap();
        for (t, dt) in [(1.0, 0.3), (0.0, 0.1), (1.0, -0.1), (1.0, f64::NAN)] {
            assert!(matches!(
                integrate_closed_loop(&sys, &law, &[1.0], t, dt),
                Err(QqrError::Contract { .. })
            ));
        }
        assert!(integrate_closed_loop(&sys, &law, &[1.0, 2.0], 1.0, 0.1).is_err());
    }

    #[test]
    fn burgers_energy_decays_under_linear_law() {
        let n = 12;
        let sys = burgers_system(&BurgersSpec::new(n)).unwrap();
        let s = solve_qqr(&sys, 1, SolverMethod::Recursive).unwrap();
        let x0: Vec<f64> = (0..n)
            .map(|i| 0.1 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin())
            .collect();
        let traj = integrate_closed_loop(&sys, &s.feedback, &x0, 5.0, 1e-2).unwrap();
        let mass = mass_matrix(n);
        let energy: Vec<f64> = traj
            .states
            .iter()
            .map(|x| {
                let v = nalgebra::DVectorView::from_slice(x, n);
                v.dot(&(&mass * v))
            })
            .collect();
        assert!(energy.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn csv_layout() {
        let sys = burgers_system(&BurgersSpec {
            n: 3,
            m: 2,
            eps: 0.01,
        })
        .unwrap();
        let s = solve_qqr(&sys, 1, SolverMethod::Recursive).unwrap();
        let traj = integrate_closed_loop(&sys, &s.feedback, &[0.1, 0.0, -0.1], 0.2, 0.1).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2,x3,u1,u2,cost");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000001e-1"));
    }

    #[test]
    fn random_directions() {
        let x = random_direction_state(5, 0.3, 7);
        assert!((norm2(&x) - 0.3).abs() < 1e-15);
        assert_eq!(x, random_direction_state(5, 0.3, 7));
        assert_ne!(x, random_direction_state(5, 0.3, 8));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn cost_is_nondecreasing(x0 in -0.5f64..0.5, degree in 1usize..=3) {
            let sys = scalar(1.0, 1.0);
            let s = solve_qqr(&sys, degree, SolverMethod::Recursive).unwrap();
            let traj = integrate_closed_loop(&sys, &s.feedback, &[x0], 5.0, 1e-2).unwrap();
            prop_assert!(traj.cost_to_t.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
