//! Al'Brekht's degree-by-degree recursion for the quadratic-quadratic
//! regulator
//!
//! ```text
//! ẋ = Ax + Bu + N(x⊗x),   J = ∫ x′Q₂x + u′R₂u dt.
//! ```
//!
//! The value function `v(x) = Σ_{d≥2} v_d′ x^{⊗d}` and the feedback law
//! `u = Σ_{d≥1} K_d x^{⊗d}` are matched degree by degree in the HJB
//! equations. After the Riccati layer, each new value coefficient solves
//! `ℒ_p(A_c′) v_p = c_p` and the next gain follows from the stationarity
//! condition `B′∇v + 2R₂u = 0`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{QqrError, Result};
use crate::kron::{
    check_dense_size, checked_pow, eval_feedback, eval_value, kron_sum_apply, lift, norm2,
    unfold_sum, CoeffVector, Matrix, DEFAULT_MEMORY_CAP,
};
use crate::kronsum::{global_cache, solve_full, KronSumSystem, SolveReport, RESIDUAL_WARN};
use crate::riccati::{solve_are, ControlWeight, RiccatiSolution};

/// Highest supported feedback degree.
pub const MAX_FEEDBACK_DEGREE: usize = 4;

/// `ẋ = Ax + Bu + N(x⊗x)` with cost weights `Q₂`, `R₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSystem {
    pub a: Matrix,
    pub b: Matrix,
    /// `n × n²`, column `j·n + k` multiplies `x_j x_k`.
    pub n: Matrix,
    pub q2: Matrix,
    pub r2: Matrix,
}

impl QuadraticSystem {
    pub fn new(a: Matrix, b: Matrix, n: Matrix, q2: Matrix, r2: Matrix) -> Result<Self> {
        let sys = QuadraticSystem { a, b, n, q2, r2 };
        sys.validate()?;
        Ok(sys)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        let shapes = [
            ("A", self.a.shape(), (n, n)),
            ("B", self.b.shape(), (n, m)),
            ("N", self.n.shape(), (n, n * n)),
            ("Q2", self.q2.shape(), (n, n)),
            ("R2", self.r2.shape(), (m, m)),
        ];
        if n == 0 || m == 0 {
            return Err(QqrError::contract(
                "QuadraticSystem",
                "state and input dimensions must be positive",
            ));
        }
        for (name, got, want) in shapes {
            if got != want {
                return Err(QqrError::contract(
                    "QuadraticSystem",
                    format!(
                        "{name} has shape {}×{}, expected {}×{}",
                        got.0, got.1, want.0, want.1
                    ),
                ));
            }
        }
        for (name, m) in [
            ("A", &self.a),
            ("B", &self.b),
            ("N", &self.n),
            ("Q2", &self.q2),
            ("R2", &self.r2),
        ] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(QqrError::contract(
                    "QuadraticSystem",
                    format!("{name} has non-finite entries"),
                ));
            }
        }
        Ok(())
    }

    /// The same system with the quadratic drift removed.
    pub fn linearized(&self) -> Self {
        let mut sys = self.clone();
        sys.n.fill(0.0);
        sys
    }

    /// `Ax + Bu + N(x⊗x)`.
    pub fn drift(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let xv = nalgebra::DVectorView::from_slice(x, x.len());
        let uv = nalgebra::DVectorView::from_slice(u, u.len());
        let xx = lift(x, 2);
        let xx = nalgebra::DVectorView::from_slice(&xx, xx.len());
        let f = &self.a * xv + &self.b * uv + &self.n * xx;
        f.as_slice().to_vec()
    }
}

/// `v(x) = Σ_{d=2}^{deg} v_d′ x^{⊗d}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyValueFunction {
    coeffs: Vec<CoeffVector>,
}

impl PolyValueFunction {
    /// `coeffs[i]` must have order `i + 2`.
    pub fn new(coeffs: Vec<CoeffVector>) -> Result<Self> {
        let n = coeffs.first().map(CoeffVector::base_dim);
        for (i, c) in coeffs.iter().enumerate() {
            if c.order() != i + 2 || Some(c.base_dim()) != n {
                return Err(QqrError::contract(
                    "PolyValueFunction::new",
                    format!(
                        "coefficient {i} has order {} over dimension {}",
                        c.order(),
                        c.base_dim()
                    ),
                ));
            }
        }
        if coeffs.is_empty() {
            return Err(QqrError::contract(
                "PolyValueFunction::new",
                "at least v₂ is required",
            ));
        }
        Ok(PolyValueFunction { coeffs })
    }

    pub fn base_dim(&self) -> usize {
        self.coeffs[0].base_dim()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() + 1
    }

    pub fn coeffs(&self) -> &[CoeffVector] {
        &self.coeffs
    }

    /// The order-`d` coefficient.
    pub fn coeff(&self, d: usize) -> Option<&CoeffVector> {
        d.checked_sub(2).and_then(|i| self.coeffs.get(i))
    }

    /// The value function truncated at degree `deg`.
    pub fn truncated(&self, deg: usize) -> Self {
        PolyValueFunction {
            coeffs: self.coeffs[..deg.clamp(2, self.degree()) - 1].to_vec(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        eval_value(&self.coeffs, x)
    }

    /// `∇v(x)`, one term `unfold_sum(v_d)·x^{⊗(d−1)}` per degree.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.base_dim();
        if x.len() != n {
            return Err(QqrError::contract(
                "PolyValueFunction::gradient",
                "state has the wrong length",
            ));
        }
        let mut g = nalgebra::DVector::zeros(n);
        for c in &self.coeffs {
            let z = lift(x, c.order() - 1);
            g += unfold_sum(c)? * nalgebra::DVector::from_vec(z);
        }
        Ok(g.as_slice().to_vec())
    }
}

/// `u = Σ_{d=1}^{deg} K_d x^{⊗d}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyFeedbackLaw {
    gains: Vec<Matrix>,
}

impl PolyFeedbackLaw {
    /// `gains[i]` must be `m × n^{i+1}`.
    pub fn new(gains: Vec<Matrix>) -> Result<Self> {
        let Some(k1) = gains.first() else {
            return Err(QqrError::contract(
                "PolyFeedbackLaw::new",
                "at least K₁ is required",
            ));
        };
        let (m, n) = k1.shape();
        for (i, k) in gains.iter().enumerate() {
            let cols = checked_pow(n, i + 1)?;
            if k.shape() != (m, cols) {
                return Err(QqrError::contract(
                    "PolyFeedbackLaw::new",
                    format!(
                        "K_{} has shape {}×{}, expected {m}×{cols}",
                        i + 1,
                        k.nrows(),
                        k.ncols()
                    ),
                ));
            }
            if k.iter().any(|x| !x.is_finite()) {
                return Err(QqrError::contract(
                    "PolyFeedbackLaw::new",
                    format!("K_{} has non-finite entries", i + 1),
                ));
            }
        }
        Ok(PolyFeedbackLaw { gains })
    }

    pub fn base_dim(&self) -> usize {
        self.gains[0].ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.gains[0].nrows()
    }

    pub fn degree(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self) -> &[Matrix] {
        &self.gains
    }

    pub fn gain(&self, d: usize) -> Option<&Matrix> {
        d.checked_sub(1).and_then(|i| self.gains.get(i))
    }

    pub fn truncated(&self, deg: usize) -> Self {
        PolyFeedbackLaw {
            gains: self.gains[..deg.clamp(1, self.degree())].to_vec(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        eval_feedback(&self.gains, x)
    }
}

/// Linear solver used for every `ℒ_p(A_c′) v_p = c_p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    /// Schur-based recursive solve, never materializing `ℒ_p`.
    Recursive,
    /// Dense LU of the assembled `ℒ_p`, refused above `cap` bytes.
    Full { cap: u64 },
}

impl SolverMethod {
    pub fn full() -> Self {
        SolverMethod::Full {
            cap: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverMethod::Recursive => "recursive",
            SolverMethod::Full { .. } => "full",
        }
    }
}

/// Per-degree diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    /// Order `p` of the value coefficient solved for.
    pub order: usize,
    /// `‖ℒ_p(A_c′)v_p − c_p‖ / ‖c_p‖`, recomputed matrix-free for both methods.
    pub residual_norm: f64,
    pub rhs_norm: f64,
    /// Diagnostics of the recursive solver; absent for the dense path.
    pub solve: Option<SolveReport>,
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub riccati: f64,
    pub schur: f64,
    /// Indexed by value order `p = 3, 4, …`.
    pub rhs: Vec<f64>,
    pub solve: Vec<f64>,
    pub feedback: Vec<f64>,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.riccati
            + self.schur
            + self.rhs.iter().sum::<f64>()
            + self.solve.iter().sum::<f64>()
            + self.feedback.iter().sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct QqrSolution {
    pub value: PolyValueFunction,
    pub feedback: PolyFeedbackLaw,
    pub riccati: RiccatiSolution,
    pub reports: Vec<DegreeReport>,
    pub timings: StageTimings,
}

/// Computes `v₂ … v_{deg+1}` and `K₁ … K_deg`.
pub fn solve_qqr(
    sys: &QuadraticSystem,
    degree: usize,
    method: SolverMethod,
) -> Result<QqrSolution> {
    sys.validate()?;
    if !(1..=MAX_FEEDBACK_DEGREE).contains(&degree) {
        return Err(QqrError::contract(
            "solve_qqr",
            format!("feedback degree must lie in 1..={MAX_FEEDBACK_DEGREE}, got {degree}"),
        ));
    }
    let n = sys.state_dim();
    if let SolverMethod::Full { cap } = method {
        if degree >= 2 {
            let len = checked_pow(n, degree + 1)?;
            check_dense_size(len, len, cap)?;
        }
    }
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let riccati = solve_are(&sys.a, &sys.b, &sys.q2, &sys.r2)?;
    timings.riccati = clock.elapsed().as_secs_f64();

    let weight = ControlWeight::new(&sys.r2)?;
    let factor = riccati.ac.transpose();
    let system = if degree >= 2 && method == SolverMethod::Recursive {
        let clock = Instant::now();
        let schur = global_cache().get_or_compute(&factor)?;
        timings.schur = clock.elapsed().as_secs_f64();
        Some(schur)
    } else {
        None
    };

    let mut values = vec![CoeffVector::new(n, 2, riccati.v2.as_slice().to_vec())?];
    let mut gains = vec![riccati.k1.clone()];
    let mut reports = Vec::new();

    for p in 3..=degree + 1 {
        let clock = Instant::now();
        let c = rhs_for_degree(p, sys, &gains, &values)?;
        timings.rhs.push(clock.elapsed().as_secs_f64());

        let clock = Instant::now();
        let (v, solve) = match (method, &system) {
            (SolverMethod::Recursive, Some(schur)) => {
                let op = KronSumSystem::with_schur(factor.clone(), schur.clone(), p, 0.0)?;
                let (v, report) = op.solve(&c)?;
                (v, Some(report))
            }
            (SolverMethod::Full { cap }, _) => (solve_full(&factor, p, &c, 0.0, cap)?, None),
            (SolverMethod::Recursive, None) => {
                unreachable!("Schur form is computed whenever degree ≥ 2")
            }
        };
        timings.solve.push(clock.elapsed().as_secs_f64());
        let residual_norm = match &solve {
            Some(r) => r.residual_norm,
            None => relative_residual(&factor, p, &v, &c)?,
        };
        reports.push(DegreeReport {
            order: p,
            residual_norm,
            rhs_norm: norm2(&c),
            solve,
        });
        drop(c);
        let v = CoeffVector::new(n, p, v).map_err(|_| QqrError::Accuracy {
            residual: residual_norm,
            tolerance: RESIDUAL_WARN,
        })?;

        let clock = Instant::now();
        gains.push(gain_from_value(&v, &sys.b, &weight)?);
        timings.feedback.push(clock.elapsed().as_secs_f64());
        values.push(v);
    }

    Ok(QqrSolution {
        value: PolyValueFunction::new(values)?,
        feedback: PolyFeedbackLaw::new(gains)?,
        riccati,
        reports,
        timings,
    })
}

fn relative_residual(factor: &Matrix, p: usize, v: &[f64], c: &[f64]) -> Result<f64> {
    let mut r = kron_sum_apply(factor, p, v)?;
    r.iter_mut().zip(c).for_each(|(ri, ci)| *ri -= ci);
    let cn = norm2(c);
    Ok(if cn > 0.0 { norm2(&r) / cn } else { norm2(&r) })
}

/// Right-hand side `c_p` of `ℒ_p(A_c′) v_p = c_p` for `p ∈ 3..=5`.
///
/// `gains[i]` is `K_{i+1}` and must be known through `K_{p−2}`; `values[i]`
/// is `v_{i+2}` and must be known through `v_{p−1}`.
pub fn rhs_for_degree(
    p: usize,
    sys: &QuadraticSystem,
    gains: &[Matrix],
    values: &[CoeffVector],
) -> Result<Vec<f64>> {
    if !(3..=MAX_FEEDBACK_DEGREE + 1).contains(&p) {
        return Err(QqrError::contract(
            "rhs_for_degree",
            format!("order {p} outside 3..=5"),
        ));
    }
    if values.len() < p - 2 || gains.len() < p - 2 {
        return Err(QqrError::contract(
            "rhs_for_degree",
            format!("order {p} needs v₂…v_{} and K₁…K_{}", p - 1, p - 2),
        ));
    }
    let n = sys.state_dim();
    let m = sys.input_dim();
    for (i, v) in values[..p - 2].iter().enumerate() {
        if v.base_dim() != n || v.order() != i + 2 {
            return Err(QqrError::contract(
                "rhs_for_degree",
                format!("v_{} has the wrong order or dimension", i + 2),
            ));
        }
    }
    for (i, k) in gains[..p - 2].iter().enumerate() {
        if k.shape() != (m, checked_pow(n, i + 1)?) {
            return Err(QqrError::contract(
                "rhs_for_degree",
                format!("K_{} has the wrong shape", i + 1),
            ));
        }
    }
    let value = |q: usize| &values[q - 2];
    let gain = |i: usize| &gains[i - 1];

    let mut quad = sys.n.clone();
    if p >= 4 {
        quad += &sys.b * gain(2);
    }
    let mut c = kron_sum_apply(&quad.transpose(), p - 1, value(p - 1).values())?;

    for i in 3..=p - 2 {
        let bk = (&sys.b * gain(i)).transpose();
        let term = kron_sum_apply(&bk, p + 1 - i, value(p + 1 - i).values())?;
        c.iter_mut().zip(&term).for_each(|(ci, t)| *ci += t);
    }

    for i in 2..=p - 2 {
        let j = p - i;
        let cross = gain(i).transpose() * (&sys.r2 * gain(j));
        c.iter_mut()
            .zip(cross.as_slice())
            .for_each(|(ci, t)| *ci += t);
    }

    c.iter_mut().for_each(|ci| *ci = -*ci);
    Ok(c)
}

/// `K_d = −½ R₂⁻¹ B′ unfold_sum(v_{d+1})`.
pub fn feedback_from_value(v: &CoeffVector, b: &Matrix, r2: &Matrix) -> Result<Matrix> {
    gain_from_value(v, b, &ControlWeight::new(r2)?)
}

fn gain_from_value(v: &CoeffVector, b: &Matrix, weight: &ControlWeight) -> Result<Matrix> {
    if v.order() < 2 || v.base_dim() != b.nrows() {
        return Err(QqrError::contract(
            "feedback_from_value",
            format!(
                "value coefficient of order {} over dimension {} does not fit B",
                v.order(),
                v.base_dim()
            ),
        ));
    }
    let grad = unfold_sum(v)?;
    let bt_grad = b.transpose() * grad;
    Ok(weight.solve(&bt_grad) * -0.5)
}

/// HJB residuals at `x`:
/// `r1 = ∇v·(Ax + Bu + N(x⊗x)) + x′Q₂x + u′R₂u` and `r2 = B′∇v + 2R₂u`
/// with `u` the feedback law.
pub fn hjb_residual(
    sys: &QuadraticSystem,
    value: &PolyValueFunction,
    feedback: &PolyFeedbackLaw,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let grad = value.gradient(x)?;
    let u = feedback.eval(x)?;
    let f = sys.drift(x, &u);
    let xv = nalgebra::DVector::from_column_slice(x);
    let uv = nalgebra::DVector::from_column_slice(&u);
    let gv = nalgebra::DVector::from_column_slice(&grad);
    let r1 = gv.dot(&nalgebra::DVector::from_vec(f))
        + xv.dot(&(&sys.q2 * &xv))
        + uv.dot(&(&sys.r2 * &uv));
    let r2 = sys.b.transpose() * gv + &sys.r2 * uv * 2.0;
    Ok((r1, r2.as_slice().to_vec()))
}
