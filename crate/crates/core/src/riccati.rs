//! Degree-2 layer: the stabilizing solution of
//! `AᵀV + VA − VBR⁻¹BᵀV + Q = 0`, the linear gain `K₁ = −R⁻¹BᵀV` and the
//! closed-loop matrix `A_c = A + BK₁`.
//!
//! The solution comes from the Hamiltonian `[[A, −G], [−Q, −Aᵀ]]`,
//! `G = BR⁻¹Bᵀ`: its complex Schur form is reordered so the `n` stable
//! eigenvalues lead, and the leading `n` Schur vectors `[U₁₁; U₂₁]` give
//! `V = U₂₁U₁₁⁻¹`. Newton steps (each a Lyapunov solve in `ℒ₂(A_cᵀ)`) polish
//! the residual until it stops improving.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{QqrError, Result};
use crate::kron::Matrix;
use crate::kronsum::{schur_complex, schur_decompose, solve_kron_sum, C64};

/// Residual above which the ARE solve is rejected.
pub const ARE_ACCURACY_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-12;
const MAX_NEWTON_STEPS: usize = 6;
const NEWTON_TARGET: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiSolution {
    pub v2: Matrix,
    pub k1: Matrix,
    pub ac: Matrix,
    /// `‖AᵀV + VA − VBR⁻¹BᵀV + Q‖_F / ‖Q‖_F`.
    pub residual: f64,
    /// `max Re λ(A_c)`.
    pub margin: f64,
}

/// Symmetric positive-definite control weight, factored once.
#[derive(Clone, Debug)]
pub struct ControlWeight {
    chol: Cholesky<f64, Dyn>,
}

impl ControlWeight {
    pub fn new(r: &Matrix) -> Result<Self> {
        if !r.is_square() {
            return Err(QqrError::contract("ControlWeight", "R₂ must be square"));
        }
        check_symmetric("R₂", r)?;
        let chol = Cholesky::new(r.clone())
            .ok_or_else(|| QqrError::contract("ControlWeight", "R₂ is not positive definite"))?;
        Ok(ControlWeight { chol })
    }

    /// `R⁻¹ M`.
    pub fn solve(&self, m: &Matrix) -> Matrix {
        self.chol.solve(m)
    }

    /// `B R⁻¹ Bᵀ`, formed as `WᵀW` with `W = L⁻¹Bᵀ`.
    pub fn gramian(&self, b: &Matrix) -> Matrix {
        let w = self
            .chol
            .l()
            .solve_lower_triangular(&b.transpose())
            .expect("Cholesky factor has a nonzero diagonal");
        w.transpose() * w
    }
}

fn check_symmetric(name: &str, m: &Matrix) -> Result<()> {
    let asym = (m - m.transpose()).norm();
    if asym > SYMMETRY_TOL * m.norm().max(1.0) {
        return Err(QqrError::contract(
            "solve_are",
            format!("{name} is not symmetric (‖M − Mᵀ‖ = {asym:e})"),
        ));
    }
    Ok(())
}

/// `AᵀV + VA − VGV + Q`.
fn are_residual_matrix(a: &Matrix, g: &Matrix, q: &Matrix, v: &Matrix) -> Matrix {
    a.transpose() * v + v * a - v * g * v + q
}

fn relative(res: &Matrix, q: &Matrix) -> f64 {
    let qn = q.norm();
    if qn > 0.0 {
        res.norm() / qn
    } else {
        res.norm()
    }
}

/// Relative ARE residual of a candidate `V`.
pub fn are_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, v: &Matrix) -> Result<f64> {
    let g = ControlWeight::new(r)?.gramian(b);
    Ok(relative(&are_residual_matrix(a, &g, q, v), q))
}

/// Swaps the adjacent diagonal entries `k`, `k+1` of a complex Schur form,
/// updating the Schur vectors.
fn swap_adjacent(t: &mut DMatrix<C64>, u: &mut DMatrix<C64>, k: usize) {
    let a = t[(k, k)];
    let b = t[(k + 1, k + 1)];
    let x = t[(k, k + 1)];
    // Eigenvector of [[a, x], [0, b]] for b.
    let (p, q) = (x, b - a);
    let nrm = (p.norm_sqr() + q.norm_sqr()).sqrt();
    if nrm == 0.0 {
        return;
    }
    let (g1, g2) = (p / nrm, q / nrm);
    let n = t.nrows();
    for col in k..n {
        let (r1, r2) = (t[(k, col)], t[(k + 1, col)]);
        t[(k, col)] = g1.conj() * r1 + g2.conj() * r2;
        t[(k + 1, col)] = -g2 * r1 + g1 * r2;
    }
    for row in 0..=k + 1 {
        let (c1, c2) = (t[(row, k)], t[(row, k + 1)]);
        t[(row, k)] = c1 * g1 + c2 * g2;
        t[(row, k + 1)] = -c1 * g2.conj() + c2 * g1.conj();
    }
    for row in 0..u.nrows() {
        let (c1, c2) = (u[(row, k)], u[(row, k + 1)]);
        u[(row, k)] = c1 * g1 + c2 * g2;
        u[(row, k + 1)] = -c1 * g2.conj() + c2 * g1.conj();
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
    t[(k, k)] = b;
    t[(k + 1, k + 1)] = a;
}

/// Moves every eigenvalue with negative real part to the leading block.
/// Returns the number moved.
fn order_stable_first(t: &mut DMatrix<C64>, u: &mut DMatrix<C64>) -> usize {
    let mut next = 0;
    for k in 0..t.nrows() {
        if t[(k, k)].re < 0.0 {
            for j in (next..k).rev() {
                swap_adjacent(t, u, j);
            }
            next += 1;
        }
    }
    next
}

/// Stabilizing solution of the continuous-time ARE by the Hamiltonian Schur
/// method, polished by Newton steps.
pub fn solve_are(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<RiccatiSolution> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.nrows() != b.ncols() {
        return Err(QqrError::contract(
            "solve_are",
            format!(
                "inconsistent shapes A {:?}, B {:?}, Q {:?}, R {:?}",
                a.shape(),
                b.shape(),
                q.shape(),
                r.shape()
            ),
        ));
    }
    check_symmetric("Q₂", q)?;
    let weight = ControlWeight::new(r)?;
    let g = weight.gramian(b);

    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let schur = schur_complex(h.map(|x| C64::new(x, 0.0)), h.norm())?;
    let (mut u, mut t) = (schur.transform, schur.triangular);
    let stable = order_stable_first(&mut t, &mut u);
    if stable != n {
        return Err(QqrError::Unstabilizable(format!(
            "Hamiltonian has {stable} eigenvalues in the open left half-plane, expected {n}"
        )));
    }

    let u11 = u.view((0, 0), (n, n)).clone_owned();
    let u21 = u.view((n, 0), (n, n)).clone_owned();
    let sv = u11.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smin.is_nan() || smax.is_nan() || smin <= 1e-12 * smax {
        return Err(QqrError::Unstabilizable(format!(
            "stable invariant subspace is not a graph (σ_min(U₁₁)/σ_max = {:e})",
            smin / smax
        )));
    }
    let vt = u11
        .transpose()
        .lu()
        .solve(&u21.transpose())
        .ok_or_else(|| QqrError::Unstabilizable("U₁₁ is singular".into()))?;
    let v = vt.transpose().map(|z| z.re);
    let mut v = (&v + v.transpose()) * 0.5;
    let mut residual = relative(&are_residual_matrix(a, &g, q, &v), q);

    for _ in 0..MAX_NEWTON_STEPS {
        if residual <= NEWTON_TARGET {
            break;
        }
        let ac = a - &g * &v;
        let rhs = -are_residual_matrix(a, &g, q, &v);
        let Ok((dv, _)) = solve_kron_sum(&ac.transpose(), 2, rhs.as_slice(), 0.0) else {
            break;
        };
        let refined = &v + Matrix::from_column_slice(n, n, &dv);
        let refined = (&refined + refined.transpose()) * 0.5;
        let refined_res = relative(&are_residual_matrix(a, &g, q, &refined), q);
        if refined_res.is_nan() || refined_res >= residual {
            break;
        }
        let stalled = refined_res > 0.5 * residual;
        v = refined;
        residual = refined_res;
        if stalled {
            break;
        }
    }
    if residual.is_nan() || residual > ARE_ACCURACY_TOL {
        return Err(QqrError::Accuracy {
            residual,
            tolerance: ARE_ACCURACY_TOL,
        });
    }

    let k1 = -weight.solve(&(b.transpose() * &v));
    let ac = a + b * &k1;
    let margin = stability_margin(&ac)?;
    if margin.is_nan() || margin >= 0.0 {
        return Err(QqrError::Unstabilizable(format!(
            "closed loop is not stable (max Re λ = {margin:e})"
        )));
    }
    Ok(RiccatiSolution {
        v2: v,
        k1,
        ac,
        residual,
        margin,
    })
}

/// `max Re λ(M)`.
pub fn stability_margin(m: &Matrix) -> Result<f64> {
    let schur = schur_decompose(m)?;
    Ok(schur
        .eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}
