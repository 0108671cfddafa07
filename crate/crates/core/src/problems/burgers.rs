use serde::{Deserialize, Serialize};

use crate::albrekht::QuadraticSystem;
use crate::error::{QqrError, Result};
use crate::kron::Matrix;

/// Periodic Burgers equation `z_t = ε z_xx − ½(z²)_x + Σ_k χ_k u_k` on
/// `[0, 1]`, discretized with `n` linear elements and `m` equal control
/// patches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurgersSpec {
    pub n: usize,
    pub m: usize,
    pub eps: f64,
}

impl BurgersSpec {
    pub fn new(n: usize) -> Self {
        BurgersSpec { n, m: 2, eps: 1e-3 }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(QqrError::contract(
                "burgers_system",
                format!("need at least 3 elements, got {}", self.n),
            ));
        }
        if self.m == 0 {
            return Err(QqrError::contract(
                "burgers_system",
                "need at least one control patch",
            ));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(QqrError::contract(
                "burgers_system",
                format!("viscosity must be positive, got {}", self.eps),
            ));
        }
        Ok(())
    }
}

/// Element-local mass matrix on the reference element, scaled by `1/h`.
const LOCAL_MASS: [[f64; 2]; 2] = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
/// `h·ψ_a′` for the two local basis functions.
const LOCAL_SLOPE: [f64; 2] = [-1.0, 1.0];

fn element_nodes(e: usize, n: usize) -> [usize; 2] {
    [e, (e + 1) % n]
}

/// Periodic mass matrix, row stencil `h/6·[1, 4, 1]`.
pub fn mass_matrix(n: usize) -> Matrix {
    let h = 1.0 / n as f64;
    let mut mm = Matrix::zeros(n, n);
    for e in 0..n {
        let g = element_nodes(e, n);
        for a in 0..2 {
            for b in 0..2 {
                mm[(g[a], g[b])] += h * LOCAL_MASS[a][b];
            }
        }
    }
    mm
}

/// Periodic stiffness matrix, row stencil `1/h·[−1, 2, −1]`.
pub fn stiffness_matrix(n: usize) -> Matrix {
    let h = 1.0 / n as f64;
    let mut s = Matrix::zeros(n, n);
    for e in 0..n {
        let g = element_nodes(e, n);
        for a in 0..2 {
            for b in 0..2 {
                s[(g[a], g[b])] += LOCAL_SLOPE[a] * LOCAL_SLOPE[b] / h;
            }
        }
    }
    s
}

/// `C[i, (j,k)] = ½∫ φ_j φ_k φ_i′ dx`, column `j·n + k`.
fn convection_tensor(n: usize) -> Matrix {
    let mut c = Matrix::zeros(n, n * n);
    for e in 0..n {
        let g = element_nodes(e, n);
        for a in 0..2 {
            for b in 0..2 {
                for (ci, slope) in LOCAL_SLOPE.iter().enumerate() {
                    // ∫_e ψ_a ψ_b ψ_c′ = h·LOCAL_MASS[a][b] · slope/h.
                    c[(g[ci], g[a] * n + g[b])] += 0.5 * LOCAL_MASS[a][b] * slope;
                }
            }
        }
    }
    c
}

/// `P[i, k] = ∫ χ_[k/m, (k+1)/m] φ_i dx`, exact for patches that cut elements.
fn patch_loads(n: usize, m: usize) -> Matrix {
    let h = 1.0 / n as f64;
    let mut p = Matrix::zeros(n, m);
    for k in 0..m {
        let (lo, hi) = (k as f64 / m as f64, (k + 1) as f64 / m as f64);
        for e in 0..n {
            let (x0, x1) = (e as f64 * h, (e + 1) as f64 * h);
            let (a, b) = (lo.max(x0), hi.min(x1));
            if b <= a {
                continue;
            }
            let (s, t) = ((a - x0) / h, (b - x0) / h);
            let g = element_nodes(e, n);
            // ∫ (1 − ξ) and ∫ ξ over [s, t], times h.
            p[(g[0], k)] += h * ((t - s) - 0.5 * (t * t - s * s));
            p[(g[1], k)] += h * 0.5 * (t * t - s * s);
        }
    }
    p
}

/// Standard-form QQR system `A = −εM⁻¹S`, `B = M⁻¹P`, `N = M⁻¹C`,
/// `Q₂ = M`, `R₂ = I_m`.
pub fn burgers_system(spec: &BurgersSpec) -> Result<QuadraticSystem> {
    spec.validate()?;
    let n = spec.n;
    let mass = mass_matrix(n);
    let chol = mass.clone().cholesky().ok_or(QqrError::Singular {
        context: "Burgers mass matrix",
    })?;
    let a = chol.solve(&stiffness_matrix(n)) * -spec.eps;
    let b = chol.solve(&patch_loads(n, spec.m));
    let nq = chol.solve(&convection_tensor(n));
    QuadraticSystem::new(a, b, nq, mass, Matrix::identity(spec.m, spec.m))
}
