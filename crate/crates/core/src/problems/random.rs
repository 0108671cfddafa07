use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::albrekht::QuadraticSystem;
use crate::error::{QqrError, Result};
use crate::kron::Matrix;

/// Name of the pseudo-random generator, recorded in system files.
pub const GENERATOR: &str = "chacha20";

/// `A = rand(n,n); B = rand(n,m); N = rand(n,n*n); Q = eye(n); R = eye(m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

/// Draws `A`, `B`, `N` (in that order, each column-major) from uniform
/// `[0, 1)` with ChaCha20 seeded by `seed`.
pub fn random_system(spec: &RandomSpec) -> Result<QuadraticSystem> {
    let RandomSpec { n, m, seed } = *spec;
    if n == 0 || m == 0 {
        return Err(QqrError::contract(
            "random_system",
            "n and m must be at least 1",
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| {
        Matrix::from_iterator(
            rows,
            cols,
            std::iter::repeat_with(|| rng.random::<f64>()).take(rows * cols),
        )
    };
    let a = draw(n, n);
    let b = draw(n, m);
    let nq = draw(n, n * n);
    QuadraticSystem::new(a, b, nq, Matrix::identity(n, n), Matrix::identity(m, m))
}
