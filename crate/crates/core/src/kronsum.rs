//! Solvers for `(ℒ_d(A) + λI) v = c`.
//!
//! The recursive path triangularizes `A = U T U*` once, rotates `c` into the
//! Schur basis one mode at a time, and then runs a blocked backward
//! substitution over the slowest mode, recursing into order `d-1` systems
//! whose shift picks up the diagonal of `T`. The dense path assembles the
//! full `n^d × n^d` matrix and exists as an oracle.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{QqrError, Result};
use crate::kron::{
    check_dense_size, checked_pow, for_each_kron_sum_entry, kron_sum_apply, norm2,
    place_apply_into, Matrix,
};

pub type C64 = Complex<f64>;

/// Relative pivot tolerance: a pivot `|Σ T_ii + λ| ≤ PIVOT_TOL·‖A‖_F` is a resonance.
pub const PIVOT_TOL: f64 = 1e-14;
/// Relative residual above which a solve is flagged in its report.
pub const RESIDUAL_WARN: f64 = 1e-10;

/// Unitary triangularization `A = U T U*`.
#[derive(Clone, Debug)]
pub struct SchurForm {
    pub transform: DMatrix<C64>,
    pub triangular: DMatrix<C64>,
    /// Frobenius norm of the factored matrix.
    pub norm: f64,
}

impl SchurForm {
    pub fn dim(&self) -> usize {
        self.triangular.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.triangular.diagonal().iter().copied().collect()
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        &self.transform * &self.triangular * self.transform.adjoint()
    }
}

/// Complex Schur form of a real square matrix.
pub fn schur_decompose(a: &Matrix) -> Result<SchurForm> {
    if !a.is_square() {
        return Err(QqrError::contract(
            "schur_decompose",
            format!("matrix is {}×{}", a.nrows(), a.ncols()),
        ));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(QqrError::contract(
            "schur_decompose",
            "matrix has non-finite entries",
        ));
    }
    schur_complex(a.map(|x| C64::new(x, 0.0)), a.norm())
}

pub(crate) fn schur_complex(a: DMatrix<C64>, norm: f64) -> Result<SchurForm> {
    let n = a.nrows();
    let max_iter = 100 * n.max(1);
    let schur =
        nalgebra::Schur::try_new(a, f64::EPSILON, max_iter).ok_or(QqrError::NoConvergence {
            what: "Schur QR iteration",
            iterations: max_iter,
        })?;
    let (transform, mut triangular) = schur.unpack();
    for j in 0..n {
        for i in j + 1..n {
            triangular[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok(SchurForm {
        transform,
        triangular,
        norm,
    })
}

/// Diagnostics recorded for every recursive solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// `‖(ℒ_d(A) + λI) v − c‖₂ / ‖c‖₂` (absolute when `c = 0`).
    pub residual_norm: f64,
    pub min_pivot: f64,
    pub recursion_depth: usize,
    /// `‖Im v‖₂ / ‖v‖₂` before the imaginary part was dropped.
    pub imag_ratio: f64,
    /// Set when `residual_norm` exceeds [`RESIDUAL_WARN`].
    pub residual_warning: bool,
}

/// The implicit operator `ℒ_d(A) + λI`.
#[derive(Clone, Debug)]
pub struct KronSumSystem {
    factor: Matrix,
    schur: Arc<SchurForm>,
    order: usize,
    shift: f64,
}

impl KronSumSystem {
    pub fn new(factor: Matrix, order: usize, shift: f64) -> Result<Self> {
        if order == 0 {
            return Err(QqrError::contract(
                "KronSumSystem::new",
                "order must be at least 1",
            ));
        }
        let schur = global_cache().get_or_compute(&factor)?;
        Ok(KronSumSystem {
            factor,
            schur,
            order,
            shift,
        })
    }

    /// Builds the operator around an already computed Schur form of `factor`.
    pub fn with_schur(
        factor: Matrix,
        schur: Arc<SchurForm>,
        order: usize,
        shift: f64,
    ) -> Result<Self> {
        if order == 0 || schur.dim() != factor.nrows() || !factor.is_square() {
            return Err(QqrError::contract(
                "KronSumSystem::with_schur",
                "inconsistent factor, Schur form, or order",
            ));
        }
        Ok(KronSumSystem {
            factor,
            schur,
            order,
            shift,
        })
    }

    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows().pow(self.order as u32)
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = kron_sum_apply(&self.factor, self.order, v)?;
        if self.shift != 0.0 {
            out.iter_mut()
                .zip(v)
                .for_each(|(o, x)| *o += self.shift * x);
        }
        Ok(out)
    }

    pub fn solve(&self, c: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let n = self.factor.nrows();
        let d = self.order;
        let len = checked_pow(n, d)?;
        if c.len() != len {
            return Err(QqrError::contract(
                "solve_kron_sum",
                format!(
                    "right-hand side has length {}, expected {n}^{d} = {len}",
                    c.len()
                ),
            ));
        }
        let schur = &*self.schur;
        let u_adj = schur.transform.adjoint();

        let mut work: Vec<C64> = c.iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut spare = vec![C64::new(0.0, 0.0); len];
        rotate_modes(&u_adj, d, &mut work, &mut spare);

        let tolerance = PIVOT_TOL * schur.norm;
        let mut min_pivot = f64::INFINITY;
        triangular_solve(
            &schur.triangular,
            d,
            C64::new(self.shift, 0.0),
            &mut work,
            tolerance,
            &mut min_pivot,
        )?;

        rotate_modes(&schur.transform, d, &mut work, &mut spare);
        drop(spare);

        let mut imag_sq = 0.0;
        let mut real_sq = 0.0;
        let v: Vec<f64> = work
            .iter()
            .map(|z| {
                imag_sq += z.im * z.im;
                real_sq += z.re * z.re;
                z.re
            })
            .collect();
        drop(work);
        let imag_ratio = if real_sq > 0.0 {
            (imag_sq / real_sq).sqrt()
        } else {
            imag_sq.sqrt()
        };

        let residual_norm = self.relative_residual(&v, c)?;
        Ok((
            v,
            SolveReport {
                residual_norm,
                min_pivot,
                recursion_depth: d,
                imag_ratio,
                residual_warning: residual_norm > RESIDUAL_WARN || !residual_norm.is_finite(),
            },
        ))
    }

    pub fn relative_residual(&self, v: &[f64], c: &[f64]) -> Result<f64> {
        let mut r = self.apply(v)?;
        r.iter_mut().zip(c).for_each(|(ri, ci)| *ri -= ci);
        let cn = norm2(c);
        let rn = norm2(&r);
        Ok(if cn > 0.0 { rn / cn } else { rn })
    }
}

/// Applies `M` along every mode: `(M ⊗ … ⊗ M) work`, using `spare` as scratch.
fn rotate_modes(m: &DMatrix<C64>, d: usize, work: &mut Vec<C64>, spare: &mut Vec<C64>) {
    let n = m.nrows();
    for pos in 0..d {
        let left = n.pow(pos as u32);
        let right = n.pow((d - 1 - pos) as u32);
        place_apply_into(m, left, right, work, spare, false);
        std::mem::swap(work, spare);
    }
}

/// In-place solve of `(ℒ_d(T) + shift·I) w = rhs` for upper-triangular `T`.
///
/// With the slowest mode split off, `ℒ_d(T) = T ⊗ I + I ⊗ ℒ_{d-1}(T)`, so
/// block `i` satisfies
/// `(ℒ_{d-1}(T) + (shift + T_ii) I) w_i = rhs_i − Σ_{j>i} T_ij w_j`.
fn triangular_solve(
    t: &DMatrix<C64>,
    d: usize,
    shift: C64,
    w: &mut [C64],
    tolerance: f64,
    min_pivot: &mut f64,
) -> Result<()> {
    let n = t.nrows();
    if d == 1 {
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= t[(i, j)] * w[j];
            }
            let pivot = t[(i, i)] + shift;
            check_pivot(pivot, tolerance, min_pivot)?;
            w[i] = s / pivot;
        }
        return Ok(());
    }
    let block = w.len() / n;
    for i in (0..n).rev() {
        let (head, solved) = w.split_at_mut((i + 1) * block);
        let target = &mut head[i * block..];
        for (k, wj) in solved.chunks_exact(block).enumerate() {
            let tij = t[(i, i + 1 + k)];
            if tij == C64::new(0.0, 0.0) {
                continue;
            }
            target.iter_mut().zip(wj).for_each(|(a, b)| *a -= tij * b);
        }
        triangular_solve(t, d - 1, shift + t[(i, i)], target, tolerance, min_pivot)?;
    }
    Ok(())
}

fn check_pivot(pivot: C64, tolerance: f64, min_pivot: &mut f64) -> Result<()> {
    let mag = pivot.norm();
    *min_pivot = min_pivot.min(mag);
    if mag <= tolerance || mag == 0.0 || !mag.is_finite() {
        return Err(QqrError::SingularResonance {
            pivot: mag,
            tolerance,
        });
    }
    Ok(())
}

/// Solves `(ℒ_d(A) + shift·I) v = c` by the recursive Schur method. The Schur
/// form of `A` is cached process-wide by matrix contents.
pub fn solve_kron_sum(
    a: &Matrix,
    d: usize,
    c: &[f64],
    shift: f64,
) -> Result<(Vec<f64>, SolveReport)> {
    if !a.is_square() {
        return Err(QqrError::contract(
            "solve_kron_sum",
            "factor must be square",
        ));
    }
    KronSumSystem::new(a.clone(), d, shift)?.solve(c)
}

/// Solves `(ℒ_d(A) + shift·I) v = c` by assembling the dense matrix and
/// factoring it with partial-pivoting LU. Refuses above `cap` bytes.
pub fn solve_full(a: &Matrix, d: usize, c: &[f64], shift: f64, cap: u64) -> Result<Vec<f64>> {
    if !a.is_square() || d == 0 {
        return Err(QqrError::contract(
            "solve_full",
            "factor must be square and order at least 1",
        ));
    }
    let n = a.nrows();
    let len = checked_pow(n, d)?;
    if c.len() != len {
        return Err(QqrError::contract(
            "solve_full",
            format!("right-hand side has length {}, expected {len}", c.len()),
        ));
    }
    check_dense_size(len, len, cap)?;

    let mut m = faer::Mat::<f64>::zeros(len, len);
    for_each_kron_sum_entry(a, d, |i, j, v| m[(i, j)] += v);
    if shift != 0.0 {
        for i in 0..len {
            m[(i, i)] += shift;
        }
    }

    let par = faer::Par::Seq;
    let mut fwd = vec![0usize; len];
    let mut bwd = vec![0usize; len];
    let scratch = faer::linalg::lu::partial_pivoting::factor::lu_in_place_scratch::<usize, f64>(
        len,
        len,
        par,
        Default::default(),
    );
    let mut mem = faer::dyn_stack::MemBuffer::new(scratch);
    let (_, perm) = faer::linalg::lu::partial_pivoting::factor::lu_in_place(
        m.as_mut(),
        &mut fwd,
        &mut bwd,
        par,
        faer::dyn_stack::MemStack::new(&mut mem),
        Default::default(),
    );
    let (perm_fwd, _) = perm.arrays();

    let scale = (0..len).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    if (0..len).any(|i| m[(i, i)].abs() <= f64::EPSILON * scale * len as f64) {
        return Err(QqrError::Singular {
            context: "solve_full",
        });
    }

    let mut rhs = faer::Mat::<f64>::from_fn(len, 1, |i, _| c[perm_fwd[i]]);
    faer::linalg::triangular_solve::solve_unit_lower_triangular_in_place(
        m.as_ref(),
        rhs.as_mut(),
        par,
    );
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(m.as_ref(), rhs.as_mut(), par);
    Ok((0..len).map(|i| rhs[(i, 0)]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct MatrixKey {
    rows: usize,
    cols: usize,
    hash: u64,
}

impl MatrixKey {
    fn of(a: &Matrix) -> Self {
        let mut h = DefaultHasher::new();
        for x in a.iter() {
            x.to_bits().hash(&mut h);
        }
        MatrixKey {
            rows: a.nrows(),
            cols: a.ncols(),
            hash: h.finish(),
        }
    }
}

/// Schur forms keyed by matrix contents. Reads are concurrent, insertion is
/// exclusive.
#[derive(Debug, Default)]
pub struct SchurCache {
    entries: RwLock<HashMap<MatrixKey, (Matrix, Arc<SchurForm>)>>,
}

const CACHE_CAPACITY: usize = 64;

impl SchurCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(&self, a: &Matrix) -> Result<Arc<SchurForm>> {
        let key = MatrixKey::of(a);
        if let Some((stored, schur)) = self.entries.read().expect("schur cache poisoned").get(&key)
        {
            if stored == a {
                return Ok(Arc::clone(schur));
            }
        }
        let schur = Arc::new(schur_decompose(a)?);
        let mut entries = self.entries.write().expect("schur cache poisoned");
        if entries.len() >= CACHE_CAPACITY {
            entries.clear();
        }
        entries.insert(key, (a.clone(), Arc::clone(&schur)));
        Ok(schur)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("schur cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn global_cache() -> &'static SchurCache {
    static CACHE: OnceLock<SchurCache> = OnceLock::new();
    CACHE.get_or_init(SchurCache::new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kron::{kron_sum_matrix, DEFAULT_MEMORY_CAP};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    fn stable_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let a = Matrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let max_re = a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        a - Matrix::identity(n, n) * (1.0 + max_re)
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm2(&diff) / norm2(b)
    }

    /// Dense oracle independent of both solver paths: nalgebra LU.
    fn nalgebra_dense(a: &Matrix, d: usize, c: &[f64], shift: f64) -> Vec<f64> {
        let n = a.nrows().pow(d as u32);
        let m = kron_sum_matrix(a, d, DEFAULT_MEMORY_CAP).unwrap() + Matrix::identity(n, n) * shift;
        m.lu()
            .solve(&nalgebra::DVector::from_column_slice(c))
            .unwrap()
            .as_slice()
            .to_vec()
    }

    #[test]
    fn schur_of_triangular_is_itself() {
        let a = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 0.0, 4.0, 5.0, 0.0, 0.0, 6.0]);
        let s = schur_decompose(&a).unwrap();
        let re = s.triangular.map(|z| z.re);
        assert!((re - &a).norm() < 1e-14);
        let u_re = s.transform.map(|z| z.re.abs());
        assert!((u_re - Matrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn schur_of_rotation_has_imaginary_spectrum() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let mut eig = schur_decompose(&a).unwrap().eigenvalues();
        eig.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap());
        assert!((eig[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((eig[1] - C64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn schur_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = Matrix::from_fn(5, 5, |_, _| rng.random::<f64>());
        let s = schur_decompose(&a).unwrap();
        let err = (s.reconstruct() - a.map(|x| C64::new(x, 0.0))).norm() / a.norm();
        assert!(err <= 1e-12, "{err}");
        assert!(schur_decompose(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn scalar_and_diagonal_solves() {
        let a = Matrix::from_element(1, 1, -1.0);
        let (v, rep) = solve_kron_sum(&a, 3, &[3.0], 0.0).unwrap();
        assert!((v[0] + 1.0).abs() < 1e-15);
        assert_eq!(rep.recursion_depth, 3);
        assert_eq!(
            solve_full(&a, 3, &[3.0], 0.0, DEFAULT_MEMORY_CAP).unwrap(),
            v
        );

        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let c = [2.0, 3.0, 3.0, 4.0];
        let (v, rep) = solve_kron_sum(&a, 2, &c, 0.0).unwrap();
        for x in &v {
            assert!((x + 1.0).abs() < 1e-15);
        }
        assert!((rep.min_pivot - 2.0).abs() < 1e-15);
        let vf = solve_full(&a, 2, &c, 0.0, DEFAULT_MEMORY_CAP).unwrap();
        assert!(rel(&vf, &v) < 1e-15);
    }

    #[test]
    fn matches_dense_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let a = stable_matrix(&mut rng, 4);
        let c = rand_vec(&mut rng, 64);
        let (v, rep) = solve_kron_sum(&a, 3, &c, 0.0).unwrap();
        assert!(rel(&v, &nalgebra_dense(&a, 3, &c, 0.0)) < 1e-10);
        assert!(rel(&v, &solve_full(&a, 3, &c, 0.0, DEFAULT_MEMORY_CAP).unwrap()) < 1e-10);
        assert!(rep.imag_ratio < 1e-11);
        assert!(!rep.residual_warning);
    }

    #[test]
    fn full_and_recursive_agree_at_n6_d3() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let a = stable_matrix(&mut rng, 6);
        let c = rand_vec(&mut rng, 216);
        let (v, _) = solve_kron_sum(&a, 3, &c, 0.0).unwrap();
        let vf = solve_full(&a, 3, &c, 0.0, DEFAULT_MEMORY_CAP).unwrap();
        assert!(rel(&v, &vf) < 1e-10);
    }

    #[test]
    fn full_refuses_large_assembly() {
        let a = -Matrix::identity(16, 16);
        let c = vec![1.0; 16usize.pow(4)];
        assert!(matches!(
            solve_full(&a, 4, &c, 0.0, DEFAULT_MEMORY_CAP),
            Err(QqrError::SizeLimit { .. })
        ));
    }

    #[test]
    fn resonance_is_reported() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        let err = solve_kron_sum(&a, 2, &[1.0, 1.0, 1.0, 1.0], 0.0).unwrap_err();
        assert!(matches!(err, QqrError::SingularResonance { .. }));
        let err = solve_kron_sum(&-Matrix::identity(2, 2), 2, &[1.0; 4], 2.0).unwrap_err();
        assert!(matches!(err, QqrError::SingularResonance { .. }));
        let err = solve_full(&a, 2, &[1.0; 4], 0.0, DEFAULT_MEMORY_CAP).unwrap_err();
        assert!(matches!(err, QqrError::Singular { .. }));
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        let a = -Matrix::identity(2, 2);
        assert!(matches!(
            solve_kron_sum(&a, 2, &[1.0; 3], 0.0),
            Err(QqrError::Contract { .. })
        ));
        assert!(matches!(
            solve_full(&a, 2, &[1.0; 3], 0.0, DEFAULT_MEMORY_CAP),
            Err(QqrError::Contract { .. })
        ));
    }

    #[test]
    fn report_residual_matches_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let a = stable_matrix(&mut rng, 3);
        let c = rand_vec(&mut rng, 81);
        let (v, rep) = solve_kron_sum(&a, 4, &c, 0.5).unwrap();
        let mut r = kron_sum_apply(&a, 4, &v).unwrap();
        r.iter_mut()
            .zip(&v)
            .zip(&c)
            .for_each(|((ri, vi), ci)| *ri += 0.5 * vi - ci);
        let recomputed = norm2(&r) / norm2(&c);
        assert!((recomputed - rep.residual_norm).abs() <= 1e-13);
    }

    #[test]
    fn shift_moves_into_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let a = stable_matrix(&mut rng, 3);
        let c = rand_vec(&mut rng, 27);
        let lambda = 0.7;
        let (v1, _) = solve_kron_sum(&a, 3, &c, lambda).unwrap();
        let shifted = &a + Matrix::identity(3, 3) * (lambda / 3.0);
        let (v2, _) = solve_kron_sum(&shifted, 3, &c, 0.0).unwrap();
        assert!(rel(&v1, &v2) < 1e-11);
    }

    #[test]
    fn solves_are_bit_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let a = stable_matrix(&mut rng, 5);
        let c = rand_vec(&mut rng, 125);
        let (v1, _) = solve_kron_sum(&a, 3, &c, 0.0).unwrap();
        let fresh =
            KronSumSystem::with_schur(a.clone(), Arc::new(schur_decompose(&a).unwrap()), 3, 0.0)
                .unwrap();
        let (v2, _) = fresh.solve(&c).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn cache_reuses_entries() {
        let cache = SchurCache::new();
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let s1 = cache.get_or_compute(&a).unwrap();
        let s2 = cache.get_or_compute(&a.clone()).unwrap();
        assert!(Arc::ptr_eq(&s1, &s2));
        assert_eq!(cache.len(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn recursive_matches_full(seed in any::<u64>(), n in 1usize..=8, d in 1usize..=4) {
            prop_assume!(n.pow(d as u32) <= 4096);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = stable_matrix(&mut rng, n);
            let c = rand_vec(&mut rng, n.pow(d as u32));
            let (v, _) = solve_kron_sum(&a, d, &c, 0.0).unwrap();
            let vf = solve_full(&a, d, &c, 0.0, DEFAULT_MEMORY_CAP).unwrap();
            prop_assert!(rel(&v, &vf) <= 1e-9);
        }

        #[test]
        fn stable_factor_never_resonates(seed in any::<u64>(), n in 1usize..6, d in 1usize..4, shift in -3.0f64..=0.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = stable_matrix(&mut rng, n);
            let c = rand_vec(&mut rng, n.pow(d as u32));
            prop_assert!(solve_kron_sum(&a, d, &c, shift).is_ok());
        }
    }
}
