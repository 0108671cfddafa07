//! Matrix-free Kronecker primitives.
//!
//! Vectors are vectorized column-major, and in a Kronecker product the last
//! factor varies fastest: `(x ⊗ y)[i * len(y) + j] = x[i] * y[j]`. Under this
//! convention `(X ⊗ Y) vec(R) = vec(Y R Xᵀ)`, which is how every product with
//! a Kronecker-structured operator is evaluated here. Nothing in the fast path
//! ever materializes a Kronecker factor; [`kron_sum_matrix`] and
//! [`kron_product`] exist for oracles and small problems.

use nalgebra::{ClosedAddAssign, ClosedMulAssign, DMatrix, DMatrixView, DMatrixViewMut, Scalar};
use num_traits::{One, Zero};

use crate::error::{QqrError, Result};

pub type Matrix = DMatrix<f64>;

/// Default cap on predicted dense storage for assembled Kronecker matrices.
pub const DEFAULT_MEMORY_CAP: u64 = 2 << 30;

/// `n^d` with overflow reported as a contract violation.
pub fn checked_pow(n: usize, d: usize) -> Result<usize> {
    u32::try_from(d)
        .ok()
        .and_then(|d| n.checked_pow(d))
        .ok_or_else(|| QqrError::contract("checked_pow", format!("{n}^{d} overflows usize")))
}

/// Coefficient vector of a homogeneous polynomial of order `d` in `n`
/// variables, stored against the monomial vector `x ⊗ … ⊗ x`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffVector {
    base_dim: usize,
    order: usize,
    values: Vec<f64>,
}

impl CoeffVector {
    pub fn new(base_dim: usize, order: usize, values: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(QqrError::contract(
                "CoeffVector::new",
                "order must be at least 1",
            ));
        }
        let len = checked_pow(base_dim, order)?;
        if values.len() != len {
            return Err(QqrError::contract(
                "CoeffVector::new",
                format!(
                    "expected {base_dim}^{order} = {len} values, got {}",
                    values.len()
                ),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QqrError::contract(
                "CoeffVector::new",
                "values must be finite",
            ));
        }
        Ok(CoeffVector {
            base_dim,
            order,
            values,
        })
    }

    pub fn zeros(base_dim: usize, order: usize) -> Result<Self> {
        let len = checked_pow(base_dim, order)?;
        CoeffVector::new(base_dim, order, vec![0.0; len])
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(X ⊗ Y) v` for `X: p×q`, `Y: r×s`, `v` of length `q·s`.
pub fn kron_vec_apply(x: &Matrix, y: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    let (p, q) = x.shape();
    let (r, s) = y.shape();
    if v.len() != q * s {
        return Err(QqrError::contract(
            "kron_vec_apply",
            format!("vector length {} does not match {q}·{s}", v.len()),
        ));
    }
    let rmat = DMatrixView::from_slice(v, s, q);
    let yr = y * rmat;
    let mut out = vec![0.0; p * r];
    DMatrixViewMut::from_slice(&mut out, r, p).gemm(1.0, &yr, &x.transpose(), 0.0);
    Ok(out)
}

/// Accumulates or overwrites `out` with `(I_left ⊗ X ⊗ I_right) v`.
///
/// `v` is read as `left` consecutive blocks, each a column-major
/// `right × n` matrix; each block is multiplied by `Xᵀ` from the right so the
/// trailing identity is absorbed into a single GEMM. When `right == 1` the
/// whole product is one `X · V` with `V` of shape `n × left`.
pub(crate) fn place_apply_into<T>(
    x: &DMatrix<T>,
    left: usize,
    right: usize,
    v: &[T],
    out: &mut [T],
    accumulate: bool,
) where
    T: Scalar + Zero + One + ClosedAddAssign + ClosedMulAssign,
{
    let (p, n) = x.shape();
    debug_assert_eq!(v.len(), left * n * right);
    debug_assert_eq!(out.len(), left * p * right);
    let beta = if accumulate { T::one() } else { T::zero() };
    if right == 1 {
        let vin = DMatrixView::from_slice(v, n, left);
        DMatrixViewMut::from_slice(out, p, left).gemm(T::one(), x, &vin, beta);
        return;
    }
    let xt = x.transpose();
    let (bin, bout) = (n * right, p * right);
    for (vb, ob) in v.chunks_exact(bin).zip(out.chunks_exact_mut(bout)) {
        let vin = DMatrixView::from_slice(vb, right, n);
        DMatrixViewMut::from_slice(ob, right, p).gemm(T::one(), &vin, &xt, beta.clone());
    }
}

/// `(I_left ⊗ X ⊗ I_right) v` for `X: p×n`.
pub fn kron_place_apply(x: &Matrix, left: usize, right: usize, v: &[f64]) -> Result<Vec<f64>> {
    let (p, n) = x.shape();
    if left == 0 || right == 0 || v.len() != left * n * right {
        return Err(QqrError::contract(
            "kron_place_apply",
            format!(
                "vector length {} does not match {left}·{n}·{right}",
                v.len()
            ),
        ));
    }
    let mut out = vec![0.0; left * p * right];
    place_apply_into(x, left, right, v, &mut out, false);
    Ok(out)
}

fn check_kron_sum_args(x_cols: usize, d: usize, len: usize) -> Result<()> {
    if d == 0 {
        return Err(QqrError::contract(
            "kron_sum_apply",
            "order must be at least 1",
        ));
    }
    let expect = checked_pow(x_cols, d)?;
    if len != expect {
        return Err(QqrError::contract(
            "kron_sum_apply",
            format!("vector length {len} does not match {x_cols}^{d} = {expect}"),
        ));
    }
    Ok(())
}

/// Adds `ℒ_d(X) v` into `out`. `X` may be rectangular (`p×n`), in which case
/// every placement maps `ℝ^{n^d}` to `ℝ^{p·n^{d-1}}`.
pub(crate) fn kron_sum_accumulate<T>(x: &DMatrix<T>, d: usize, v: &[T], out: &mut [T])
where
    T: Scalar + Zero + One + ClosedAddAssign + ClosedMulAssign,
{
    let n = x.ncols();
    for pos in 0..d {
        let left = n.pow(pos as u32);
        let right = n.pow((d - 1 - pos) as u32);
        place_apply_into(x, left, right, v, out, true);
    }
}

/// `ℒ_d(X) v = Σ_pos (I ⊗ … ⊗ X ⊗ … ⊗ I) v`, summed in placement order.
pub fn kron_sum_apply(x: &Matrix, d: usize, v: &[f64]) -> Result<Vec<f64>> {
    check_kron_sum_args(x.ncols(), d, v.len())?;
    let n = x.ncols();
    let out_len = x
        .nrows()
        .checked_mul(checked_pow(n, d - 1)?)
        .ok_or_else(|| QqrError::contract("kron_sum_apply", "output length overflows"))?;
    let mut out = vec![0.0; out_len];
    kron_sum_accumulate(x, d, v, &mut out);
    Ok(out)
}

/// `x ⊗ x ⊗ … ⊗ x` with `d` factors.
pub fn lift(x: &[f64], d: usize) -> Vec<f64> {
    assert!(d >= 1, "lift order must be at least 1");
    let mut acc = x.to_vec();
    for _ in 1..d {
        acc = lift_next(&acc, x);
    }
    acc
}

/// `prev ⊗ x`.
fn lift_next(prev: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(prev.len() * x.len());
    for &a in prev {
        out.extend(x.iter().map(|&b| a * b));
    }
    out
}

/// Monomial vectors `lift(x, 1..=max_order)`.
pub(crate) fn lifts(x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(max_order);
    if max_order == 0 {
        return out;
    }
    out.push(x.to_vec());
    for _ in 1..max_order {
        let next = lift_next(out.last().unwrap(), x);
        out.push(next);
    }
    out
}

/// `Σ_d v_d · lift(x, d)` over the given homogeneous pieces.
pub fn eval_value(coeffs: &[CoeffVector], x: &[f64]) -> Result<f64> {
    if let Some(c) = coeffs.iter().find(|c| c.base_dim() != x.len()) {
        return Err(QqrError::contract(
            "eval_value",
            format!(
                "coefficient base dimension {} does not match x of length {}",
                c.base_dim(),
                x.len()
            ),
        ));
    }
    let max_order = coeffs.iter().map(CoeffVector::order).max().unwrap_or(0);
    let monomials = lifts(x, max_order);
    Ok(coeffs
        .iter()
        .map(|c| dot(c.values(), &monomials[c.order() - 1]))
        .sum())
}

/// `Σ_d K_d · lift(x, d)` where `gains[i]` is the degree-`i+1` gain of shape
/// `m × n^{i+1}`.
pub fn eval_feedback(gains: &[Matrix], x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let m = gains.first().map_or(0, |k| k.nrows());
    for (i, k) in gains.iter().enumerate() {
        let cols = checked_pow(n, i + 1)?;
        if k.nrows() != m || k.ncols() != cols {
            return Err(QqrError::contract(
                "eval_feedback",
                format!(
                    "gain of degree {} has shape {}×{}, expected {m}×{cols}",
                    i + 1,
                    k.nrows(),
                    k.ncols()
                ),
            ));
        }
    }
    let monomials = lifts(x, gains.len());
    let mut u = vec![0.0; m];
    for (k, z) in gains.iter().zip(&monomials) {
        let z = DMatrixView::from_slice(z, z.len(), 1);
        DMatrixViewMut::from_slice(&mut u, m, 1).gemm(1.0, k, &z, 1.0);
    }
    Ok(u)
}

/// Mode-`mode` unfolding (0-based, slowest index first) of an order-`d`
/// coefficient array: an `n × n^{d-1}` matrix whose rows are indexed by that
/// mode and whose columns run over the remaining modes in their original order.
pub fn unfold(v: &CoeffVector, mode: usize) -> Result<Matrix> {
    let (n, d) = (v.base_dim(), v.order());
    if mode >= d {
        return Err(QqrError::contract(
            "unfold",
            format!("mode {mode} out of range for order {d}"),
        ));
    }
    let lo = checked_pow(n, d - 1 - mode)?;
    let hi = checked_pow(n, mode)?;
    let mut out = Matrix::zeros(n, hi * lo);
    let vals = v.values();
    for h in 0..hi {
        for r in 0..n {
            let src = &vals[(h * n + r) * lo..(h * n + r + 1) * lo];
            for (l, &s) in src.iter().enumerate() {
                out[(r, h * lo + l)] = s;
            }
        }
    }
    Ok(out)
}

/// Sum of all mode unfoldings. For every `x`,
/// `∇(v · lift(x, d)) = unfold_sum(v) · lift(x, d-1)`.
pub fn unfold_sum(v: &CoeffVector) -> Result<Matrix> {
    let (n, d) = (v.base_dim(), v.order());
    if d == 1 {
        return Ok(Matrix::from_column_slice(n, 1, v.values()));
    }
    let mut acc = unfold(v, 0)?;
    for mode in 1..d {
        acc += unfold(v, mode)?;
    }
    Ok(acc)
}

/// Flat index of the sorted multi-index of `flat`.
fn canonical_index(mut flat: usize, n: usize, digits: &mut [usize]) -> usize {
    for slot in digits.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
    digits.sort_unstable();
    digits.iter().fold(0, |acc, &g| acc * n + g)
}

/// Permutation-symmetric part of `v`: every entry is replaced by the mean of
/// its class of equivalent multi-indices. Evaluation is unchanged.
pub fn symmetrize(v: &CoeffVector) -> CoeffVector {
    let (n, d) = (v.base_dim(), v.order());
    let vals = v.values();
    if d == 1 || n <= 1 {
        return v.clone();
    }
    let mut sums = vec![0.0; vals.len()];
    let mut counts = vec![0u32; vals.len()];
    let mut digits = vec![0usize; d];
    for (i, &x) in vals.iter().enumerate() {
        let c = canonical_index(i, n, &mut digits);
        sums[c] += x;
        counts[c] += 1;
    }
    let out = (0..vals.len())
        .map(|i| {
            let c = canonical_index(i, n, &mut digits);
            sums[c] / f64::from(counts[c])
        })
        .collect();
    CoeffVector {
        base_dim: n,
        order: d,
        values: out,
    }
}

pub(crate) fn check_dense_size(rows: usize, cols: usize, cap: u64) -> Result<()> {
    let predicted = rows as u128 * cols as u128 * std::mem::size_of::<f64>() as u128;
    if predicted > u128::from(cap) {
        return Err(QqrError::SizeLimit {
            predicted,
            cap: u128::from(cap),
        });
    }
    Ok(())
}

/// Calls `f(row, col, value)` for every structural nonzero contribution of
/// `ℒ_d(X)`. Entries on shared positions are visited once per placement.
pub(crate) fn for_each_kron_sum_entry(x: &Matrix, d: usize, mut f: impl FnMut(usize, usize, f64)) {
    let (p, n) = x.shape();
    for pos in 0..d {
        let left = n.pow(pos as u32);
        let right = n.pow((d - 1 - pos) as u32);
        for l in 0..left {
            for b in 0..n {
                for a in 0..p {
                    let xab = x[(a, b)];
                    if xab == 0.0 {
                        continue;
                    }
                    let row0 = (l * p + a) * right;
                    let col0 = (l * n + b) * right;
                    for r in 0..right {
                        f(row0 + r, col0 + r, xab);
                    }
                }
            }
        }
    }
}

/// Explicit `ℒ_d(X)`; refuses when the dense matrix would exceed `cap` bytes.
pub fn kron_sum_matrix(x: &Matrix, d: usize, cap: u64) -> Result<Matrix> {
    if d == 0 {
        return Err(QqrError::contract(
            "kron_sum_matrix",
            "order must be at least 1",
        ));
    }
    let (p, n) = x.shape();
    let cols = checked_pow(n, d)?;
    let rows = p * checked_pow(n, d - 1)?;
    check_dense_size(rows, cols, cap)?;
    let mut out = Matrix::zeros(rows, cols);
    for_each_kron_sum_entry(x, d, |i, j, v| out[(i, j)] += v);
    Ok(out)
}

/// Explicit `X_1 ⊗ X_2 ⊗ … ⊗ X_k`; refuses when above `cap` bytes.
pub fn kron_product(factors: &[Matrix], cap: u64) -> Result<Matrix> {
    let Some((first, rest)) = factors.split_first() else {
        return Err(QqrError::contract(
            "kron_product",
            "need at least one factor",
        ));
    };
    let (rows, cols) = rest.iter().fold(
        (first.nrows() as u128, first.ncols() as u128),
        |(r, c), f| (r * f.nrows() as u128, c * f.ncols() as u128),
    );
    let predicted = rows * cols * 8;
    if predicted > u128::from(cap) {
        return Err(QqrError::SizeLimit {
            predicted,
            cap: u128::from(cap),
        });
    }
    Ok(rest.iter().fold(first.clone(), |acc, f| acc.kronecker(f)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn rand_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm2(&diff) / norm2(b).max(f64::MIN_POSITIVE)
    }

    fn dense_apply(m: &Matrix, v: &[f64]) -> Vec<f64> {
        (m * nalgebra::DVector::from_column_slice(v))
            .as_slice()
            .to_vec()
    }

    /// Independent `ℒ_d(X)` built from nalgebra's Kronecker product.
    fn kron_sum_oracle(x: &Matrix, d: usize) -> Matrix {
        let n = x.ncols();
        let eye = Matrix::identity(n, n);
        let mut acc: Option<Matrix> = None;
        for pos in 0..d {
            let mut term: Option<Matrix> = None;
            for k in 0..d {
                let f = if k == pos { x } else { &eye };
                term = Some(match term {
                    None => f.clone(),
                    Some(t) => t.kronecker(f),
                });
            }
            let term = term.unwrap();
            acc = Some(match acc {
                None => term,
                Some(a) => a + term,
            });
        }
        acc.unwrap()
    }

    #[test]
    fn kron_vec_identity_and_diagonal() {
        let i2 = Matrix::identity(2, 2);
        assert_eq!(
            kron_vec_apply(&i2, &i2, &[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0]
        );
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(
            kron_vec_apply(&d, &i2, &[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![1.0, 2.0, 6.0, 8.0]
        );
    }

    #[test]
    fn kron_vec_matches_assembled() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_mat(&mut rng, 3, 2);
        let y = rand_mat(&mut rng, 2, 4);
        let v = rand_vec(&mut rng, 8);
        let got = kron_vec_apply(&x, &y, &v).unwrap();
        let want = dense_apply(&x.kronecker(&y), &v);
        assert!(rel(&got, &want) < 1e-14);
        assert!(kron_vec_apply(&x, &y, &v[..7]).is_err());
    }

    #[test]
    fn place_apply_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_mat(&mut rng, 2, 2);
        let v = rand_vec(&mut rng, 2);
        let got = kron_place_apply(&x, 1, 1, &v).unwrap();
        assert!(rel(&got, &dense_apply(&x, &v)) < 1e-15);

        let c = Matrix::from_element(1, 1, 2.5);
        let v = rand_vec(&mut rng, 1);
        assert_eq!(kron_place_apply(&c, 1, 1, &v).unwrap(), vec![2.5 * v[0]]);

        let v = rand_vec(&mut rng, 8);
        let eye = Matrix::identity(2, 2);
        let want = dense_apply(&eye.kronecker(&x).kronecker(&eye), &v);
        assert!(rel(&kron_place_apply(&x, 2, 2, &v).unwrap(), &want) < 1e-14);
        assert!(kron_place_apply(&x, 2, 2, &v[..6]).is_err());
    }

    #[test]
    fn kron_sum_scalar_and_diagonal() {
        let a = Matrix::from_element(1, 1, -0.5);
        assert_eq!(
            kron_sum_apply(&a, 3, &[2.0]).unwrap(),
            vec![3.0 * -0.5 * 2.0]
        );
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        assert_eq!(
            kron_sum_apply(&a, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![-2.0, 0.0, 0.0, 0.0]
        );
        assert!(kron_sum_apply(&a, 0, &[1.0]).is_err());
    }

    #[test]
    fn kron_sum_rectangular_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let nt = rand_mat(&mut rng, 4, 2);
        let v = rand_vec(&mut rng, 4);
        let got = kron_sum_apply(&nt, 2, &v).unwrap();
        let eye = Matrix::identity(2, 2);
        let want = dense_apply(&(nt.kronecker(&eye) + eye.kronecker(&nt)), &v);
        assert_eq!(got.len(), 8);
        assert!(rel(&got, &want) < 1e-14);
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift(&[1.0, 0.0], 2), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(lift(&[1.0, 2.0], 2), vec![1.0, 2.0, 2.0, 4.0]);
        assert_eq!(
            lift(&[1.0, 2.0], 3),
            vec![1.0, 2.0, 2.0, 4.0, 2.0, 4.0, 4.0, 8.0]
        );
        assert_eq!(lift(&[3.0, -1.0], 1), vec![3.0, -1.0]);
    }

    #[test]
    fn eval_examples() {
        let v2 = CoeffVector::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let v3 = CoeffVector::new(2, 3, vec![0.3; 8]).unwrap();
        assert_eq!(eval_value(&[v2.clone(), v3], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(eval_value(std::slice::from_ref(&v2), &[3.0, 4.0]).unwrap(), 25.0);
        let s = CoeffVector::new(1, 2, vec![2.0]).unwrap();
        assert_eq!(eval_value(&[s], &[3.0]).unwrap(), 18.0);
        assert!(eval_value(&[v2], &[1.0]).is_err());

        let k1 = Matrix::from_element(1, 1, 2.0);
        let k2 = Matrix::from_element(1, 1, -3.0);
        assert_eq!(eval_feedback(std::slice::from_ref(&k1), &[0.5]).unwrap(), vec![1.0]);
        assert_eq!(eval_feedback(&[k1, k2], &[0.5]).unwrap(), vec![1.0 - 0.75]);
        let k = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            eval_feedback(std::slice::from_ref(&k), &[0.0, 0.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(eval_feedback(&[k], &[1.0, -1.0]).unwrap(), vec![-1.0, -1.0]);
    }

    #[test]
    fn unfold_sum_of_matrix() {
        let v = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let cv = CoeffVector::new(2, 2, v.as_slice().to_vec()).unwrap();
        assert_eq!(unfold_sum(&cv).unwrap(), &v + v.transpose());
        let s = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0]);
        let cs = CoeffVector::new(2, 2, s.as_slice().to_vec()).unwrap();
        assert_eq!(unfold_sum(&cs).unwrap(), s * 2.0);
    }

    #[test]
    fn gradient_identity_by_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (n, d) in [(2, 3), (3, 3), (2, 4)] {
            let v = CoeffVector::new(n, d, rand_vec(&mut rng, n.pow(d as u32))).unwrap();
            let s = unfold_sum(&v).unwrap();
            for _ in 0..20 {
                let x = rand_vec(&mut rng, n);
                let grad = s.clone() * nalgebra::DVector::from_vec(lift(&x, d - 1));
                let h = 1e-5;
                let fd: Vec<f64> = (0..n)
                    .map(|i| {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[i] += h;
                        xm[i] -= h;
                        let f = |z: &[f64]| eval_value(std::slice::from_ref(&v), z).unwrap();
                        (f(&xp) - f(&xm)) / (2.0 * h)
                    })
                    .collect();
                assert!(rel(grad.as_slice(), &fd) < 1e-6, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn symmetrize_examples() {
        let v = CoeffVector::new(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(symmetrize(&v).values(), &[0.0, 0.5, 0.5, 0.0]);
        let s = symmetrize(&v);
        assert_eq!(symmetrize(&s), s);
    }

    #[test]
    fn symmetrize_preserves_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let v = CoeffVector::new(2, 3, rand_vec(&mut rng, 8)).unwrap();
        let s = symmetrize(&v);
        for _ in 0..20 {
            let x = rand_vec(&mut rng, 2);
            let a = eval_value(std::slice::from_ref(&v), &x).unwrap();
            let b = eval_value(std::slice::from_ref(&s), &x).unwrap();
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn assembled_sums() {
        let x = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(kron_sum_matrix(&x, 1, DEFAULT_MEMORY_CAP).unwrap(), x);
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let l2 = kron_sum_matrix(&a, 2, DEFAULT_MEMORY_CAP).unwrap();
        let want =
            Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-2.0, -3.0, -3.0, -4.0]));
        assert_eq!(l2, want);

        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let x = rand_mat(&mut rng, 3, 3);
        let v = rand_vec(&mut rng, 9);
        let m = kron_sum_matrix(&x, 2, DEFAULT_MEMORY_CAP).unwrap();
        assert!(rel(&dense_apply(&m, &v), &kron_sum_apply(&x, 2, &v).unwrap()) < 1e-14);
        assert!(matches!(
            kron_sum_matrix(&x, 2, 100),
            Err(QqrError::SizeLimit { .. })
        ));
        let big = Matrix::identity(16, 16);
        assert!(matches!(
            kron_sum_matrix(&big, 4, DEFAULT_MEMORY_CAP),
            Err(QqrError::SizeLimit { .. })
        ));
    }

    #[test]
    fn kron_product_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = rand_mat(&mut rng, 2, 3);
        let b = rand_mat(&mut rng, 3, 2);
        let c = rand_mat(&mut rng, 1, 2);
        let got = kron_product(&[a.clone(), b.clone(), c.clone()], DEFAULT_MEMORY_CAP).unwrap();
        assert_eq!(got, a.kronecker(&b).kronecker(&c));
    }

    #[test]
    fn spectrum_of_assembled_sum_is_eigenvalue_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let x = rand_mat(&mut rng, 3, 3);
        let eig = x.complex_eigenvalues();
        let l = kron_sum_matrix(&x, 2, DEFAULT_MEMORY_CAP).unwrap();
        let got = l.complex_eigenvalues();
        for i in 0..3 {
            for j in 0..3 {
                let target = eig[i] + eig[j];
                let best = got
                    .iter()
                    .map(|z| (z - target).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(best < 1e-8);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kron_vec_apply_equals_assembled(seed in any::<u64>(), p in 1usize..6, q in 1usize..6, r in 1usize..6, s in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = rand_mat(&mut rng, p, q);
            let y = rand_mat(&mut rng, r, s);
            let v = rand_vec(&mut rng, q * s);
            let got = kron_vec_apply(&x, &y, &v).unwrap();
            let want = dense_apply(&x.kronecker(&y), &v);
            prop_assert!(rel(&got, &want) <= 1e-13);
        }

        #[test]
        fn kron_sum_apply_equals_assembled(seed in any::<u64>(), n in 1usize..5, d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = rand_mat(&mut rng, n, n);
            let v = rand_vec(&mut rng, n.pow(d as u32));
            let got = kron_sum_apply(&x, d, &v).unwrap();
            let want = dense_apply(&kron_sum_oracle(&x, d), &v);
            prop_assert!(rel(&got, &want) <= 1e-12);
        }

        #[test]
        fn lift_norm_is_power_of_norm(xs in proptest::collection::vec(-2.0f64..2.0, 1..5), d in 1usize..5) {
            let want = norm2(&xs).powi(d as i32);
            let got = norm2(&lift(&xs, d));
            prop_assert!((got - want).abs() <= 1e-13 * want.max(1e-300));
        }

        #[test]
        fn symmetrize_idempotent(seed in any::<u64>(), n in 1usize..4, d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = CoeffVector::new(n, d, rand_vec(&mut rng, n.pow(d as u32))).unwrap();
            let s = symmetrize(&v);
            let ss = symmetrize(&s);
            prop_assert!(rel(ss.values(), s.values()) <= 1e-15);
            let x = rand_vec(&mut rng, n);
            let a = eval_value(std::slice::from_ref(&v), &x).unwrap();
            let b = eval_value(std::slice::from_ref(&s), &x).unwrap();
            prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
        }
    }
}
