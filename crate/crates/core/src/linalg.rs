//! Small dense linear-algebra helpers shared by the numerical modules.
//!
//! Heavy lifting (dense LU, SVD, eigendecompositions) is delegated to `faer`;
//! tridiagonal operators get structure-aware paths from [`crate::tridiag`].

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{c64, Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tridiag::{Tridiagonal, TridiagonalLu};

pub type CMat = Mat<c64>;
pub type RMat = Mat<f64>;

/// Above this dimension, singular-value questions about low-rank matrices
/// are answered with a randomized range finder instead of a full SVD.
pub const DENSE_SVD_LIMIT: usize = 400;

pub fn cplx(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

/// `⟨u, v⟩`, conjugate-linear in the first argument.
pub fn dot(u: &[c64], v: &[c64]) -> c64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Scales `v` to unit norm. Returns the original norm.
pub fn normalize(v: &mut [c64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

pub fn frobenius(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

pub fn matvec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    let mut y = vec![c64::new(0.0, 0.0); a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == c64::new(0.0, 0.0) {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

pub fn column(a: MatRef<'_, c64>, j: usize) -> Vec<c64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn from_columns(cols: &[Vec<c64>], nrows: usize) -> CMat {
    Mat::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn to_complex(a: MatRef<'_, f64>) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

pub fn adjoint(a: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn is_finite(a: MatRef<'_, c64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

/// `‖A − A*‖_F ≤ tol·‖A‖_F`.
pub fn is_hermitian(a: MatRef<'_, c64>, tol: f64) -> bool {
    let n = a.nrows();
    let scale = frobenius(a).max(f64::MIN_POSITIVE);
    let mut defect = 0.0;
    for j in 0..n {
        for i in 0..=j {
            defect += (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
    }
    defect.sqrt() <= tol * scale
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: MatRef<'_, c64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    a.singular_values().expect("SVD did not converge")
}

pub fn spectral_norm(a: MatRef<'_, c64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn gaussian_matrix(nrows: usize, ncols: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(nrows, ncols, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c64::new(re, im)
    })
}

/// Modified Gram–Schmidt (two passes) on the columns of `y`. Columns that
/// become numerically dependent are dropped.
pub fn orthonormal_columns(y: &CMat) -> CMat {
    let n = y.nrows();
    let mut basis: Vec<Vec<c64>> = Vec::with_capacity(y.ncols());
    let scale = (0..y.ncols()).map(|j| norm2(&column(y.as_ref(), j))).fold(0.0, f64::max);
    for j in 0..y.ncols() {
        let mut v = column(y.as_ref(), j);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let nv = norm2(&v);
        if nv > 1e-13 * scale && nv > 0.0 {
            for vi in v.iter_mut() {
                *vi /= nv;
            }
            basis.push(v);
        }
    }
    from_columns(&basis, n)
}

/// Leading singular values of an operator known through `apply` and
/// `apply_adjoint`, via a randomized range finder. The sketch width grows
/// until the trailing captured singular value is negligible, so the result
/// is exact (to roundoff) for numerically low-rank operators.
pub fn sketched_singular_values(
    n: usize,
    rank_hint: usize,
    seed: u64,
    apply: &dyn Fn(MatRef<'_, c64>) -> CMat,
    apply_adjoint: &dyn Fn(MatRef<'_, c64>) -> CMat,
) -> Vec<f64> {
    let mut width = (rank_hint + 12).min(n);
    loop {
        let omega = gaussian_matrix(n, width, seed);
        let y = apply(omega.as_ref());
        let q = orthonormal_columns(&y);
        if q.ncols() == 0 {
            return vec![0.0];
        }
        // B = Q* A  (computed as (A* Q)*)
        let bt = apply_adjoint(q.as_ref());
        let b = adjoint(bt.as_ref());
        let s = singular_values(b.as_ref());
        let captured_all = q.ncols() < width
            || s.last().copied().unwrap_or(0.0) <= 1e-10 * s[0].max(f64::MIN_POSITIVE);
        if captured_all || width >= n {
            return s;
        }
        width = (2 * width).min(n);
    }
}

/// Singular values of `a`; exact for small matrices, sketched otherwise.
pub fn leading_singular_values(a: MatRef<'_, c64>, rank_hint: usize) -> Vec<f64> {
    let n = a.nrows();
    if n <= DENSE_SVD_LIMIT || a.ncols() != n {
        return singular_values(a);
    }
    let apply = |x: MatRef<'_, c64>| a * x;
    let apply_adj = |x: MatRef<'_, c64>| a.adjoint() * x;
    sketched_singular_values(n, rank_hint, 0x5eed, &apply, &apply_adj)
}

/// Factorization of `z·I − H`, tridiagonal when `H` is.
pub enum ShiftedSolver {
    Dense(PartialPivLu<c64>),
    Tridiagonal { lu: TridiagonalLu, adjoint: TridiagonalLu },
}

impl ShiftedSolver {
    pub fn new(h: MatRef<'_, c64>, tri: Option<&Tridiagonal>, z: c64) -> Self {
        match tri {
            Some(t) => ShiftedSolver::Tridiagonal { lu: t.shifted_lu(z), adjoint: t.adjoint().shifted_lu(z.conj()) },
            None => {
                let n = h.nrows();
                let a = Mat::from_fn(n, n, |i, j| if i == j { z - h[(i, j)] } else { -h[(i, j)] });
                ShiftedSolver::Dense(a.partial_piv_lu())
            }
        }
    }

    pub fn solve_vec(&self, b: &[c64]) -> Vec<c64> {
        match self {
            ShiftedSolver::Tridiagonal { lu, .. } => {
                let mut x = b.to_vec();
                lu.solve_in_place(&mut x);
                x
            }
            ShiftedSolver::Dense(lu) => {
                let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
                let x = lu.solve(&rhs);
                column(x.as_ref(), 0)
            }
        }
    }

    pub fn solve_mat(&self, b: MatRef<'_, c64>) -> CMat {
        match self {
            ShiftedSolver::Tridiagonal { lu, .. } => {
                let mut x = b.to_owned();
                for j in 0..x.ncols() {
                    lu.solve_in_place(x.col_as_slice_mut(j));
                }
                x
            }
            ShiftedSolver::Dense(lu) => lu.solve(b),
        }
    }

    /// Solves `(z·I − H)* X = B`.
    pub fn solve_adjoint_mat(&self, b: MatRef<'_, c64>) -> CMat {
        match self {
            ShiftedSolver::Tridiagonal { adjoint, .. } => {
                let mut x = b.to_owned();
                for j in 0..x.ncols() {
                    adjoint.solve_in_place(x.col_as_slice_mut(j));
                }
                x
            }
            ShiftedSolver::Dense(lu) => lu.solve_adjoint(b),
        }
    }

    /// Whether a pivot had to be perturbed (the shift is an eigenvalue to
    /// working precision). Only tracked for tridiagonal factorizations.
    pub fn is_singular(&self) -> bool {
        match self {
            ShiftedSolver::Tridiagonal { lu, .. } => lu.singular,
            ShiftedSolver::Dense(_) => false,
        }
    }

    /// `(z·I − H)⁻¹` as a dense matrix.
    pub fn inverse(&self, n: usize) -> CMat {
        self.solve_mat(identity(n).as_ref())
    }
}

/// Smallest singular value of `z·I − H`.
pub fn shifted_min_singular_value(h: MatRef<'_, c64>, z: c64) -> f64 {
    let n = h.nrows();
    let a = Mat::from_fn(n, n, |i, j| if i == j { z - h[(i, j)] } else { -h[(i, j)] });
    singular_values(a.as_ref()).last().copied().unwrap_or(0.0)
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian matrix.
pub fn hermitian_max_eigenpair(k: MatRef<'_, c64>, tri: Option<&Tridiagonal>) -> (f64, Vec<c64>) {
    if let Some(t) = tri {
        return crate::tridiag::hermitian_extreme_eigenpair(t, true);
    }
    let n = k.nrows();
    let evd = k
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("Hermitian eigensolver did not converge");
    let s = evd.S().column_vector();
    let u = evd.U();
    (s[n - 1].re, column(u, n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sketch_matches_dense_svd_for_low_rank() {
        let n = 60;
        let a = gaussian_matrix(n, 3, 1);
        let b = gaussian_matrix(3, n, 2);
        let m = &a * &b;
        let exact = singular_values(m.as_ref());
        let apply = |x: MatRef<'_, c64>| &m * x;
        let apply_adj = |x: MatRef<'_, c64>| m.adjoint() * x;
        let sk = sketched_singular_values(n, 1, 7, &apply, &apply_adj);
        for k in 0..3 {
            assert!((exact[k] - sk[k]).abs() <= 1e-10 * exact[0]);
        }
    }

    #[test]
    fn dense_and_tridiagonal_shifted_solves_agree() {
        let t = Tridiagonal {
            sub: vec![cplx(1.0, 0.5), cplx(-2.0, 0.0)],
            diag: vec![cplx(4.0, 0.0), cplx(0.0, 1.0), cplx(3.0, -1.0)],
            sup: vec![cplx(0.3, 0.0), cplx(1.0, 1.0)],
        };
        let h = t.to_dense();
        let z = cplx(0.7, 0.2);
        let b = vec![cplx(1.0, 0.0), cplx(0.0, 2.0), cplx(-1.0, 1.0)];
        let x1 = ShiftedSolver::new(h.as_ref(), None, z).solve_vec(&b);
        let x2 = ShiftedSolver::new(h.as_ref(), Some(&t), z).solve_vec(&b);
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
