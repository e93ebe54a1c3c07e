//! Tridiagonal operators: detection, pivoted LU, and Hermitian eigenpairs by
//! Sturm bisection plus inverse iteration.
//!
//! Finite-difference Hamiltonians are tridiagonal, and at grid sizes in the
//! low thousands the dense paths are too slow for contour quadrature, so
//! everything that only needs solves or Hermitian eigenpairs goes through
//! here when the structure is present.

use faer::{c64, Mat};

use crate::linalg::{dot, normalize, CMat};

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// `sub[i] = A[i+1, i]`, `diag[i] = A[i, i]`, `sup[i] = A[i, i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<c64>,
    pub diag: Vec<c64>,
    pub sup: Vec<c64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Returns the tridiagonal part of `a` if every other entry is exactly zero.
    pub fn detect(a: faer::MatRef<'_, c64>) -> Option<Self> {
        let n = a.nrows();
        if n != a.ncols() || n < 3 {
            return None;
        }
        for j in 0..n {
            for i in 0..n {
                if (i + 1 < j || j + 1 < i) && a[(i, j)] != ZERO {
                    return None;
                }
            }
        }
        Some(Tridiagonal {
            sub: (0..n - 1).map(|i| a[(i + 1, i)]).collect(),
            diag: (0..n).map(|i| a[(i, i)]).collect(),
            sup: (0..n - 1).map(|i| a[(i, i + 1)]).collect(),
        })
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.len();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i + 1, i)] = self.sub[i];
                m[(i, i + 1)] = self.sup[i];
            }
        }
        m
    }

    pub fn matvec(&self, x: &[c64]) -> Vec<c64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.sup[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    pub fn adjoint(&self) -> Tridiagonal {
        Tridiagonal {
            sub: self.sup.iter().map(|z| z.conj()).collect(),
            diag: self.diag.iter().map(|z| z.conj()).collect(),
            sup: self.sub.iter().map(|z| z.conj()).collect(),
        }
    }

    /// `(e^{iθ}A + e^{−iθ}A*)/2`, which is Hermitian tridiagonal.
    pub fn rotated_hermitian_part(&self, theta: f64) -> Tridiagonal {
        let w = c64::from_polar(1.0, theta);
        let n = self.len();
        let sub: Vec<c64> = (0..n.saturating_sub(1))
            .map(|i| (w * self.sub[i] + (w * self.sup[i]).conj()) * 0.5)
            .collect();
        Tridiagonal {
            sup: sub.iter().map(|z| z.conj()).collect(),
            diag: self.diag.iter().map(|d| c64::new((w * d).re, 0.0)).collect(),
            sub,
        }
    }

    /// Principal submatrix on the sorted index set `idx`; couplings between
    /// non-adjacent retained indices are dropped (they are zero in `A`).
    pub fn principal(&self, idx: &[usize]) -> Tridiagonal {
        let m = idx.len();
        let mut sub = Vec::with_capacity(m.saturating_sub(1));
        let mut sup = Vec::with_capacity(m.saturating_sub(1));
        for k in 0..m.saturating_sub(1) {
            if idx[k + 1] == idx[k] + 1 {
                sub.push(self.sub[idx[k]]);
                sup.push(self.sup[idx[k]]);
            } else {
                sub.push(ZERO);
                sup.push(ZERO);
            }
        }
        Tridiagonal { sub, diag: idx.iter().map(|&i| self.diag[i]).collect(), sup }
    }

    pub fn is_hermitian(&self) -> bool {
        self.diag.iter().all(|d| d.im == 0.0)
            && self.sub.iter().zip(&self.sup).all(|(l, u)| *l == u.conj())
    }

    fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.sub)
            .chain(&self.sup)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// LU factorization (partial pivoting) of `z·I − A`.
    pub fn shifted_lu(&self, z: c64) -> TridiagonalLu {
        let n = self.len();
        let mut dl: Vec<c64> = self.sub.iter().map(|v| -v).collect();
        let mut d: Vec<c64> = self.diag.iter().map(|v| z - v).collect();
        let mut du: Vec<c64> = self.sup.iter().map(|v| -v).collect();
        let mut du2 = vec![ZERO; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i] != ZERO {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        // exact zero pivots are nudged so inverse iteration can proceed
        let tiny = f64::EPSILON * (self.max_abs() + z.norm()).max(f64::MIN_POSITIVE);
        let mut singular = false;
        for di in d.iter_mut() {
            if *di == ZERO {
                *di = c64::new(tiny, 0.0);
                singular = true;
            }
        }
        TridiagonalLu { dl, d, du, du2, swapped, singular }
    }
}

/// Pivoted LU of a tridiagonal matrix in LAPACK `gttrf` layout.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    dl: Vec<c64>,
    d: Vec<c64>,
    du: Vec<c64>,
    du2: Vec<c64>,
    swapped: Vec<bool>,
    pub singular: bool,
}

impl TridiagonalLu {
    pub fn solve_in_place(&self, b: &mut [c64]) {
        let n = self.d.len();
        if n == 0 {
            return;
        }
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                let t = b[i];
                b[i + 1] -= self.dl[i] * t;
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// A Hermitian tridiagonal matrix unitarily reduced to real symmetric form:
/// `A = D T D*` with `D` diagonal unitary.
struct RealSymmetric {
    a: Vec<f64>,
    b: Vec<f64>,
    phases: Vec<c64>,
    pivmin: f64,
}

impl RealSymmetric {
    fn from_hermitian(t: &Tridiagonal) -> Self {
        let n = t.len();
        let mut phases = vec![c64::new(1.0, 0.0); n];
        let mut b = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n.saturating_sub(1) {
            let c = t.sup[i];
            let m = c.norm();
            b.push(m);
            phases[i + 1] = if m > 0.0 { phases[i] * c.conj() / m } else { phases[i] };
        }
        let bmax = b.iter().fold(0.0f64, |acc, v| acc.max(v * v));
        RealSymmetric {
            a: t.diag.iter().map(|z| z.re).collect(),
            b,
            phases,
            pivmin: f64::MIN_POSITIVE.max(bmax * f64::MIN_POSITIVE),
        }
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.a.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.b[i - 1] } else { 0.0 } + if i + 1 < n { self.b[i] } else { 0.0 };
            lo = lo.min(self.a[i] - r);
            hi = hi.max(self.a[i] + r);
        }
        let pad = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + self.pivmin;
        (lo - pad, hi + pad)
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.a[0] - x;
        if q.abs() < self.pivmin {
            q = -self.pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.a.len() {
            q = self.a[i] - x - self.b[i - 1] * self.b[i - 1] / q;
            if q.abs() < self.pivmin {
                q = -self.pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection inside `[lo, hi]`.
    fn kth(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let tol = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + self.pivmin;
            if hi - lo <= tol || mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn eigenvalues(&self) -> Vec<f64> {
        let n = self.a.len();
        let (lo, hi) = self.gershgorin();
        let mut out = Vec::with_capacity(n);
        let mut lower = lo;
        for k in 0..n {
            let v = self.kth(k, lower, hi);
            out.push(v);
            // eigenvalue k+1 is ≥ eigenvalue k; keep a little slack for ties
            lower = v - 4.0 * f64::EPSILON * v.abs().max(1.0) - self.pivmin;
            lower = lower.max(lo);
        }
        out
    }

    fn as_complex_tridiagonal(&self) -> Tridiagonal {
        Tridiagonal {
            sub: self.b.iter().map(|&v| c64::new(v, 0.0)).collect(),
            diag: self.a.iter().map(|&v| c64::new(v, 0.0)).collect(),
            sup: self.b.iter().map(|&v| c64::new(v, 0.0)).collect(),
        }
    }

    /// Inverse iteration for the eigenvector of `lambda`, orthogonalized
    /// against `cluster` (vectors of numerically coincident eigenvalues).
    fn eigenvector(&self, t: &Tridiagonal, lambda: f64, cluster: &[Vec<c64>], seed: usize) -> Vec<c64> {
        let n = self.a.len();
        let lu = t.shifted_lu(c64::new(lambda, 0.0));
        let mut v: Vec<c64> = (0..n)
            .map(|i| {
                let s = ((i * 7919 + seed * 104_729) % 1009) as f64 / 1009.0;
                c64::new(0.5 + s, 0.0)
            })
            .collect();
        normalize(&mut v);
        for _ in 0..4 {
            for q in cluster {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
            lu.solve_in_place(&mut v);
            if normalize(&mut v) == 0.0 || !v.iter().all(|z| z.re.is_finite()) {
                v = vec![ZERO; n];
                v[seed % n] = c64::new(1.0, 0.0);
            }
        }
        for q in cluster {
            let c = dot(q, &v);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
        normalize(&mut v);
        v
    }
}

/// All eigenvalues (ascending) of a Hermitian tridiagonal matrix and,
/// optionally, unit eigenvectors as the columns of a dense matrix.
pub fn hermitian_eigen(t: &Tridiagonal, vectors: bool) -> (Vec<f64>, Option<CMat>) {
    let n = t.len();
    if n == 0 {
        return (Vec::new(), vectors.then(|| Mat::zeros(0, 0)));
    }
    let rs = RealSymmetric::from_hermitian(t);
    let values = rs.eigenvalues();
    if !vectors {
        return (values, None);
    }
    let real_t = rs.as_complex_tridiagonal();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let cluster_tol = 1e-8 * scale;
    let mut vecs: Vec<Vec<c64>> = Vec::with_capacity(n);
    let mut cluster_start = 0;
    for k in 0..n {
        if k > 0 && values[k] - values[k - 1] > cluster_tol {
            cluster_start = k;
        }
        let v = rs.eigenvector(&real_t, values[k], &vecs[cluster_start..k], k);
        vecs.push(v);
    }
    let mut m = Mat::zeros(n, n);
    for (j, y) in vecs.iter().enumerate() {
        for i in 0..n {
            m[(i, j)] = rs.phases[i] * y[i];
        }
    }
    (values, Some(m))
}

/// Largest (or smallest) eigenvalue and a unit eigenvector.
pub fn hermitian_extreme_eigenpair(t: &Tridiagonal, largest: bool) -> (f64, Vec<c64>) {
    let n = t.len();
    let rs = RealSymmetric::from_hermitian(t);
    let (lo, hi) = rs.gershgorin();
    let k = if largest { n - 1 } else { 0 };
    let lambda = rs.kth(k, lo, hi);
    let y = rs.eigenvector(&rs.as_complex_tridiagonal(), lambda, &[], k);
    let v: Vec<c64> = y.iter().zip(&rs.phases).map(|(a, p)| p * a).collect();
    (lambda, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cplx, gaussian_matrix, matvec, norm2};

    fn random_hermitian(n: usize, seed: u64) -> Tridiagonal {
        let g = gaussian_matrix(n, 3, seed);
        let sub: Vec<c64> = (0..n - 1).map(|i| g[(i, 1)]).collect();
        Tridiagonal {
            sup: sub.iter().map(|z| z.conj()).collect(),
            diag: (0..n).map(|i| c64::new(g[(i, 0)].re * 3.0, 0.0)).collect(),
            sub,
        }
    }

    #[test]
    fn eigenvalues_match_dense_hermitian_solver() {
        let t = random_hermitian(40, 3);
        let dense = t.to_dense();
        let reference = dense.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let (values, vecs) = hermitian_eigen(&t, true);
        let vecs = vecs.unwrap();
        for (a, b) in values.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        for k in 0..40 {
            let v = crate::linalg::column(vecs.as_ref(), k);
            let hv = matvec(dense.as_ref(), &v);
            let r: Vec<c64> = hv.iter().zip(&v).map(|(a, b)| a - b * values[k]).collect();
            assert!(norm2(&r) < 1e-10, "residual {}", norm2(&r));
        }
    }

    #[test]
    fn solve_matches_dense() {
        let t = Tridiagonal {
            sub: vec![cplx(1e-3, 0.0); 5],
            diag: (0..6).map(|i| cplx(i as f64, 1.0)).collect(),
            sup: vec![cplx(2.0, -1.0); 5],
        };
        let z = cplx(2.5, 0.3);
        let lu = t.shifted_lu(z);
        let b: Vec<c64> = (0..6).map(|i| cplx(1.0, i as f64)).collect();
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        let ax = t.matvec(&x);
        for i in 0..6 {
            let r = z * x[i] - ax[i] - b[i];
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn detect_rejects_dense() {
        let m = gaussian_matrix(4, 4, 1);
        assert!(Tridiagonal::detect(m.as_ref()).is_none());
        let t = random_hermitian(5, 2);
        assert_eq!(Tridiagonal::detect(t.to_dense().as_ref()), Some(t));
    }

    #[test]
    fn extreme_pair_is_largest() {
        let t = random_hermitian(30, 9);
        let (values, _) = hermitian_eigen(&t, false);
        let (lmax, v) = hermitian_extreme_eigenpair(&t, true);
        assert!((lmax - values[29]).abs() < 1e-12);
        let hv = t.matvec(&v);
        let r: Vec<c64> = hv.iter().zip(&v).map(|(a, b)| a - b * lmax).collect();
        assert!(norm2(&r) < 1e-10);
    }
}
