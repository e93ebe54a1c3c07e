//! Dense eigendecomposition with multiplicity, parity and reality
//! classification.
//!
//! Dispatch: 2×2 matrices use the closed form (exact at Jordan points),
//! Hermitian tridiagonal matrices use Sturm bisection, other Hermitian
//! matrices the dense self-adjoint solver, and everything else the general
//! complex Schur-based solver.

use faer::{c64, Mat, MatRef};
use serde::Serialize;
use thiserror::Error;

use crate::discretize::{DiscretizedOperator, Parity};
use crate::linalg::{self, column, dot, matvec, normalize, norm2, ShiftedSolver};
use crate::tridiag::{hermitian_eigen, Tridiagonal};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is empty or not square")]
    BadShape,
    #[error("eigenvalue iteration did not converge ({0})")]
    NoConvergence(String),
    #[error("contour of radius {radius} around {center} is not separated from the spectrum: {detail}")]
    ContourNotSeparated { center: c64, radius: f64, detail: String },
    #[error("m_g = {m_g} exceeds m_a = {m_a}: rank threshold inconsistent with the contour")]
    MultiplicityOrder { m_g: usize, m_a: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: c64,
    pub right_vector: Vec<c64>,
    pub left_vector: Option<Vec<c64>>,
    /// `‖Hv − λv‖` for the unit right vector.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Sorted by (Re, Im) with tolerance bucketing on Re.
    pub pairs: Vec<EigenPair>,
    pub matrix_norm: f64,
    pub error_scale: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn values(&self) -> Vec<c64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.pairs.iter().map(|p| p.residual).fold(0.0, f64::max)
    }
}

fn check(h: MatRef<'_, c64>) -> Result<(), EigenError> {
    if h.nrows() == 0 || h.nrows() != h.ncols() {
        return Err(EigenError::BadShape);
    }
    if !linalg::is_finite(h) {
        return Err(EigenError::NonFinite);
    }
    Ok(())
}

fn exactly_hermitian(h: MatRef<'_, c64>) -> bool {
    let n = h.nrows();
    (0..n).all(|j| (0..=j).all(|i| h[(i, j)] == h[(j, i)].conj()))
}

/// Permutation sorting `values` by Re, then by Im inside groups whose real
/// parts agree within `1e-9·scale`.
pub fn sort_order(values: &[c64]) -> Vec<usize> {
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re).then(values[a].im.total_cmp(&values[b].im)));
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]].re - values[idx[start]].re <= tol {
            end += 1;
        }
        idx[start..end].sort_by(|&a, &b| values[a].im.total_cmp(&values[b].im).then(a.cmp(&b)));
        start = end;
    }
    idx
}

pub fn sorted(values: &[c64]) -> Vec<c64> {
    sort_order(values).into_iter().map(|i| values[i]).collect()
}

fn closed_form_2x2(h: MatRef<'_, c64>) -> [(c64, Vec<c64>); 2] {
    let (a, b, c, d) = (h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
    let m = (a + d) * 0.5;
    let half = (a - d) * 0.5;
    let s = (half * half + b * c).sqrt();
    let zero = c64::new(0.0, 0.0);
    let one = c64::new(1.0, 0.0);
    let vec_for = |lam: c64, fallback: usize| -> Vec<c64> {
        let mut v = if b != zero && b.norm() >= c.norm() {
            vec![b, lam - a]
        } else if c != zero {
            vec![lam - d, c]
        } else if fallback == 0 {
            vec![one, zero]
        } else {
            vec![zero, one]
        };
        if norm2(&v) == 0.0 {
            v = if fallback == 0 { vec![one, zero] } else { vec![zero, one] };
        }
        normalize(&mut v);
        v
    };
    if b == zero && c == zero {
        return [(a, vec_for(a, 0)), (d, vec_for(d, 1))];
    }
    let l1 = m + s;
    let l2 = m - s;
    [(l1, vec_for(l1, 0)), (l2, vec_for(l2, 1))]
}

/// Unsorted eigenvalues and unit right eigenvectors.
fn raw_eigen(h: MatRef<'_, c64>, tri: Option<&Tridiagonal>) -> Result<Vec<(c64, Vec<c64>)>, EigenError> {
    let n = h.nrows();
    if n == 1 {
        return Ok(vec![(h[(0, 0)], vec![c64::new(1.0, 0.0)])]);
    }
    if n == 2 {
        return Ok(closed_form_2x2(h).into_iter().collect());
    }
    if let Some(t) = tri.filter(|t| t.is_hermitian()) {
        let (vals, vecs) = hermitian_eigen(t, true);
        let vecs = vecs.expect("vectors requested");
        return Ok(vals.iter().enumerate().map(|(k, &v)| (c64::new(v, 0.0), column(vecs.as_ref(), k))).collect());
    }
    if exactly_hermitian(h) {
        let evd = h
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| EigenError::NoConvergence(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        return Ok((0..n).map(|k| (c64::new(s[k].re, 0.0), column(evd.U(), k))).collect());
    }
    let evd = h.eigen().map_err(|e| EigenError::NoConvergence(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    Ok((0..n)
        .map(|k| {
            let mut v = column(evd.U(), k);
            normalize(&mut v);
            (s[k], v)
        })
        .collect())
}

fn residuals(h: MatRef<'_, c64>, tri: Option<&Tridiagonal>, pairs: &[(c64, Vec<c64>)]) -> Vec<f64> {
    let n = h.nrows();
    if let Some(t) = tri {
        return pairs
            .iter()
            .map(|(lam, v)| {
                let hv = t.matvec(v);
                hv.iter().zip(v).map(|(a, b)| (a - lam * b).norm_sqr()).sum::<f64>().sqrt()
            })
            .collect();
    }
    let vm = Mat::from_fn(n, pairs.len(), |i, j| pairs[j].1[i]);
    let hv = h * &vm;
    (0..pairs.len())
        .map(|j| (0..n).map(|i| (hv[(i, j)] - pairs[j].0 * vm[(i, j)]).norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// Full eigendecomposition of an explicit matrix.
pub fn eig_matrix(h: MatRef<'_, c64>) -> Result<Spectrum, EigenError> {
    check(h)?;
    let tri = Tridiagonal::detect(h);
    eig_impl(h, tri.as_ref(), 0.0)
}

pub fn eig(op: &DiscretizedOperator) -> Result<Spectrum, EigenError> {
    check(op.matrix.as_ref())?;
    eig_impl(op.matrix.as_ref(), op.tridiagonal.as_ref(), op.error_scale)
}

fn eig_impl(h: MatRef<'_, c64>, tri: Option<&Tridiagonal>, error_scale: f64) -> Result<Spectrum, EigenError> {
    let raw = raw_eigen(h, tri)?;
    let res = residuals(h, tri, &raw);
    let values: Vec<c64> = raw.iter().map(|p| p.0).collect();
    let mut raw: Vec<Option<(c64, Vec<c64>)>> = raw.into_iter().map(Some).collect();
    let pairs = sort_order(&values)
        .into_iter()
        .map(|i| {
            let (value, right_vector) = raw[i].take().expect("permutation");
            EigenPair { value, right_vector, left_vector: None, residual: res[i] }
        })
        .collect();
    Ok(Spectrum { pairs, matrix_norm: h.norm_l2(), error_scale })
}

/// Sorted eigenvalues without vectors.
pub fn eigenvalues_matrix(h: MatRef<'_, c64>, tri: Option<&Tridiagonal>) -> Result<Vec<c64>, EigenError> {
    check(h)?;
    let n = h.nrows();
    let values: Vec<c64> = if n <= 2 {
        raw_eigen(h, None)?.into_iter().map(|p| p.0).collect()
    } else if let Some(t) = tri.filter(|t| t.is_hermitian()) {
        hermitian_eigen(t, false).0.into_iter().map(|v| c64::new(v, 0.0)).collect()
    } else if exactly_hermitian(h) {
        h.self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| EigenError::NoConvergence(format!("{e:?}")))?
            .into_iter()
            .map(|v| c64::new(v, 0.0))
            .collect()
    } else {
        h.eigenvalues().map_err(|e| EigenError::NoConvergence(format!("{e:?}")))?
    };
    Ok(sorted(&values))
}

pub fn eigenvalues(op: &DiscretizedOperator) -> Result<Vec<c64>, EigenError> {
    eigenvalues_matrix(op.matrix.as_ref(), op.tridiagonal.as_ref())
}

/// Unit left eigenvector `u` (`H*u = conj(λ)u`) by shifted inverse iteration
/// on the adjoint, started from `conj(v)` (exact for complex-symmetric `H`).
pub fn left_eigenvector(h: MatRef<'_, c64>, tri: Option<&Tridiagonal>, lambda: c64, right: &[c64]) -> Vec<c64> {
    let n = h.nrows();
    let norm = h.norm_l2().max(1.0);
    let shift = lambda.conj() + c64::new(1e-12 * norm, 1e-12 * norm);
    let adj_tri = tri.map(|t| t.adjoint());
    let adj = linalg::adjoint(h);
    let solver = ShiftedSolver::new(adj.as_ref(), adj_tri.as_ref(), shift);
    let mut u: Vec<c64> = right.iter().map(|z| z.conj()).collect();
    if norm2(&u) == 0.0 {
        u = vec![c64::new(1.0, 0.0); n];
    }
    normalize(&mut u);
    for _ in 0..3 {
        let mut next = solver.solve_vec(&u);
        if !next.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            break;
        }
        normalize(&mut next);
        // Fix the phase so iterates are comparable.
        let phase = dot(&u, &next);
        if phase.norm() > 0.0 {
            let rot = phase.conj() / phase.norm();
            for z in next.iter_mut() {
                *z *= rot;
            }
        }
        u = next;
    }
    u
}

/// Attaches left eigenvectors to the selected pairs.
pub fn attach_left_vectors(spectrum: &mut Spectrum, h: MatRef<'_, c64>, tri: Option<&Tridiagonal>, indices: &[usize]) {
    for &k in indices {
        let p = &spectrum.pairs[k];
        let u = left_eigenvector(h, tri, p.value, &p.right_vector);
        spectrum.pairs[k].left_vector = Some(u);
    }
}

/// `‖H*u − conj(λ)u‖`.
pub fn left_residual(h: MatRef<'_, c64>, lambda: c64, u: &[c64]) -> f64 {
    let adj = linalg::adjoint(h);
    let y = matvec(adj.as_ref(), u);
    y.iter().zip(u).map(|(a, b)| (a - lambda.conj() * b).norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Multiplicities {
    pub m_g: usize,
    pub m_a: usize,
    /// Some normalized singular value of `H − λ` lies within a decade of the threshold.
    pub ambiguous: bool,
    pub rank_tol: f64,
    /// Singular values of `H − λ` divided by the largest.
    pub relative_singular_values: Vec<f64>,
}

/// Geometric multiplicity from the null space of `H − λ`; algebraic
/// multiplicity from the rank of the contour projection of radius `contour_radius`.
pub fn multiplicities(
    h: MatRef<'_, c64>,
    lambda: c64,
    rank_tol: f64,
    contour_radius: f64,
) -> Result<Multiplicities, EigenError> {
    check(h)?;
    let n = h.nrows();
    let shifted = Mat::from_fn(n, n, |i, j| if i == j { h[(i, j)] - lambda } else { h[(i, j)] });
    let sv = linalg::singular_values(shifted.as_ref());
    let smax = sv[0];
    let rel: Vec<f64> = if smax > 0.0 { sv.iter().map(|s| s / smax).collect() } else { vec![0.0; n] };
    let m_g = rel.iter().filter(|&&s| s <= rank_tol).count();
    let ambiguous = rel.iter().any(|&s| s > rank_tol / 10.0 && s < rank_tol * 10.0);
    let contour = crate::stability::Contour::new(lambda, contour_radius, 64).map_err(|e| {
        EigenError::ContourNotSeparated { center: lambda, radius: contour_radius, detail: e.to_string() }
    })?;
    let proj = crate::stability::spectral_projection(h, &contour).map_err(|e| EigenError::ContourNotSeparated {
        center: lambda,
        radius: contour_radius,
        detail: e.to_string(),
    })?;
    let m_a = proj.rank;
    if m_g > m_a {
        return Err(EigenError::MultiplicityOrder { m_g, m_a });
    }
    Ok(Multiplicities { m_g, m_a, ambiguous, rank_tol, relative_singular_values: rel })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityKind {
    Even,
    Odd,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParityClass {
    pub class: ParityKind,
    /// `Re⟨v, Pv⟩/‖v‖²`.
    pub score: f64,
}

pub fn parity_classify(v: &[c64], p: &Parity, tol: f64) -> ParityClass {
    let nv = dot(v, v).re;
    let score = if nv > 0.0 { dot(v, &p.apply(v)).re / nv } else { 0.0 };
    let class = if score > 1.0 - tol {
        ParityKind::Even
    } else if score < -(1.0 - tol) {
        ParityKind::Odd
    } else {
        ParityKind::Mixed
    };
    ParityClass { class, score }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reality {
    Real,
    ConjugatePair,
    Undecided,
}

impl Reality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reality::Real => "real",
            Reality::ConjugatePair => "conjugate_pair",
            Reality::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealityReport {
    pub verdicts: Vec<Reality>,
    /// Index of the conjugate partner, for `ConjugatePair` entries.
    pub partner: Vec<Option<usize>>,
    pub tolerance: f64,
}

impl RealityReport {
    pub fn all_real(&self) -> bool {
        self.verdicts.iter().all(|v| *v == Reality::Real)
    }

    pub fn pair_count(&self) -> usize {
        self.verdicts.iter().filter(|v| **v == Reality::ConjugatePair).count() / 2
    }
}

/// Real if `|Im λ| ≤ err`; otherwise paired with the nearest unmatched
/// `μ` satisfying `|μ − conj(λ)| ≤ err`; otherwise undecided.
pub fn reality_verdict_values(values: &[c64], err: f64) -> RealityReport {
    let n = values.len();
    let mut verdicts = vec![Reality::Undecided; n];
    let mut partner = vec![None; n];
    for i in 0..n {
        if values[i].im.abs() <= err {
            verdicts[i] = Reality::Real;
        }
    }
    for i in 0..n {
        if verdicts[i] != Reality::Undecided {
            continue;
        }
        let target = values[i].conj();
        let best = (0..n)
            .filter(|&j| j != i && verdicts[j] == Reality::Undecided)
            .map(|j| (j, (values[j] - target).norm()))
            .filter(|&(_, d)| d <= err)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((j, _)) = best {
            verdicts[i] = Reality::ConjugatePair;
            verdicts[j] = Reality::ConjugatePair;
            partner[i] = Some(j);
            partner[j] = Some(i);
        }
    }
    RealityReport { verdicts, partner, tolerance: err }
}

pub fn reality_verdict(spectrum: &Spectrum, err: f64) -> RealityReport {
    reality_verdict_values(&spectrum.values(), err.max(spectrum.error_scale))
}

/// `max_λ min_μ |conj(λ) − μ|` over the multiset: 0 for exactly
/// conjugation-closed spectra.
pub fn conjugate_closure_defect(values: &[c64]) -> f64 {
    let mut used = vec![false; values.len()];
    let mut worst = 0.0f64;
    for (i, v) in values.iter().enumerate() {
        let target = v.conj();
        let best = (0..values.len())
            .filter(|&j| !used[j] || j == i)
            .map(|j| (j, (values[j] - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((j, d)) = best {
            used[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cplx;
    use crate::potentials::catalog;

    #[test]
    fn jordan_eigenvalues_match_closed_form() {
        let j = catalog("jordan2x2").unwrap();
        let m = j.matrix_family().unwrap();
        for eps in [0.25, 0.5, 1.0] {
            let s = eig_matrix(m.matrix_at(eps).as_ref()).unwrap();
            let r = (eps * (eps + 2.0)).sqrt();
            assert!((s.pairs[0].value - cplx(0.0, -r)).norm() < 1e-12);
            assert!((s.pairs[1].value - cplx(0.0, r)).norm() < 1e-12);
        }
        let s = eig_matrix(m.h0.as_ref()).unwrap();
        assert_eq!(s.values(), vec![cplx(0.0, 0.0); 2]);
    }

    #[test]
    fn diagonal_matrix() {
        let d = Mat::from_fn(3, 3, |i, j| if i == j { cplx([3.0, 1.0, 2.0][i], 0.0) } else { cplx(0.0, 0.0) });
        let s = eig_matrix(d.as_ref()).unwrap();
        for (v, e) in s.values().iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - cplx(e, 0.0)).norm() < 1e-14);
        }
        for (k, idx) in [1usize, 2, 0].iter().enumerate() {
            assert!((s.pairs[k].right_vector[*idx].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn multiplicity_examples() {
        let j = catalog("jordan2x2").unwrap();
        let m = multiplicities(j.matrix_family().unwrap().h0.as_ref(), cplx(0.0, 0.0), DEFAULT_RANK_TOL, 0.5).unwrap();
        assert_eq!((m.m_g, m.m_a), (1, 2));
        let id = linalg::identity(2);
        let m = multiplicities(id.as_ref(), cplx(1.0, 0.0), DEFAULT_RANK_TOL, 0.5).unwrap();
        assert_eq!((m.m_g, m.m_a), (2, 2));
        let d = Mat::from_fn(2, 2, |i, j| if i == j { cplx(2.0 * i as f64, 0.0) } else { cplx(0.0, 0.0) });
        let m = multiplicities(d.as_ref(), cplx(0.0, 0.0), DEFAULT_RANK_TOL, 0.5).unwrap();
        assert_eq!((m.m_g, m.m_a), (1, 1));
        assert!(multiplicities(d.as_ref(), cplx(0.0, 0.0), DEFAULT_RANK_TOL, 2.0).is_err());
    }

    #[test]
    fn parity_examples() {
        let p = Parity::Alternating(2);
        let e = parity_classify(&[cplx(1.0, 0.0), cplx(0.0, 0.0)], &p, 1e-8);
        assert_eq!((e.class, e.score), (ParityKind::Even, 1.0));
        let o = parity_classify(&[cplx(0.0, 0.0), cplx(1.0, 0.0)], &p, 1e-8);
        assert_eq!((o.class, o.score), (ParityKind::Odd, -1.0));
        let m = parity_classify(&[cplx(1.0, 0.0), cplx(1.0, 0.0)], &p, 1e-8);
        assert_eq!(m.class, ParityKind::Mixed);
    }

    #[test]
    fn reality_examples() {
        let j = catalog("jordan2x2").unwrap();
        let s = eig_matrix(j.matrix_family().unwrap().matrix_at(1.0).as_ref()).unwrap();
        let r = reality_verdict(&s, 1e-10);
        assert_eq!(r.verdicts, vec![Reality::ConjugatePair; 2]);
        assert_eq!(r.partner, vec![Some(1), Some(0)]);
        let r = reality_verdict_values(&[cplx(1.0, 0.5), cplx(2.0, 0.0)], 1e-10);
        assert_eq!(r.verdicts, vec![Reality::Undecided, Reality::Real]);
    }

    #[test]
    fn left_vectors_satisfy_adjoint_equation() {
        let h = Mat::from_fn(4, 4, |i, j| cplx((i * 3 + j) as f64 * 0.1, if i < j { 0.3 } else { -0.1 * j as f64 }));
        let mut s = eig_matrix(h.as_ref()).unwrap();
        attach_left_vectors(&mut s, h.as_ref(), None, &[0, 1, 2, 3]);
        for p in &s.pairs {
            assert!(p.residual < 1e-12);
            assert!(left_residual(h.as_ref(), p.value, p.left_vector.as_ref().unwrap()) < 1e-10);
        }
    }

    #[test]
    fn sorting_buckets_conjugate_pairs() {
        let v = [cplx(1.0, 0.3), cplx(1.0 + 1e-13, -0.3), cplx(0.5, 0.0)];
        assert_eq!(sort_order(&v), vec![2, 1, 0]);
    }
}
