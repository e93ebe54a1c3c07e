use faer::{c64, Mat, MatRef};
use rayon::prelude::*;
use serde::Serialize;

use super::StabilityError;
use crate::discretize::{self, DiscretizedOperator, Discretization};
use crate::eigensolve;
use crate::linalg::{self, adjoint, gaussian_matrix, singular_values, CMat, ShiftedSolver};
use crate::potentials::OperatorFamily;
use crate::tridiag::Tridiagonal;

/// Above this dimension projectors are computed in factored low-rank form.
pub const DENSE_PROJECTION_LIMIT: usize = 150;
/// Nodes summed per parallel task; fixed so the reduction order never varies.
const NODE_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contour {
    pub center: c64,
    pub radius: f64,
    pub n_nodes: usize,
}

impl Contour {
    pub fn new(center: c64, radius: f64, n_nodes: usize) -> Result<Self, StabilityError> {
        if !(radius > 0.0 && radius.is_finite()) || n_nodes < 8 || !(center.re.is_finite() && center.im.is_finite()) {
            return Err(StabilityError::BadContour(format!(
                "need radius > 0 and at least 8 nodes (radius {radius}, nodes {n_nodes})"
            )));
        }
        Ok(Contour { center, radius, n_nodes })
    }

    /// Rejects eigenvalues within `margin·radius` of the circle. Returns the
    /// number of enclosed eigenvalues.
    pub fn validate(&self, eigenvalues: &[c64], margin: f64) -> Result<usize, StabilityError> {
        let mut inside = 0;
        for &lam in eigenvalues {
            let d = (lam - self.center).norm();
            let gap = (d - self.radius).abs();
            if gap <= margin * self.radius {
                return Err(StabilityError::ContourTooClose { eigenvalue: lam, distance: gap });
            }
            if d < self.radius {
                inside += 1;
            }
        }
        Ok(inside)
    }

    fn node(&self, k: usize, n: usize, half_offset: bool) -> (c64, c64) {
        let off = if half_offset { 0.5 } else { 0.0 };
        let theta = 2.0 * std::f64::consts::PI * (k as f64 + off) / n as f64;
        let dz = c64::new(self.radius * theta.cos(), self.radius * theta.sin());
        (self.center + dz, dz / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Target for the node-doubling estimate, relative to `max(1, ‖P‖)`.
    pub quad_tol: f64,
    pub max_nodes: usize,
    /// Eigenvalues closer than `margin·radius` to the circle are rejected.
    pub margin: f64,
    pub seed: u64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions { quad_tol: 1e-10, max_nodes: 2048, margin: 0.02, seed: 0x9e37_79b9 }
    }
}

/// A spectral projector, dense or as `Q·B` with orthonormal `Q`.
#[derive(Debug, Clone)]
pub enum Projector {
    Dense(CMat),
    LowRank { q: CMat, b: CMat },
}

impl Projector {
    pub fn dim(&self) -> usize {
        match self {
            Projector::Dense(p) => p.nrows(),
            Projector::LowRank { q, .. } => q.nrows(),
        }
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            Projector::Dense(p) => p.clone(),
            Projector::LowRank { q, b } => q * b,
        }
    }

    pub fn apply(&self, x: MatRef<'_, c64>) -> CMat {
        match self {
            Projector::Dense(p) => p * x,
            Projector::LowRank { q, b } => q * (b * x),
        }
    }

    fn factors(&self) -> (CMat, CMat) {
        match self {
            Projector::Dense(p) => (linalg::identity(p.nrows()), p.clone()),
            Projector::LowRank { q, b } => (q.clone(), b.clone()),
        }
    }
}

/// `‖A − B‖₂` for two projectors of equal dimension.
pub fn projector_distance(a: &Projector, b: &Projector) -> f64 {
    if let (Projector::Dense(x), Projector::Dense(y)) = (a, b) {
        return linalg::spectral_norm((x - y).as_ref());
    }
    let (qa, ba) = a.factors();
    let (qb, bb) = b.factors();
    let n = qa.nrows();
    let stacked = Mat::from_fn(n, qa.ncols() + qb.ncols(), |i, j| {
        if j < qa.ncols() {
            qa[(i, j)]
        } else {
            qb[(i, j - qa.ncols())]
        }
    });
    let qc = linalg::orthonormal_columns(&stacked);
    let m = qc.adjoint() * &qa * &ba - qc.adjoint() * &qb * &bb;
    linalg::spectral_norm(m.as_ref())
}

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub projector: Projector,
    pub rank: usize,
    /// Leading singular values of the projector.
    pub singular_values: Vec<f64>,
    /// `‖P² − P‖₂`.
    pub idempotency_defect: f64,
    /// `‖P_{2N} − P_N‖₂` for the final node count `2N`.
    pub quadrature_estimate: f64,
    pub n_nodes: usize,
    /// Eigenvalues enclosed by the contour, when the spectrum was available for validation.
    pub enclosed: Option<usize>,
    pub contour: Contour,
}

/// `Σ_k (z_k − c)/n · R(z_k) X` (or the adjoint sum) over one node family.
fn node_sum(
    h: MatRef<'_, c64>,
    tri: Option<&Tridiagonal>,
    contour: &Contour,
    n: usize,
    half_offset: bool,
    x: MatRef<'_, c64>,
    adjoint_sum: bool,
) -> Result<CMat, StabilityError> {
    let chunks = n.div_ceil(NODE_CHUNK);
    let partial: Vec<Result<CMat, StabilityError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Mat::<c64>::zeros(x.nrows(), x.ncols());
            for k in c * NODE_CHUNK..((c + 1) * NODE_CHUNK).min(n) {
                let (z, w) = contour.node(k, n, half_offset);
                let solver = ShiftedSolver::new(h, tri, z);
                if solver.is_singular() {
                    return Err(StabilityError::ContourTooClose { eigenvalue: z, distance: 0.0 });
                }
                let y = if adjoint_sum { solver.solve_adjoint_mat(x) } else { solver.solve_mat(x) };
                let w = if adjoint_sum { w.conj() } else { w };
                for j in 0..y.ncols() {
                    for i in 0..y.nrows() {
                        acc[(i, j)] += w * y[(i, j)];
                    }
                }
            }
            if !linalg::is_finite(acc.as_ref()) {
                return Err(StabilityError::QuadratureNotConverged { estimate: f64::INFINITY, nodes: n });
            }
            Ok(acc)
        })
        .collect();
    let mut total = Mat::<c64>::zeros(x.nrows(), x.ncols());
    for p in partial {
        total += p?;
    }
    Ok(total)
}

fn validation_spectrum(h: MatRef<'_, c64>, tri: Option<&Tridiagonal>) -> Option<Vec<c64>> {
    let n = h.nrows();
    let hermitian_tri = tri.is_some_and(|t| t.is_hermitian());
    if n <= linalg::DENSE_SVD_LIMIT || hermitian_tri {
        eigensolve::eigenvalues_matrix(h, tri).ok()
    } else {
        None
    }
}

pub fn spectral_projection(h: MatRef<'_, c64>, contour: &Contour) -> Result<ProjectionResult, StabilityError> {
    let tri = Tridiagonal::detect(h);
    spectral_projection_with(h, tri.as_ref(), contour, &ProjectionOptions::default(), None)
}

pub fn spectral_projection_op(op: &DiscretizedOperator, contour: &Contour) -> Result<ProjectionResult, StabilityError> {
    spectral_projection_with(op.matrix.as_ref(), op.tridiagonal.as_ref(), contour, &ProjectionOptions::default(), None)
}

/// Contour projection `(2πi)⁻¹∮(z − H)⁻¹dz` by the trapezoid rule with node
/// doubling. `known_eigenvalues` skips the validation eigensolve.
pub fn spectral_projection_with(
    h: MatRef<'_, c64>,
    tri: Option<&Tridiagonal>,
    contour: &Contour,
    opts: &ProjectionOptions,
    known_eigenvalues: Option<&[c64]>,
) -> Result<ProjectionResult, StabilityError> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(StabilityError::BadContour("matrix must be square and nonempty".into()));
    }
    let computed;
    let spectrum = match known_eigenvalues {
        Some(v) => Some(v),
        None => {
            computed = validation_spectrum(h, tri);
            computed.as_deref()
        }
    };
    let enclosed = match spectrum {
        Some(v) => Some(contour.validate(v, opts.margin)?),
        None => None,
    };
    if n <= DENSE_PROJECTION_LIMIT {
        dense_projection(h, tri, contour, opts, enclosed)
    } else {
        low_rank_projection(h, tri, contour, opts, enclosed)
    }
}

fn rank_of(sv: &[f64]) -> usize {
    sv.iter().filter(|&&s| s > 0.5).count()
}

fn dense_projection(
    h: MatRef<'_, c64>,
    tri: Option<&Tridiagonal>,
    contour: &Contour,
    opts: &ProjectionOptions,
    enclosed: Option<usize>,
) -> Result<ProjectionResult, StabilityError> {
    let n = h.nrows();
    let id = linalg::identity(n);
    let mut nodes = contour.n_nodes;
    let mut coarse = node_sum(h, tri, contour, nodes, false, id.as_ref(), false)?;
    loop {
        let odd = node_sum(h, tri, contour, nodes, true, id.as_ref(), false)?;
        let fine = (&coarse + &odd) * faer::Scale(c64::new(0.5, 0.0));
        let estimate = linalg::spectral_norm((&fine - &coarse).as_ref());
        let sv = singular_values(fine.as_ref());
        let scale = sv.first().copied().unwrap_or(0.0).max(1.0);
        if estimate <= opts.quad_tol * scale || 2 * nodes >= opts.max_nodes {
            if estimate > opts.quad_tol * scale && estimate > 1e-6 * scale {
                return Err(StabilityError::QuadratureNotConverged { estimate, nodes: 2 * nodes });
            }
            let defect = linalg::spectral_norm((&fine * &fine - &fine).as_ref());
            let rank = rank_of(&sv);
            let keep = (rank + 4).min(sv.len());
            return Ok(ProjectionResult {
                projector: Projector::Dense(fine),
                rank,
                singular_values: sv[..keep].to_vec(),
                idempotency_defect: defect,
                quadrature_estimate: estimate,
                n_nodes: 2 * nodes,
                enclosed,
                contour: *contour,
            });
        }
        coarse = fine;
        nodes *= 2;
    }
}

/// Orthonormal basis of the numerical range of `y` (relative threshold 1e-8).
fn range_basis(y: &CMat) -> CMat {
    let n = y.nrows();
    let scale = (0..y.ncols()).map(|j| linalg::norm2(&linalg::column(y.as_ref(), j))).fold(0.0, f64::max);
    let mut basis: Vec<Vec<c64>> = Vec::new();
    for j in 0..y.ncols() {
        let mut v = linalg::column(y.as_ref(), j);
        for _ in 0..2 {
            for q in &basis {
                let c = linalg::dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let nv = linalg::norm2(&v);
        if nv > 1e-8 * scale && nv > 0.0 {
            for vi in v.iter_mut() {
                *vi /= nv;
            }
            basis.push(v);
        }
    }
    linalg::from_columns(&basis, n)
}

fn low_rank_projection(
    h: MatRef<'_, c64>,
    tri: Option<&Tridiagonal>,
    contour: &Contour,
    opts: &ProjectionOptions,
    enclosed: Option<usize>,
) -> Result<ProjectionResult, StabilityError> {
    let n = h.nrows();
    let mut width = (enclosed.unwrap_or(4) + 10).min(n);
    let mut nodes = contour.n_nodes;
    loop {
        let omega = gaussian_matrix(n, width, opts.seed);
        let ye = node_sum(h, tri, contour, nodes, false, omega.as_ref(), false)?;
        let yo = node_sum(h, tri, contour, nodes, true, omega.as_ref(), false)?;
        let y = (&ye + &yo) * faer::Scale(c64::new(0.5, 0.0));
        let q = range_basis(&y);
        if q.ncols() >= width && width < n {
            width = (2 * width).min(n);
            continue;
        }
        if q.ncols() == 0 {
            return Ok(ProjectionResult {
                projector: Projector::LowRank { q, b: Mat::zeros(0, n) },
                rank: 0,
                singular_values: vec![0.0],
                idempotency_defect: 0.0,
                quadrature_estimate: 0.0,
                n_nodes: 2 * nodes,
                enclosed,
                contour: *contour,
            });
        }
        let be = adjoint(node_sum(h, tri, contour, nodes, false, q.as_ref(), true)?.as_ref());
        let bo = adjoint(node_sum(h, tri, contour, nodes, true, q.as_ref(), true)?.as_ref());
        let b = (&be + &bo) * faer::Scale(c64::new(0.5, 0.0));
        let estimate = linalg::spectral_norm((&b - &be).as_ref());
        let sv = singular_values(b.as_ref());
        let scale = sv[0].max(1.0);
        if estimate <= opts.quad_tol * scale || 2 * nodes >= opts.max_nodes {
            if estimate > opts.quad_tol * scale && estimate > 1e-6 * scale {
                return Err(StabilityError::QuadratureNotConverged { estimate, nodes: 2 * nodes });
            }
            let bqb = &b * &q * &b;
            let defect = linalg::spectral_norm((&bqb - &b).as_ref());
            let rank = rank_of(&sv);
            return Ok(ProjectionResult {
                projector: Projector::LowRank { q, b },
                rank,
                singular_values: sv,
                idempotency_defect: defect,
                quadrature_estimate: estimate,
                n_nodes: 2 * nodes,
                enclosed,
                contour: *contour,
            });
        }
        nodes *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    Stable,
    RankJump,
    RankDrop,
    NotConverging,
    Undecided,
}

impl StabilityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityVerdict::Stable => "stable",
            StabilityVerdict::RankJump => "rank_jump",
            StabilityVerdict::RankDrop => "rank_drop",
            StabilityVerdict::NotConverging => "not_converging",
            StabilityVerdict::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub epsilon: f64,
    pub rank: Option<usize>,
    /// `‖P(ε) − P(0)‖₂`.
    pub proj_diff_norm: Option<f64>,
    pub idempotency_defect: Option<f64>,
    pub quadrature_estimate: Option<f64>,
    /// `same_rank`, `rank_jump`, `rank_drop` or `failed`.
    pub status: &'static str,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub center: c64,
    pub radius: f64,
    pub rank0: usize,
    /// First row is ε = 0.
    pub rows: Vec<StabilityRow>,
    pub verdict: StabilityVerdict,
    /// Differences may rise by at most this much between consecutive ε.
    pub noise_floor: f64,
    /// Required `last/first` ratio of the projector differences.
    pub decay_ratio: f64,
}

pub const DECAY_RATIO: f64 = 0.5;

/// Ranks and projector distances along a decreasing ε sequence.
///
/// Stable: all ranks equal `rank P(0)`, differences nonincreasing within
/// the noise floor, and the last at most [`DECAY_RATIO`] times the first.
pub fn stability_check(
    family: &OperatorFamily,
    e: c64,
    r: f64,
    epsilons: &[f64],
    disc: Option<&Discretization>,
) -> Result<StabilityReport, StabilityError> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| !(w[1] < w[0])) || epsilons.iter().any(|&x| !(x > 0.0)) {
        return Err(StabilityError::NotDecreasing);
    }
    let contour = Contour::new(e, r, 64)?;
    let op0 = discretize::build(family, 0.0, disc)?;
    let p0 = spectral_projection_op(&op0, &contour)?;
    if p0.rank == 0 {
        return Err(StabilityError::NotAnEigenvalue { center: e, radius: r });
    }
    let mut rows = vec![StabilityRow {
        epsilon: 0.0,
        rank: Some(p0.rank),
        proj_diff_norm: Some(0.0),
        idempotency_defect: Some(p0.idempotency_defect),
        quadrature_estimate: Some(p0.quadrature_estimate),
        status: "same_rank",
        error: None,
    }];
    let mut noise = p0.quadrature_estimate.max(p0.idempotency_defect);
    for &eps in epsilons {
        let attempt = discretize::build(family, eps, disc)
            .map_err(StabilityError::from)
            .and_then(|op| spectral_projection_op(&op, &contour));
        match attempt {
            Ok(p) => {
                noise = noise.max(p.quadrature_estimate).max(p.idempotency_defect);
                let status = match p.rank.cmp(&p0.rank) {
                    std::cmp::Ordering::Equal => "same_rank",
                    std::cmp::Ordering::Greater => "rank_jump",
                    std::cmp::Ordering::Less => "rank_drop",
                };
                rows.push(StabilityRow {
                    epsilon: eps,
                    rank: Some(p.rank),
                    proj_diff_norm: Some(projector_distance(&p.projector, &p0.projector)),
                    idempotency_defect: Some(p.idempotency_defect),
                    quadrature_estimate: Some(p.quadrature_estimate),
                    status,
                    error: None,
                });
            }
            Err(err) => rows.push(StabilityRow {
                epsilon: eps,
                rank: None,
                proj_diff_norm: None,
                idempotency_defect: None,
                quadrature_estimate: None,
                status: "failed",
                error: Some(err.to_string()),
            }),
        }
    }
    let noise_floor = 10.0 * noise + 1e-12;
    let verdict = judge(&rows[1..], noise_floor);
    Ok(StabilityReport { center: e, radius: r, rank0: p0.rank, rows, verdict, noise_floor, decay_ratio: DECAY_RATIO })
}

fn judge(rows: &[StabilityRow], noise_floor: f64) -> StabilityVerdict {
    if rows.iter().any(|r| r.rank.is_none()) {
        return StabilityVerdict::Undecided;
    }
    if rows.iter().any(|r| r.status == "rank_jump") {
        return StabilityVerdict::RankJump;
    }
    if rows.iter().any(|r| r.status == "rank_drop") {
        return StabilityVerdict::RankDrop;
    }
    let d: Vec<f64> = rows.iter().map(|r| r.proj_diff_norm.unwrap_or(f64::INFINITY)).collect();
    let monotone = d.windows(2).all(|w| w[1] <= w[0] + noise_floor);
    let decays = d.last().copied().unwrap_or(0.0) <= DECAY_RATIO * d[0] || d[0] <= noise_floor;
    if monotone && decays {
        StabilityVerdict::Stable
    } else {
        StabilityVerdict::NotConverging
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cplx;
    use crate::potentials::catalog;

    #[test]
    fn jordan_projection_has_rank_two() {
        let j = catalog("jordan2x2").unwrap();
        let c = Contour::new(cplx(0.0, 0.0), 0.5, 64).unwrap();
        let p = spectral_projection(j.matrix_family().unwrap().h0.as_ref(), &c).unwrap();
        assert_eq!(p.rank, 2);
        assert!(p.idempotency_defect <= 1e-10);
    }

    #[test]
    fn contour_through_eigenvalue_is_rejected() {
        let d = Mat::from_fn(2, 2, |i, j| if i == j { cplx(i as f64, 0.0) } else { cplx(0.0, 0.0) });
        let c = Contour::new(cplx(0.0, 0.0), 1.0, 64).unwrap();
        match spectral_projection(d.as_ref(), &c) {
            Err(StabilityError::ContourTooClose { eigenvalue, .. }) => assert_eq!(eigenvalue, cplx(1.0, 0.0)),
            other => panic!("{other:?}"),
        }
        assert!(Contour::new(cplx(0.0, 0.0), 1.0, 4).is_err());
    }

    #[test]
    fn low_rank_path_matches_dense_path() {
        // Tridiagonal non-Hermitian test matrix above the dense limit.
        let n = 200;
        let t = Tridiagonal {
            sub: vec![cplx(-1.0, 0.0); n - 1],
            diag: (0..n).map(|i| cplx(2.0 + 0.05 * i as f64, 0.1 * ((i as f64) * 0.3).sin())).collect(),
            sup: vec![cplx(-0.8, 0.0); n - 1],
        };
        let h = t.to_dense();
        let eigs = eigensolve::eigenvalues_matrix(h.as_ref(), None).unwrap();
        let c = Contour::new(eigs[1], 0.3 * (eigs[2] - eigs[1]).norm().min((eigs[1] - eigs[0]).norm()), 64).unwrap();
        let lr = spectral_projection_with(h.as_ref(), Some(&t), &c, &ProjectionOptions::default(), None).unwrap();
        assert_eq!(lr.rank, 1);
        // Dense reference through the same quadrature.
        let id = linalg::identity(n);
        let mut nodes = 64;
        let mut dense = node_sum(h.as_ref(), None, &c, nodes, false, id.as_ref(), false).unwrap();
        while nodes < lr.n_nodes {
            let odd = node_sum(h.as_ref(), None, &c, nodes, true, id.as_ref(), false).unwrap();
            dense = (&dense + &odd) * faer::Scale(c64::new(0.5, 0.0));
            nodes *= 2;
        }
        let diff = projector_distance(&lr.projector, &Projector::Dense(dense));
        assert!(diff < 1e-8, "{diff}");
    }
}
