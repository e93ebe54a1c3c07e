//! Matrix realizations of operator families: finite differences on a
//! symmetric grid, Galerkin truncation in the oscillator basis, and the
//! explicit matrix triples. Includes parity matrices, PT residuals and
//! two-resolution error estimates.

pub mod hermite;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigensolve::{self, EigenError};
use crate::linalg::{CMat, RMat};
use crate::potentials::{confinement_audit, OperatorFamily, PotentialError, PotentialTerm, Variant};
use crate::tridiag::Tridiagonal;

/// Grid spacing targeted by [`Grid::auto`].
pub const DEFAULT_SPACING: f64 = 0.02;
/// Classically forbidden margin used by [`Grid::auto`].
pub const TRUNCATION_MARGIN: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("grid needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid half-width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("oscillator basis needs n_modes ≥ 1 and ω > 0 (got {n_modes}, {omega})")]
    BadBasis { n_modes: usize, omega: f64 },
    #[error("{0} family has no {1} discretization")]
    VariantMismatch(&'static str, &'static str),
    #[error("exp(x²) terms are only supported in the oscillator basis")]
    UnsupportedTerm,
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("eigensolve during convergence estimate: {0}")]
    Eigen(#[from] EigenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub half_width: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self, DiscretizeError> {
        if n_points < 3 {
            return Err(DiscretizeError::TooFewPoints(n_points));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(DiscretizeError::BadHalfWidth(half_width));
        }
        Ok(Grid { half_width, n_points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n_points + 1) as f64
    }

    /// `xᵢ = −L + i·h`, `i = 1..n`, computed so that `x_{n+1−i} = −xᵢ` bit for bit.
    pub fn node(&self, i: usize) -> f64 {
        let offset = 2 * i as i64 - self.n_points as i64 - 1;
        offset as f64 * self.spacing() / 2.0
    }

    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n_points).map(|i| self.node(i)).collect()
    }

    /// Half-width where `|V+εW|` first exceeds `e_max + TRUNCATION_MARGIN` on
    /// both sides, with `n` chosen for spacing at most [`DEFAULT_SPACING`].
    pub fn auto(family: &OperatorFamily, epsilon: f64, e_max: f64) -> Result<Self, DiscretizeError> {
        let sch = family
            .schrodinger_family()
            .ok_or(DiscretizeError::VariantMismatch("matrix", "grid"))?;
        let u = sch.potential_at(epsilon);
        let target = e_max + TRUNCATION_MARGIN;
        let mut l = 1.0;
        while l < 200.0 {
            let lo = u.evaluate(-l)?.norm();
            let hi = u.evaluate(l)?.norm();
            if lo.min(hi) >= target {
                break;
            }
            l += 0.25;
        }
        let n = (2.0 * l / DEFAULT_SPACING).ceil() as usize;
        Grid::new(l, n.max(3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub n_modes: usize,
    pub omega: f64,
}

impl BasisSpec {
    pub fn new(n_modes: usize, omega: f64) -> Result<Self, DiscretizeError> {
        if n_modes < 1 || !(omega > 0.0 && omega.is_finite()) {
            return Err(DiscretizeError::BadBasis { n_modes, omega });
        }
        Ok(BasisSpec { n_modes, omega })
    }
}

/// Discretization descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Discretization {
    #[serde(rename = "fd")]
    FiniteDifference(Grid),
    #[serde(rename = "basis")]
    Basis(BasisSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FiniteDifference,
    OscillatorBasis,
    Matrix,
}

/// Parity operator, kept structural so that `P² = I` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Parity {
    /// Index reversal on an `n`-point symmetric grid.
    Reversal(usize),
    /// `diag((−1)ⁿ)` on `n` Hermite modes.
    Alternating(usize),
    Dense(RMat),
}

impl Parity {
    pub fn dim(&self) -> usize {
        match self {
            Parity::Reversal(n) | Parity::Alternating(n) => *n,
            Parity::Dense(p) => p.nrows(),
        }
    }

    pub fn to_matrix(&self) -> RMat {
        match self {
            Parity::Reversal(n) => Mat::from_fn(*n, *n, |i, j| if i + j == n - 1 { 1.0 } else { 0.0 }),
            Parity::Alternating(n) => Mat::from_fn(*n, *n, |i, j| {
                if i != j {
                    0.0
                } else if i % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }),
            Parity::Dense(p) => p.clone(),
        }
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        match self {
            Parity::Reversal(_) => v.iter().rev().copied().collect(),
            Parity::Alternating(_) => v.iter().enumerate().map(|(i, z)| if i % 2 == 0 { *z } else { -*z }).collect(),
            Parity::Dense(p) => (0..p.nrows())
                .map(|i| (0..p.ncols()).map(|j| v[j] * p[(i, j)]).sum())
                .collect(),
        }
    }

    /// Entry `(P·conj(H)·P)[i, j]`.
    fn conjugated_entry(&self, h: MatRef<'_, c64>, i: usize, j: usize) -> c64 {
        match self {
            Parity::Reversal(n) => h[(n - 1 - i, n - 1 - j)].conj(),
            Parity::Alternating(_) => {
                let z = h[(i, j)].conj();
                if (i + j) % 2 == 0 {
                    z
                } else {
                    -z
                }
            }
            Parity::Dense(_) => unreachable!("dense parity handled by matrix products"),
        }
    }
}

pub fn parity_matrix(d: &Discretization) -> RMat {
    match d {
        Discretization::FiniteDifference(g) => Parity::Reversal(g.n_points).to_matrix(),
        Discretization::Basis(b) => Parity::Alternating(b.n_modes).to_matrix(),
    }
}

/// `‖P·conj(H)·P − H‖_F / ‖H‖_F` (0 for the zero matrix).
pub fn pt_residual(h: MatRef<'_, c64>, p: &Parity) -> f64 {
    pt_residual_signed(h, p, false)
}

/// [`pt_residual`] with the sign of the `H` term flipped when `inject_sign_error`
/// is set. Used by the acceptance suite's fault-injection smoke test.
#[doc(hidden)]
pub fn pt_residual_signed(h: MatRef<'_, c64>, p: &Parity, inject_sign_error: bool) -> f64 {
    let sign = if inject_sign_error { -1.0 } else { 1.0 };
    let n = h.nrows();
    let norm = h.norm_l2();
    if norm == 0.0 {
        return 0.0;
    }
    let defect = match p {
        Parity::Dense(pm) => {
            let pc = crate::linalg::to_complex(pm.as_ref());
            let hc = Mat::from_fn(n, n, |i, j| h[(i, j)].conj());
            let m = &pc * &hc * &pc;
            Mat::from_fn(n, n, |i, j| m[(i, j)] - h[(i, j)] * sign).norm_l2()
        }
        _ => {
            let mut s = 0.0;
            for j in 0..n {
                for i in 0..n {
                    s += (p.conjugated_entry(h, i, j) - h[(i, j)] * sign).norm_sqr();
                }
            }
            s.sqrt()
        }
    };
    defect / norm
}

#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub matrix: CMat,
    pub parity: Parity,
    pub method: Method,
    pub discretization: Option<Discretization>,
    pub epsilon: f64,
    /// A-posteriori per-eigenvalue error estimate; 0 until set by [`convergence_gap`].
    pub error_scale: f64,
    /// Set for finite-difference operators.
    pub tridiagonal: Option<Tridiagonal>,
    pub warnings: Vec<String>,
}

impl DiscretizedOperator {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn pt_residual(&self) -> f64 {
        pt_residual(self.matrix.as_ref(), &self.parity)
    }

    pub fn grid(&self) -> Option<&Grid> {
        match &self.discretization {
            Some(Discretization::FiniteDifference(g)) => Some(g),
            _ => None,
        }
    }

    /// Wraps an explicit matrix with a dense parity.
    pub fn from_matrix(matrix: CMat, parity: Parity) -> Self {
        let tridiagonal = Tridiagonal::detect(matrix.as_ref());
        DiscretizedOperator {
            matrix,
            parity,
            method: Method::Matrix,
            discretization: None,
            epsilon: 0.0,
            error_scale: 0.0,
            tridiagonal,
            warnings: Vec::new(),
        }
    }
}

pub fn build_finite_difference(
    family: &OperatorFamily,
    epsilon: f64,
    grid: Grid,
) -> Result<DiscretizedOperator, DiscretizeError> {
    let sch = family
        .schrodinger_family()
        .ok_or(DiscretizeError::VariantMismatch("matrix", "grid"))?;
    let grid = Grid::new(grid.half_width, grid.n_points)?;
    let u = sch.potential_at(epsilon);
    if u.active_terms().any(|(_, t)| matches!(t, PotentialTerm::ExpSquare { .. })) {
        return Err(DiscretizeError::UnsupportedTerm);
    }
    let n = grid.n_points;
    let h = grid.spacing();
    let k = 1.0 / (h * h);
    let mut diag = Vec::with_capacity(n);
    for i in 1..=n {
        diag.push(c64::new(2.0 * k, 0.0) + u.evaluate(grid.node(i))?);
    }
    let off = vec![c64::new(-k, 0.0); n - 1];
    let tri = Tridiagonal { sub: off.clone(), diag, sup: off };
    let mut warnings = Vec::new();
    if let Ok(report) = confinement_audit(family, epsilon, grid.half_width, 200) {
        if !report.monotone_growth {
            warnings.push(format!(
                "|V+εW| is not monotone on shells up to L = {} at ε = {epsilon}; truncation may be unreliable",
                grid.half_width
            ));
        }
    }
    Ok(DiscretizedOperator {
        matrix: tri.to_dense(),
        parity: Parity::Reversal(n),
        method: Method::FiniteDifference,
        discretization: Some(Discretization::FiniteDifference(grid)),
        epsilon,
        error_scale: 0.0,
        tridiagonal: Some(tri),
        warnings,
    })
}

pub fn build_oscillator_basis(
    family: &OperatorFamily,
    epsilon: f64,
    basis: BasisSpec,
) -> Result<DiscretizedOperator, DiscretizeError> {
    let sch = family
        .schrodinger_family()
        .ok_or(DiscretizeError::VariantMismatch("matrix", "oscillator basis"))?;
    let basis = BasisSpec::new(basis.n_modes, basis.omega)?;
    let matrix = hermite::assemble(&sch.potential_at(epsilon), basis.n_modes, basis.omega)?;
    Ok(DiscretizedOperator {
        matrix,
        parity: Parity::Alternating(basis.n_modes),
        method: Method::OscillatorBasis,
        discretization: Some(Discretization::Basis(basis)),
        epsilon,
        error_scale: 0.0,
        tridiagonal: None,
        warnings: Vec::new(),
    })
}

/// `H(ε)` of any family: the matrix triple directly, Schrödinger families
/// through `disc` (required for them).
pub fn build(
    family: &OperatorFamily,
    epsilon: f64,
    disc: Option<&Discretization>,
) -> Result<DiscretizedOperator, DiscretizeError> {
    match (&family.variant, disc) {
        (Variant::Matrix(m), _) => {
            let mut op = DiscretizedOperator::from_matrix(m.matrix_at(epsilon), Parity::Dense(m.p.clone()));
            op.epsilon = epsilon;
            Ok(op)
        }
        (Variant::Schrodinger(_), Some(Discretization::FiniteDifference(g))) => {
            build_finite_difference(family, epsilon, *g)
        }
        (Variant::Schrodinger(_), Some(Discretization::Basis(b))) => build_oscillator_basis(family, epsilon, *b),
        (Variant::Schrodinger(_), None) => Err(DiscretizeError::VariantMismatch("schrodinger", "default")),
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceGap {
    /// The `k` lowest eigenvalues of the finer operator, sorted by (Re, Im).
    pub fine_values: Vec<c64>,
    /// Nearest eigenvalue of the coarser operator for each of them.
    pub coarse_values: Vec<c64>,
    pub gaps: Vec<f64>,
    /// Indices whose pairing was ambiguous (runner-up within twice the gap).
    pub ambiguous: Vec<usize>,
    pub error_scale: f64,
    /// The finer operator with `error_scale` set.
    pub fine: DiscretizedOperator,
}

fn size_of(d: &Discretization) -> usize {
    match d {
        Discretization::FiniteDifference(g) => g.n_points,
        Discretization::Basis(b) => b.n_modes,
    }
}

/// Compares the `k` lowest eigenvalues at two resolutions.
pub fn convergence_gap(
    family: &OperatorFamily,
    epsilon: f64,
    a: &Discretization,
    b: &Discretization,
    k: usize,
) -> Result<ConvergenceGap, DiscretizeError> {
    let (coarse, fine) = if size_of(a) <= size_of(b) { (a, b) } else { (b, a) };
    let fine_op = build(family, epsilon, Some(fine))?;
    let coarse_op = if coarse == fine { fine_op.clone() } else { build(family, epsilon, Some(coarse))? };
    let fv = eigensolve::eigenvalues(&fine_op)?;
    let cv = eigensolve::eigenvalues(&coarse_op)?;
    Ok(pair_lowest(&fv, &cv, k, fine_op))
}

/// Nearest-match pairing of the `k` lowest of `fine` against `coarse`.
pub fn pair_lowest(fine: &[c64], coarse: &[c64], k: usize, mut fine_op: DiscretizedOperator) -> ConvergenceGap {
    let k = k.min(fine.len());
    let scale = fine.iter().take(k).map(|z| z.norm()).fold(1.0, f64::max);
    let mut fine_values = Vec::with_capacity(k);
    let mut coarse_values = Vec::with_capacity(k);
    let mut gaps = Vec::with_capacity(k);
    let mut ambiguous = Vec::new();
    for (idx, &lam) in fine.iter().take(k).enumerate() {
        let mut best = (f64::INFINITY, c64::new(f64::NAN, f64::NAN));
        let mut second = f64::INFINITY;
        for &mu in coarse {
            let d = (mu - lam).norm();
            if d < best.0 {
                second = best.0;
                best = (d, mu);
            } else if d < second {
                second = d;
            }
        }
        if second <= 2.0 * best.0 + 1e-14 * scale {
            ambiguous.push(idx);
        }
        fine_values.push(lam);
        coarse_values.push(best.1);
        gaps.push(best.0);
    }
    let error_scale = gaps.iter().copied().fold(0.0, f64::max);
    fine_op.error_scale = error_scale;
    ConvergenceGap { fine_values, coarse_values, gaps, ambiguous, error_scale, fine: fine_op }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{catalog, PotentialSpec};

    fn harmonic() -> OperatorFamily {
        OperatorFamily::schrodinger(
            PotentialSpec::new(vec![PotentialTerm::monomial(1.0, 2)], vec![]).unwrap(),
            PotentialSpec::zero(),
            1.0,
        )
    }

    #[test]
    fn free_stencil() {
        let free = OperatorFamily::schrodinger(PotentialSpec::zero(), PotentialSpec::zero(), 1.0);
        let op = build_finite_difference(&free, 0.0, Grid::new(2.0, 3).unwrap()).unwrap();
        let expect = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(op.matrix[(i, j)], c64::new(expect[i][j], 0.0));
            }
        }
    }

    #[test]
    fn grid_nodes_are_mirror_exact() {
        let g = Grid::new(10.0, 2000).unwrap();
        let x = g.nodes();
        for i in 0..x.len() {
            assert_eq!(x[i], -x[x.len() - 1 - i]);
        }
        assert!((x[0] - (-10.0 + g.spacing())).abs() < 1e-12);
    }

    #[test]
    fn matrix_family_has_no_grid() {
        let j = catalog("jordan2x2").unwrap();
        assert!(matches!(
            build_finite_difference(&j, 0.0, Grid::new(1.0, 5).unwrap()),
            Err(DiscretizeError::VariantMismatch(..))
        ));
        assert!(Grid::new(1.0, 2).is_err());
        assert!(BasisSpec::new(0, 1.0).is_err());
    }

    #[test]
    fn parity_matrices() {
        let g = parity_matrix(&Discretization::FiniteDifference(Grid::new(1.0, 3).unwrap()));
        let b = parity_matrix(&Discretization::Basis(BasisSpec::new(3, 1.0).unwrap()));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g[(i, j)], if i + j == 2 { 1.0 } else { 0.0 });
            }
        }
        assert_eq!((b[(0, 0)], b[(1, 1)], b[(2, 2)]), (1.0, -1.0, 1.0));
        for p in [g, b] {
            let pp = &p * &p;
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(pp[(i, j)], if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn pt_residual_examples() {
        let j = catalog("jordan2x2").unwrap();
        let m = j.matrix_family().unwrap();
        let p = Parity::Dense(m.p.clone());
        assert_eq!(pt_residual(m.h0.as_ref(), &p), 0.0);
        let di = Mat::from_fn(2, 2, |a, b| if a == b { c64::new(0.0, 1.0) } else { c64::new(0.0, 0.0) });
        assert!((pt_residual(di.as_ref(), &p) - 2.0).abs() < 1e-15);
        let cubic = catalog("cubic_i").unwrap();
        let op = build_finite_difference(&cubic, 0.0, Grid::new(8.0, 400).unwrap()).unwrap();
        assert!(op.pt_residual() <= 1e-12);
        assert_eq!(pt_residual(op.matrix.as_ref(), &Parity::Dense(op.parity.to_matrix())), op.pt_residual());
    }

    #[test]
    fn basis_diagonalizes_harmonic_oscillator() {
        let op = build_oscillator_basis(&harmonic(), 0.0, BasisSpec::new(40, 1.0).unwrap()).unwrap();
        for m in 0..40 {
            for n in 0..40 {
                let expect = if m == n { (2 * n + 1) as f64 } else { 0.0 };
                assert!((op.matrix[(m, n)] - c64::new(expect, 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn cubic_basis_is_complex_symmetric_and_pt() {
        let op = build_oscillator_basis(&catalog("cubic_i").unwrap(), 0.0, BasisSpec::new(120, 1.0).unwrap()).unwrap();
        for m in 0..120 {
            for n in 0..120 {
                assert_eq!(op.matrix[(m, n)], op.matrix[(n, m)]);
            }
        }
        assert!(op.pt_residual() <= 1e-10);
    }

    /// `X` in the Hermite basis (`ω = 1`), built in an enlarged space.
    fn ladder_x(n: usize) -> Mat<f64> {
        Mat::from_fn(n, n, |i, j| {
            if i == j + 1 {
                (i as f64 / 2.0).sqrt()
            } else if j == i + 1 {
                (j as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        })
    }

    #[test]
    fn quartic_quadrature_matches_ladder_algebra() {
        let n = 30;
        let big = n + 4;
        let x = ladder_x(big);
        let x4 = &x * &x * &x * &x;
        let quartic = OperatorFamily::schrodinger(
            PotentialSpec::new(vec![PotentialTerm::monomial(1.0, 4)], vec![]).unwrap(),
            PotentialSpec::zero(),
            1.0,
        );
        let op = build_oscillator_basis(&quartic, 0.0, BasisSpec::new(n, 1.0).unwrap()).unwrap();
        for m in 0..n {
            for k in 0..n {
                let kinetic = if m == k {
                    (2 * k + 1) as f64 / 2.0
                } else if m == k + 2 || k == m + 2 {
                    -(((m.min(k) + 1) * (m.min(k) + 2)) as f64).sqrt() / 2.0
                } else {
                    0.0
                };
                let expect = kinetic + x4[(m, k)];
                assert!((op.matrix[(m, k)].re - expect).abs() <= 1e-10 * expect.abs().max(1.0), "{m} {k}");
            }
        }
    }

    #[test]
    fn exp_square_requires_wide_basis_scale() {
        let f = OperatorFamily::schrodinger(
            PotentialSpec::new(vec![PotentialTerm::monomial(1.0, 2)], vec![]).unwrap(),
            PotentialSpec::new(vec![PotentialTerm::ExpSquare { coefficient: 1.0 }], vec![]).unwrap(),
            1.0,
        );
        assert!(matches!(
            build_oscillator_basis(&f, 0.1, BasisSpec::new(10, 1.0).unwrap()),
            Err(DiscretizeError::QuadratureNonConvergence(_))
        ));
        assert!(build_oscillator_basis(&f, 0.1, BasisSpec::new(10, 2.0).unwrap()).is_ok());
        assert!(matches!(
            build_finite_difference(&f, 0.1, Grid::new(5.0, 50).unwrap()),
            Err(DiscretizeError::UnsupportedTerm)
        ));
    }

    #[test]
    fn identical_sizes_have_zero_gap() {
        let d = Discretization::Basis(BasisSpec::new(30, 1.0).unwrap());
        let g = convergence_gap(&catalog("cubic_i").unwrap(), 0.0, &d, &d, 5).unwrap();
        assert!(g.gaps.iter().all(|&x| x == 0.0));
        assert_eq!(g.fine.error_scale, 0.0);
    }

    #[test]
    fn auto_grid_reaches_margin() {
        let g = Grid::auto(&harmonic(), 0.0, 10.0).unwrap();
        assert!(g.half_width * g.half_width >= 35.0);
        assert!(g.spacing() <= DEFAULT_SPACING);
    }
}
