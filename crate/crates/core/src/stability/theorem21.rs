use faer::{c64, Mat, MatRef};
use serde::Serialize;

use super::StabilityError;
use crate::eigensolve::ParityKind;
use crate::linalg::{self, CMat, RMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem21Violation {
    ShapeMismatch,
    H0NotNormal,
    SpectrumNotReal,
    WNotSymmetric,
    NoAnticommutation,
}

impl std::fmt::Display for Theorem21Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Theorem21Violation::ShapeMismatch => "H0, W and P must be square of equal size",
            Theorem21Violation::H0NotNormal => "H0 is not normal",
            Theorem21Violation::SpectrumNotReal => "H0 has non-real eigenvalues",
            Theorem21Violation::WNotSymmetric => "W is not symmetric",
            Theorem21Violation::NoAnticommutation => "PW = −WP fails",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenspaceParity {
    pub value: f64,
    pub multiplicity: usize,
    pub class: ParityKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem21Bound {
    /// Half the smallest gap between distinct eigenvalues of `H0` (∞ if there is one).
    pub delta: f64,
    /// `delta/‖W‖₂`.
    pub g_bound: f64,
    /// Every eigenspace of `H0` has a single parity.
    pub parity_ok: bool,
    pub w_norm: f64,
    pub eigenspaces: Vec<EigenspaceParity>,
}

const TOL: f64 = 1e-10;

/// Reality bound `|g| < δ/‖W‖` for `H0 + igW`, after checking that `H0` is
/// normal with real spectrum, `W` is symmetric and `PW = −WP`.
pub fn theorem21_bound(h0: MatRef<'_, c64>, w: MatRef<'_, c64>, p: MatRef<'_, f64>) -> Result<Theorem21Bound, StabilityError> {
    let n = h0.nrows();
    let square = |r: usize, c: usize| r == n && c == n;
    if n == 0 || !square(h0.nrows(), h0.ncols()) || !square(w.nrows(), w.ncols()) || !square(p.nrows(), p.ncols()) {
        return Err(StabilityError::Hypothesis(Theorem21Violation::ShapeMismatch));
    }
    let h_norm = h0.norm_l2().max(f64::MIN_POSITIVE);
    let comm = h0 * h0.adjoint() - h0.adjoint() * h0;
    if comm.norm_l2() > TOL * h_norm * h_norm {
        return Err(StabilityError::Hypothesis(Theorem21Violation::H0NotNormal));
    }
    // Normal with real spectrum is Hermitian; test the spectrum directly so
    // the violation is named correctly.
    let values = crate::eigensolve::eigenvalues_matrix(h0, None)?;
    if values.iter().any(|v| v.im.abs() > TOL * h_norm.max(1.0)) {
        return Err(StabilityError::Hypothesis(Theorem21Violation::SpectrumNotReal));
    }
    if !linalg::is_hermitian(w, 1e-12) {
        return Err(StabilityError::Hypothesis(Theorem21Violation::WNotSymmetric));
    }
    let pc = linalg::to_complex(p);
    let anti = &pc * w + w * &pc;
    if anti.norm_l2() > 1e-12 * w.norm_l2().max(f64::MIN_POSITIVE) {
        return Err(StabilityError::Hypothesis(Theorem21Violation::NoAnticommutation));
    }

    let herm: CMat = Mat::from_fn(n, n, |i, j| (h0[(i, j)] + h0[(j, i)].conj()) * 0.5);
    let evd = herm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| StabilityError::Eigen(crate::eigensolve::EigenError::NoConvergence(format!("{e:?}"))))?;
    let vals: Vec<f64> = (0..n).map(|k| evd.S().column_vector()[k].re).collect();
    let u = evd.U();
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || vals[k] - vals[k - 1] > 1e-9 * scale {
            groups.push((start, k));
            start = k;
        }
    }
    let delta = groups
        .windows(2)
        .map(|g| (vals[g[1].0] - vals[g[0].1 - 1]) / 2.0)
        .fold(f64::INFINITY, f64::min);
    let w_norm = linalg::spectral_norm(w);
    let g_bound = if w_norm > 0.0 { delta / w_norm } else { f64::INFINITY };

    let mut eigenspaces = Vec::new();
    for &(a, b) in &groups {
        let v = u.subcols(a, b - a);
        let m: RMat = {
            let pv = &pc * v;
            let r = v.adjoint() * &pv;
            Mat::from_fn(b - a, b - a, |i, j| r[(i, j)].re)
        };
        let mc = linalg::to_complex(m.as_ref());
        let evs = mc
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| StabilityError::Eigen(crate::eigensolve::EigenError::NoConvergence(format!("{e:?}"))))?;
        let class = if evs.iter().all(|&x| x > 1.0 - 1e-8) {
            ParityKind::Even
        } else if evs.iter().all(|&x| x < -1.0 + 1e-8) {
            ParityKind::Odd
        } else {
            ParityKind::Mixed
        };
        eigenspaces.push(EigenspaceParity { value: vals[a], multiplicity: b - a, class });
    }
    let parity_ok = eigenspaces.iter().all(|e| e.class != ParityKind::Mixed);
    Ok(Theorem21Bound { delta, g_bound, parity_ok, w_norm, eigenspaces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cplx;

    fn m2(a: [[f64; 2]; 2]) -> CMat {
        Mat::from_fn(2, 2, |i, j| cplx(a[i][j], 0.0))
    }

    fn p2() -> RMat {
        Mat::from_fn(2, 2, |i, j| if i != j { 0.0 } else if i == 0 { 1.0 } else { -1.0 })
    }

    #[test]
    fn gap_example() {
        let b = theorem21_bound(m2([[0.0, 0.0], [0.0, 2.0]]).as_ref(), m2([[0.0, 1.0], [1.0, 0.0]]).as_ref(), p2().as_ref()).unwrap();
        assert!((b.delta - 1.0).abs() < 1e-14 && (b.g_bound - 1.0).abs() < 1e-14);
        assert!(b.parity_ok);
    }

    #[test]
    fn degenerate_example() {
        let b = theorem21_bound(m2([[1.0, 0.0], [0.0, 1.0]]).as_ref(), m2([[0.0, 1.0], [1.0, 0.0]]).as_ref(), p2().as_ref()).unwrap();
        assert!(!b.parity_ok);
        assert_eq!(b.eigenspaces[0].multiplicity, 2);
    }

    #[test]
    fn commuting_perturbation_is_rejected() {
        let e = theorem21_bound(m2([[0.0, 0.0], [0.0, 2.0]]).as_ref(), m2([[1.0, 0.0], [0.0, 1.0]]).as_ref(), p2().as_ref());
        assert!(matches!(e, Err(StabilityError::Hypothesis(Theorem21Violation::NoAnticommutation))));
        let nonnormal = m2([[0.0, 1.0], [0.0, 2.0]]);
        let e = theorem21_bound(nonnormal.as_ref(), m2([[0.0, 1.0], [1.0, 0.0]]).as_ref(), p2().as_ref());
        assert!(matches!(e, Err(StabilityError::Hypothesis(Theorem21Violation::H0NotNormal))));
    }
}
