use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef};
use serde::Serialize;

use super::PerturbationError;
use crate::discretize::{self, Discretization, DiscretizedOperator, Method};
use crate::eigensolve;
use crate::linalg::{self, dot, CMat};
use crate::potentials::{OperatorFamily, SchrodingerFamily, Variant};
use crate::stability::{spectral_projection_op, Contour};

/// `|⟨u_L, u_R⟩|` for unit vectors below this is treated as near-defective.
pub const BIORTHOGONALITY_THRESHOLD: f64 = 1e-8;
/// Fraction of a correction vector's norm allowed in the outer 10% of the
/// basis (or the outer 5% of the grid on each side) before the series is
/// truncated.
pub const EDGE_FRACTION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct RspeSeries {
    /// `a₀`, the unperturbed eigenvalue.
    pub base_eigenvalue: c64,
    /// `a₁ … a_N` (fewer if truncated).
    pub coefficients: Vec<c64>,
    pub order: usize,
    pub requested_order: usize,
    /// `|Im aₙ|` for `n = 1..=order`.
    pub reality_residuals: Vec<f64>,
    /// `|a_{n+1}/a_n|` for `n = 1..order`.
    pub growth_ratios: Vec<f64>,
    /// `|⟨u_L, u_R⟩|` of the unit left and right eigenvectors.
    pub biorthogonality: f64,
    pub warnings: Vec<String>,
}

impl RspeSeries {
    /// `[a₀, a₁, …]`.
    pub fn all_coefficients(&self) -> Vec<c64> {
        std::iter::once(self.base_eigenvalue).chain(self.coefficients.iter().copied()).collect()
    }

    /// Truncated sum `Σ_{n≤N} aₙ εⁿ`.
    pub fn evaluate(&self, epsilon: f64) -> c64 {
        self.all_coefficients().iter().rev().fold(c64::new(0.0, 0.0), |acc, a| acc * epsilon + a)
    }

    pub fn from_coefficients(a: &[c64]) -> Self {
        let coefficients = a[1..].to_vec();
        RspeSeries {
            base_eigenvalue: a[0],
            order: coefficients.len(),
            requested_order: coefficients.len(),
            reality_residuals: coefficients.iter().map(|z| z.im.abs()).collect(),
            growth_ratios: growth_ratios(&coefficients),
            coefficients,
            biorthogonality: 1.0,
            warnings: Vec::new(),
        }
    }
}

fn growth_ratios(c: &[c64]) -> Vec<f64> {
    c.windows(2).map(|w| w[1].norm() / w[0].norm()).collect()
}

/// `W = H(1) − H(0)` on the given discretization (affine families only).
pub fn perturbation_matrix(
    family: &OperatorFamily,
    disc: Option<&Discretization>,
) -> Result<CMat, PerturbationError> {
    match &family.variant {
        Variant::Matrix(m) => Ok(m.w.clone()),
        Variant::Schrodinger(SchrodingerFamily::DoubleWell) => Err(PerturbationError::NotAffine),
        Variant::Schrodinger(SchrodingerFamily::Affine { .. }) => {
            let h1 = discretize::build(family, 1.0, disc)?;
            let h0 = discretize::build(family, 0.0, disc)?;
            Ok(&h1.matrix - &h0.matrix)
        }
    }
}

fn edge_fraction(v: &[c64], method: Method) -> f64 {
    let n = v.len();
    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outer: f64 = match method {
        Method::OscillatorBasis => v[n - n.div_ceil(10)..].iter().map(|z| z.norm_sqr()).sum(),
        Method::FiniteDifference => {
            let m = n.div_ceil(20);
            v[..m].iter().chain(&v[n - m..]).map(|z| z.norm_sqr()).sum()
        }
        Method::Matrix => 0.0,
    };
    (outer / total).sqrt()
}

/// Non-selfadjoint Rayleigh–Schrödinger coefficients of `H₀ + εW` at the
/// simple eigenvalue of `H₀` nearest `e_j`.
///
/// With right/left eigenvectors `ψ₀`, `φ₀` normalized so `⟨φ₀, ψ₀⟩ = 1`:
/// `aₙ = ⟨φ₀, W ψₙ₋₁⟩` and `ψₙ = S(−W ψₙ₋₁ + Σ_{k=1}^{n−1} a_k ψ_{n−k})`,
/// where the reduced resolvent `S` is applied through the deflated matrix
/// `H₀ − E + σ ψ₀ φ₀*`.
pub fn rspe_coefficients(
    h0: &DiscretizedOperator,
    w: MatRef<'_, c64>,
    e_j: c64,
    order: usize,
) -> Result<RspeSeries, PerturbationError> {
    let n = h0.size();
    if w.nrows() != n || w.ncols() != n {
        return Err(PerturbationError::BadParameter(format!("W is {}×{}, H0 is {n}×{n}", w.nrows(), w.ncols())));
    }
    if order == 0 {
        return Err(PerturbationError::BadParameter("order must be positive".into()));
    }
    let values = eigensolve::eigenvalues(h0)?;
    let lambda = values
        .iter()
        .copied()
        .min_by(|a, b| (a - e_j).norm().total_cmp(&(b - e_j).norm()))
        .expect("nonempty spectrum");
    let scale = lambda.norm().max(1.0);
    let cluster_tol = 1e-6 * scale;
    let cluster = values.iter().filter(|z| (*z - lambda).norm() <= cluster_tol).count();
    let outside = values
        .iter()
        .map(|z| (z - lambda).norm())
        .filter(|&d| d > cluster_tol)
        .fold(f64::INFINITY, f64::min);
    let radius = if outside.is_finite() { 0.5 * outside } else { scale };
    if (lambda - e_j).norm() > radius {
        return Err(PerturbationError::NotAnEigenvalue { target: e_j, nearest: lambda });
    }
    if cluster > 1 {
        let mult = eigensolve::multiplicities(h0.matrix.as_ref(), lambda, eigensolve::DEFAULT_RANK_TOL, radius)?;
        return Err(PerturbationError::Defective { value: lambda, m_g: mult.m_g, m_a: mult.m_a });
    }
    let contour = Contour::new(lambda, radius, 64)?;
    let proj = spectral_projection_op(h0, &contour)?;
    if proj.rank != 1 {
        return Err(PerturbationError::Defective { value: lambda, m_g: 1, m_a: proj.rank });
    }

    let (mut psi0, _) = super::branches::inverse_iteration_vector(h0, lambda);
    linalg::normalize(&mut psi0);
    let mut phi0 = eigensolve::left_eigenvector(h0.matrix.as_ref(), h0.tridiagonal.as_ref(), lambda, &psi0);
    let overlap = dot(&phi0, &psi0);
    let biorthogonality = overlap.norm();
    if biorthogonality < BIORTHOGONALITY_THRESHOLD {
        return Err(PerturbationError::NearDefective { value: lambda, overlap: biorthogonality });
    }
    let s = overlap.conj().inv();
    for z in phi0.iter_mut() {
        *z *= s;
    }

    let sigma = c64::new(h0.matrix.norm_l2().max(1.0), 0.0);
    let deflated = Mat::from_fn(n, n, |i, j| {
        let d = if i == j { lambda } else { c64::new(0.0, 0.0) };
        h0.matrix[(i, j)] - d + sigma * psi0[i] * phi0[j].conj()
    });
    let lu = deflated.partial_piv_lu();
    let project_out = |x: &mut [c64]| {
        let c = dot(&phi0, x);
        for (xi, p) in x.iter_mut().zip(&psi0) {
            *xi -= c * p;
        }
    };

    let mut psi: Vec<Vec<c64>> = vec![psi0.clone()];
    let mut coefficients: Vec<c64> = Vec::with_capacity(order);
    let mut warnings = Vec::new();
    for m in 1..=order {
        let wpsi = linalg::matvec(w, &psi[m - 1]);
        let a = dot(&phi0, &wpsi);
        if !(a.re.is_finite() && a.im.is_finite()) {
            warnings.push(format!("coefficient a{m} is not finite; series truncated at order {}", m - 1));
            break;
        }
        coefficients.push(a);
        if m == order {
            break;
        }
        let mut rhs: Vec<c64> = wpsi.iter().map(|z| -z).collect();
        for k in 1..m {
            let ak = coefficients[k - 1];
            for (r, p) in rhs.iter_mut().zip(&psi[m - k]) {
                *r += ak * p;
            }
        }
        project_out(&mut rhs);
        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let mut next = linalg::column(lu.solve(&b).as_ref(), 0);
        project_out(&mut next);
        let edge = edge_fraction(&next, h0.method);
        if edge > EDGE_FRACTION_LIMIT {
            warnings.push(format!(
                "correction ψ{m} has edge fraction {edge:.2e} > {EDGE_FRACTION_LIMIT:.0e}; series truncated at order {m} (discretization too small for higher orders)"
            ));
            psi.push(next);
            // aₘ₊₁ would depend on ψₘ, which the truncation already distorts.
            break;
        }
        psi.push(next);
    }
    Ok(RspeSeries {
        base_eigenvalue: lambda,
        order: coefficients.len(),
        requested_order: order,
        reality_residuals: coefficients.iter().map(|z| z.im.abs()).collect(),
        growth_ratios: growth_ratios(&coefficients),
        coefficients,
        biorthogonality,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    RealSeries,
    NotReal,
}

impl SeriesVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesVerdict::RealSeries => "real_series",
            SeriesVerdict::NotReal => "not_real",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesRealityCheck {
    pub verdict: SeriesVerdict,
    pub max_imaginary: f64,
    pub tolerance: f64,
    pub growth_ratios: Vec<f64>,
    pub ratios_increasing: bool,
}

/// `real_series` iff `max_n |Im aₙ| ≤ tol` (over `n ≥ 0`).
pub fn rspe_reality_check(series: &RspeSeries, tol: f64) -> SeriesRealityCheck {
    let max_imaginary = series.all_coefficients().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let verdict = if max_imaginary <= tol { SeriesVerdict::RealSeries } else { SeriesVerdict::NotReal };
    SeriesRealityCheck {
        verdict,
        max_imaginary,
        tolerance: tol,
        ratios_increasing: series.growth_ratios.windows(2).all(|w| w[1] > w[0]),
        growth_ratios: series.growth_ratios.clone(),
    }
}

/// `max_n |aₙ − bₙ|` over the common orders (including `a₀`).
pub fn coefficient_drift(a: &RspeSeries, b: &RspeSeries) -> f64 {
    a.all_coefficients().iter().zip(b.all_coefficients()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::BasisSpec;
    use crate::linalg::cplx;
    use crate::potentials::catalog;

    #[test]
    fn two_by_two_series() {
        let h = Mat::from_fn(2, 2, |i, j| if i == j { cplx(2.0 * i as f64, 0.0) } else { cplx(0.0, 0.0) });
        let w = Mat::from_fn(2, 2, |i, j| if i != j { cplx(1.0, 0.0) } else { cplx(0.0, 0.0) });
        let op = DiscretizedOperator::from_matrix(h, discretize::Parity::Reversal(2));
        let s = rspe_coefficients(&op, w.as_ref(), cplx(0.0, 0.0), 4).unwrap();
        // 1 − √(1+ε²) = −ε²/2 + ε⁴/8 − …
        let expect = [0.0, -0.5, 0.0, 0.125];
        for (a, e) in s.coefficients.iter().zip(expect) {
            assert!((a - cplx(e, 0.0)).norm() < 1e-14, "{a} vs {e}");
        }
    }

    #[test]
    fn jordan_point_is_defective() {
        let fam = catalog("jordan2x2").unwrap();
        let op = discretize::build(&fam, 0.0, None).unwrap();
        let w = perturbation_matrix(&fam, None).unwrap();
        let e = rspe_coefficients(&op, w.as_ref(), cplx(0.0, 0.0), 2);
        assert!(matches!(e, Err(PerturbationError::Defective { m_g: 1, m_a: 2, .. })), "{e:?}");
    }

    #[test]
    fn quartic_ground_state_first_order() {
        let fam = catalog("harmonic_quartic").unwrap();
        let disc = Discretization::Basis(BasisSpec::new(60, 1.0).unwrap());
        let op = discretize::build(&fam, 0.0, Some(&disc)).unwrap();
        let w = perturbation_matrix(&fam, Some(&disc)).unwrap();
        let s = rspe_coefficients(&op, w.as_ref(), cplx(1.0, 0.0), 4).unwrap();
        assert!((s.base_eigenvalue - cplx(1.0, 0.0)).norm() < 1e-12);
        let exact = [0.75, -21.0 / 16.0, 333.0 / 64.0, -30885.0 / 1024.0];
        for (a, e) in s.coefficients.iter().zip(exact) {
            assert!((a - cplx(e, 0.0)).norm() < 1e-9 * e.abs(), "{a} vs {e}");
        }
    }

    #[test]
    fn imaginary_coefficient_is_not_real() {
        let s = RspeSeries::from_coefficients(&[cplx(1.0, 0.0), cplx(0.0, 1.0)]);
        assert_eq!(rspe_reality_check(&s, 1e-8).verdict, SeriesVerdict::NotReal);
        let s = RspeSeries::from_coefficients(&[cplx(1.0, 0.0), cplx(0.5, 0.0)]);
        assert_eq!(rspe_reality_check(&s, 1e-8).verdict, SeriesVerdict::RealSeries);
    }
}
