use faer::{c64, Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::StabilityError;
use crate::discretize::DiscretizedOperator;
use crate::linalg::{self, dot, hermitian_max_eigenpair, matvec, normalize, CMat, ShiftedSolver};
use crate::tridiag::{hermitian_eigen, Tridiagonal};

/// Coordinate subspace on which Rayleigh quotients are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "cut", rename_all = "snake_case")]
pub enum Restriction {
    Full,
    /// `|x| > n`
    AbsGreater(f64),
    /// `x > n`
    Greater(f64),
    /// `x < −n`
    Less(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Both,
    Plus,
    Minus,
}

impl Side {
    pub fn restriction(self, cut: f64) -> Restriction {
        match self {
            Side::Both => Restriction::AbsGreater(cut),
            Side::Plus => Restriction::Greater(cut),
            Side::Minus => Restriction::Less(cut),
        }
    }
}

/// Support data of the numerical range: for each angle θ, the largest
/// eigenvalue `h(θ)` of the Hermitian part of `e^{iθ}H` and the Rayleigh
/// quotient of its eigenvector, a point of the boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericalRangeBoundary {
    pub angles: Vec<f64>,
    pub support_values: Vec<f64>,
    pub support_points: Vec<c64>,
    pub restriction: Restriction,
    pub subspace_dim: usize,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

impl NumericalRangeBoundary {
    /// Convex hull of the support points, counter-clockwise.
    pub fn hull(&self) -> Vec<c64> {
        let mut pts: Vec<(f64, f64)> = self.support_points.iter().map(|z| (z.re, z.im)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup();
        if pts.len() < 3 {
            return pts.into_iter().map(|(x, y)| c64::new(x, y)).collect();
        }
        let mut lower: Vec<(f64, f64)> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<(f64, f64)> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        lower.into_iter().map(|(x, y)| c64::new(x, y)).collect()
    }

    /// Distance from `z` to the convex hull of the support points (an inner
    /// approximation of the range); 0 inside.
    pub fn inner_distance(&self, z: c64) -> f64 {
        let hull = self.hull();
        let p = (z.re, z.im);
        match hull.len() {
            0 => f64::INFINITY,
            1 => (z - hull[0]).norm(),
            2 => segment_distance(p, (hull[0].re, hull[0].im), (hull[1].re, hull[1].im)),
            m => {
                let inside = (0..m).all(|k| {
                    let a = hull[k];
                    let b = hull[(k + 1) % m];
                    cross((a.re, a.im), (b.re, b.im), p) >= 0.0
                });
                if inside {
                    0.0
                } else {
                    (0..m)
                        .map(|k| {
                            let a = hull[k];
                            let b = hull[(k + 1) % m];
                            segment_distance(p, (a.re, a.im), (b.re, b.im))
                        })
                        .fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    /// `max_θ (Re(e^{iθ}z) − h(θ))⁺`: a lower bound on the distance from `z`
    /// to the true range, exact in the sampled directions.
    pub fn outer_distance(&self, z: c64) -> f64 {
        self.angles
            .iter()
            .zip(&self.support_values)
            .map(|(&t, &h)| (c64::new(t.cos(), t.sin()) * z).re - h)
            .fold(0.0, f64::max)
    }

    /// Every support point lies in every supporting half-plane (up to `tol`).
    pub fn is_convex(&self, tol: f64) -> bool {
        let scale = self.support_points.iter().map(|z| z.norm()).fold(1.0, f64::max);
        self.support_points.iter().all(|&p| {
            self.angles
                .iter()
                .zip(&self.support_values)
                .all(|(&t, &h)| (c64::new(t.cos(), t.sin()) * p).re <= h + tol * scale)
        })
    }

    pub fn min_real_part(&self) -> f64 {
        // h(π) = max Re(−w) = −min Re w.
        self.angles
            .iter()
            .zip(&self.support_values)
            .filter(|(&t, _)| (t - std::f64::consts::PI).abs() < 1e-12)
            .map(|(_, &h)| -h)
            .next()
            .unwrap_or_else(|| self.support_points.iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
    }
}

fn selected_indices(op: &DiscretizedOperator, restriction: Restriction) -> Result<Vec<usize>, StabilityError> {
    if restriction == Restriction::Full {
        return Ok((0..op.size()).collect());
    }
    let grid = op.grid().ok_or(StabilityError::RestrictionUnavailable)?;
    let keep = |x: f64| match restriction {
        Restriction::Full => true,
        Restriction::AbsGreater(n) => x.abs() > n,
        Restriction::Greater(n) => x > n,
        Restriction::Less(n) => x < -n,
    };
    Ok(grid.nodes().into_iter().enumerate().filter(|&(_, x)| keep(x)).map(|(i, _)| i).collect())
}

/// With `tri` present the dense argument is ignored.
fn boundary_of(h: MatRef<'_, c64>, tri: Option<&Tridiagonal>, n_angles: usize, restriction: Restriction) -> NumericalRangeBoundary {
    let n = tri.map_or(h.nrows(), |t| t.len());
    let angles: Vec<f64> = (0..n_angles).map(|j| 2.0 * std::f64::consts::PI * j as f64 / n_angles as f64).collect();
    let results: Vec<(f64, c64)> = angles
        .par_iter()
        .map(|&theta| {
            let (lam, u) = match tri {
                Some(t) => hermitian_max_eigenpair(h, Some(&t.rotated_hermitian_part(theta))),
                None => {
                    let e = c64::new(theta.cos(), theta.sin());
                    let k = Mat::from_fn(n, n, |i, j| (e * h[(i, j)] + (e * h[(j, i)]).conj()) * 0.5);
                    hermitian_max_eigenpair(k.as_ref(), None)
                }
            };
            let hu = match tri {
                Some(t) => t.matvec(&u),
                None => matvec(h, &u),
            };
            (lam, dot(&u, &hu))
        })
        .collect();
    NumericalRangeBoundary {
        angles,
        support_values: results.iter().map(|r| r.0).collect(),
        support_points: results.iter().map(|r| r.1).collect(),
        restriction,
        subspace_dim: n,
    }
}

/// Support points of the numerical range of `H`, optionally restricted to
/// grid coordinates beyond a cut (vectors vanishing for `|x| ≤ n`, etc.).
pub fn numerical_range_boundary(
    op: &DiscretizedOperator,
    n_angles: usize,
    restriction: Restriction,
) -> Result<NumericalRangeBoundary, StabilityError> {
    if n_angles < 8 {
        return Err(StabilityError::TooFewAngles(n_angles));
    }
    let idx = selected_indices(op, restriction)?;
    if idx.is_empty() {
        return Err(StabilityError::EmptyRestriction);
    }
    if idx.len() == op.size() {
        return Ok(boundary_of(op.matrix.as_ref(), op.tridiagonal.as_ref(), n_angles, restriction));
    }
    match &op.tridiagonal {
        Some(t) => {
            let sub = t.principal(&idx);
            if sub.len() < 3 {
                Ok(boundary_of(sub.to_dense().as_ref(), None, n_angles, restriction))
            } else {
                Ok(boundary_of(op.matrix.as_ref(), Some(&sub), n_angles, restriction))
            }
        }
        None => {
            let m = Mat::from_fn(idx.len(), idx.len(), |i, j| op.matrix[(idx[i], idx[j])]);
            Ok(boundary_of(m.as_ref(), None, n_angles, restriction))
        }
    }
}

pub fn numerical_range_matrix(h: MatRef<'_, c64>, n_angles: usize) -> Result<NumericalRangeBoundary, StabilityError> {
    if n_angles < 8 {
        return Err(StabilityError::TooFewAngles(n_angles));
    }
    if h.nrows() == 0 {
        return Err(StabilityError::EmptyRestriction);
    }
    let tri = Tridiagonal::detect(h);
    Ok(boundary_of(h, tri.as_ref(), n_angles, Restriction::Full))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventSample {
    pub z: c64,
    pub resolvent_norm: Option<f64>,
    /// Lower bound on `dist(z, N)` from the support function.
    pub distance: f64,
    pub distance_bound_ok: Option<bool>,
    /// `‖(z−H)⁻¹‖ ≤ |Re z|⁻¹`, checked when `Re z < 0` and `N ⊂ {Re ≥ 0}`.
    pub half_plane_bound_ok: Option<bool>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventAudit {
    pub samples: Vec<ResolventSample>,
    pub slack: f64,
    pub all_pass: bool,
    pub checked: usize,
}

/// `‖(z − H)⁻¹‖₂`: exact SVD for small matrices, power iteration on
/// `R*R` through a factorization of `z − H` otherwise.
pub fn resolvent_norm(h: MatRef<'_, c64>, tri: Option<&Tridiagonal>, z: c64) -> f64 {
    let n = h.nrows();
    if n <= linalg::DENSE_SVD_LIMIT {
        let s = linalg::shifted_min_singular_value(h, z);
        return if s > 0.0 { 1.0 / s } else { f64::INFINITY };
    }
    let solver = ShiftedSolver::new(h, tri, z);
    let mut x: Vec<c64> = linalg::column(linalg::gaussian_matrix(n, 1, 17).as_ref(), 0);
    normalize(&mut x);
    let mut est = 0.0;
    for _ in 0..60 {
        let y = solver.solve_vec(&x);
        let ym = Mat::from_fn(n, 1, |i, _| y[i]);
        let w = solver.solve_adjoint_mat(ym.as_ref());
        let mut w = linalg::column(w.as_ref(), 0);
        let nw = normalize(&mut w);
        let prev = est;
        est = nw.sqrt();
        x = w;
        if (est - prev).abs() <= 1e-12 * est {
            break;
        }
    }
    est
}

/// Checks `‖(z−H)⁻¹‖ ≤ (1+slack)/dist(z, N)` at each sample outside the range.
pub fn resolvent_bound_audit(
    h: MatRef<'_, c64>,
    z_samples: &[c64],
    slack: f64,
    n_angles: usize,
) -> Result<ResolventAudit, StabilityError> {
    let boundary = numerical_range_matrix(h, n_angles)?;
    let tri = Tridiagonal::detect(h);
    let right_half = boundary.min_real_part() >= 0.0;
    let samples: Vec<ResolventSample> = z_samples
        .iter()
        .map(|&z| {
            let d = boundary.outer_distance(z);
            if d <= 0.0 {
                return ResolventSample {
                    z,
                    resolvent_norm: None,
                    distance: d,
                    distance_bound_ok: None,
                    half_plane_bound_ok: None,
                    skipped: Some("inside the numerical-range hull".into()),
                };
            }
            let rn = resolvent_norm(h, tri.as_ref(), z);
            let half = (z.re < 0.0 && right_half).then(|| rn <= (1.0 + slack) / z.re.abs());
            ResolventSample {
                z,
                resolvent_norm: Some(rn),
                distance: d,
                distance_bound_ok: Some(rn <= (1.0 + slack) / d),
                half_plane_bound_ok: half,
                skipped: None,
            }
        })
        .collect();
    let checked = samples.iter().filter(|s| s.skipped.is_none()).count();
    let all_pass = samples
        .iter()
        .all(|s| s.distance_bound_ok.unwrap_or(true) && s.half_plane_bound_ok.unwrap_or(true));
    Ok(ResolventAudit { samples, slack, all_pass, checked })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceBound {
    pub z: c64,
    pub n_cut: f64,
    pub side: Side,
    pub bound: f64,
    pub subspace_dim: usize,
}

const DISTANCE_ANGLES: usize = 128;

/// Lower bound on `d_n(z, ε)`: the distance from `z` to the numerical range
/// of `H` restricted to vectors supported beyond the cut.
pub fn distance_at_infinity(op: &DiscretizedOperator, z: c64, n_cut: f64, side: Side) -> Result<DistanceBound, StabilityError> {
    if op.grid().is_none() {
        return Err(StabilityError::RestrictionUnavailable);
    }
    let b = numerical_range_boundary(op, DISTANCE_ANGLES, side.restriction(n_cut))?;
    Ok(DistanceBound { z, n_cut, side, bound: b.outer_distance(z), subspace_dim: b.subspace_dim })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceSweep {
    pub side: Side,
    pub cuts: Vec<f64>,
    pub bounds: Vec<f64>,
    pub nondecreasing: bool,
    pub strictly_increasing: bool,
}

pub fn distance_sweep(op: &DiscretizedOperator, z: c64, cuts: &[f64], side: Side) -> Result<DistanceSweep, StabilityError> {
    let bounds = cuts
        .iter()
        .map(|&c| distance_at_infinity(op, z, c, side).map(|d| d.bound))
        .collect::<Result<Vec<_>, _>>()?;
    let scale = bounds.iter().fold(1.0f64, |m, b| m.max(b.abs()));
    Ok(DistanceSweep {
        side,
        cuts: cuts.to_vec(),
        nondecreasing: bounds.windows(2).all(|w| w[1] >= w[0] - 1e-12 * scale),
        strictly_increasing: bounds.windows(2).all(|w| w[1] > w[0]),
        bounds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyConstant {
    /// `max ⟨u,p²u⟩ / (Re⟨u,Hu⟩ + shift + 1)` over the sampled unit vectors.
    pub a: f64,
    /// Added so that the real part of the potential is nonnegative on the grid.
    pub shift: f64,
    pub random_samples: usize,
    pub eigenvectors_used: usize,
}

/// Estimates the constant in `⟨u,p²u⟩ ≤ a(Re⟨u,Hu⟩ + ⟨u,u⟩)` on a grid operator.
pub fn energy_constant(op: &DiscretizedOperator, samples: usize, seed: u64) -> Result<EnergyConstant, StabilityError> {
    let grid = op.grid().ok_or(StabilityError::RestrictionUnavailable)?;
    let t = op.tridiagonal.as_ref().ok_or(StabilityError::RestrictionUnavailable)?;
    let n = t.len();
    let h = grid.spacing();
    let k = 1.0 / (h * h);
    let kinetic = Tridiagonal {
        sub: vec![c64::new(-k, 0.0); n - 1],
        diag: vec![c64::new(2.0 * k, 0.0); n],
        sup: vec![c64::new(-k, 0.0); n - 1],
    };
    let min_re = t.diag.iter().map(|d| d.re - 2.0 * k).fold(f64::INFINITY, f64::min);
    let shift = (-min_re).max(0.0);
    let mut vectors: Vec<Vec<c64>> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let mut v: Vec<c64> = (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c64::new(re, im)
            })
            .collect();
        normalize(&mut v);
        vectors.push(v);
    }
    let mut eigenvectors_used = 0;
    let eigvecs: Option<CMat> = if t.is_hermitian() {
        hermitian_eigen(t, true).1
    } else if n <= linalg::DENSE_SVD_LIMIT {
        crate::eigensolve::eig(op).ok().map(|s| {
            let cols: Vec<Vec<c64>> = s.pairs.into_iter().map(|p| p.right_vector).collect();
            linalg::from_columns(&cols, n)
        })
    } else {
        None
    };
    if let Some(m) = eigvecs {
        for j in 0..m.ncols() {
            let mut v = linalg::column(m.as_ref(), j);
            normalize(&mut v);
            vectors.push(v);
            eigenvectors_used += 1;
        }
    }
    let mut a = 0.0f64;
    for u in &vectors {
        let kin = dot(u, &kinetic.matvec(u)).re;
        let den = dot(u, &t.matvec(u)).re + shift + 1.0;
        if !(den > 0.0) {
            return Err(StabilityError::ShiftInsufficient { shift, denominator: den });
        }
        a = a.max(kin / den);
    }
    Ok(EnergyConstant { a, shift, random_samples: samples, eigenvectors_used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{build_finite_difference, Grid};
    use crate::linalg::cplx;
    use crate::potentials::{catalog, OperatorFamily, PotentialSpec, PotentialTerm};

    fn diag01() -> CMat {
        Mat::from_fn(2, 2, |i, j| if i == j && i == 1 { cplx(1.0, 0.0) } else { cplx(0.0, 0.0) })
    }

    #[test]
    fn normal_matrix_range_is_a_segment() {
        let b = numerical_range_matrix(diag01().as_ref(), 64).unwrap();
        for p in &b.support_points {
            assert!(p.im.abs() < 1e-14 && p.re > -1e-14 && p.re < 1.0 + 1e-14);
        }
        assert_eq!(b.hull().len(), 2);
        assert!(b.inner_distance(cplx(0.5, 0.0)) < 1e-14);
        assert!(b.is_convex(1e-12));
    }

    #[test]
    fn jordan_range_is_the_unit_disk() {
        let j = catalog("jordan2x2").unwrap();
        let b = numerical_range_matrix(j.matrix_family().unwrap().h0.as_ref(), 64).unwrap();
        for p in &b.support_points {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resolvent_examples() {
        let a = resolvent_bound_audit(diag01().as_ref(), &[cplx(-1.0, 0.0), cplx(0.5, 0.0)], 1e-6, 64).unwrap();
        assert!(a.all_pass);
        assert!((a.samples[0].resolvent_norm.unwrap() - 1.0).abs() < 1e-14);
        assert!((a.samples[0].distance - 1.0).abs() < 1e-14);
        assert!(a.samples[1].skipped.is_some());

        let j = catalog("jordan2x2").unwrap();
        let mut h = j.matrix_family().unwrap().h0.clone();
        for i in 0..2 {
            h[(i, i)] += cplx(2.0, 0.0);
        }
        let a = resolvent_bound_audit(h.as_ref(), &[cplx(-0.5, 0.0)], 1e-6, 64).unwrap();
        assert_eq!(a.samples[0].half_plane_bound_ok, Some(true));
        assert!(a.all_pass);
    }

    #[test]
    fn harmonic_distance_grows_with_cut() {
        let f = OperatorFamily::schrodinger(
            PotentialSpec::new(vec![PotentialTerm::monomial(1.0, 2)], vec![]).unwrap(),
            PotentialSpec::zero(),
            1.0,
        );
        let op = build_finite_difference(&f, 0.0, Grid::new(10.0, 500).unwrap()).unwrap();
        let s = distance_sweep(&op, cplx(0.0, 0.0), &[2.0, 4.0, 6.0, 8.0], Side::Both).unwrap();
        assert!(s.strictly_increasing);
        for (b, n) in s.bounds.iter().zip([2.0f64, 4.0, 6.0, 8.0]) {
            assert!(*b >= n * n - 1.0, "{b} {n}");
        }
        let far = distance_at_infinity(&op, cplx(-50.0, 3.0), 0.0, Side::Both).unwrap();
        assert!(far.bound >= 50.0 - 1e-9);
    }

    #[test]
    fn energy_constant_examples() {
        let f = OperatorFamily::schrodinger(
            PotentialSpec::new(vec![PotentialTerm::monomial(1.0, 2)], vec![]).unwrap(),
            PotentialSpec::zero(),
            1.0,
        );
        let op = build_finite_difference(&f, 0.0, Grid::new(8.0, 200).unwrap()).unwrap();
        let e = energy_constant(&op, 20, 1).unwrap();
        assert!(e.a <= 1.0 && e.a > 0.0 && e.shift == 0.0);
        let cubic = build_finite_difference(&catalog("cubic_i").unwrap(), 0.0, Grid::new(8.0, 200).unwrap()).unwrap();
        let e = energy_constant(&cubic, 20, 1).unwrap();
        assert!(e.a <= 1.0 && e.a > 0.9);
    }

    #[test]
    fn restriction_needs_grid_and_nonempty_subspace() {
        let f = catalog("cubic_i").unwrap();
        let op = build_finite_difference(&f, 0.0, Grid::new(5.0, 100).unwrap()).unwrap();
        assert!(matches!(
            numerical_range_boundary(&op, 16, Restriction::Greater(6.0)),
            Err(StabilityError::EmptyRestriction)
        ));
        let b = numerical_range_boundary(&op, 16, Restriction::Greater(2.0)).unwrap();
        assert!(b.subspace_dim < 100);
    }
}
