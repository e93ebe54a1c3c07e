use faer::c64;
use serde::Serialize;

use super::PerturbationError;
use crate::discretize::{self, Discretization};
use crate::eigensolve;
use crate::linalg::{self, dot};
use crate::potentials::OperatorFamily;

/// Points sampled across the interval before bisecting.
pub const PRESCAN_POINTS: usize = 16;
/// `|⟨v₁, v₂⟩|` at or above which a transition is classified as exceptional.
pub const COALESCENCE_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairState {
    SeparatedReal,
    ConjugatePair,
    Degenerate,
    /// Neither real nor mutually conjugate.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    Exceptional,
    Crossing,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalPoint {
    pub epsilon: f64,
    /// Final bracket width.
    pub bracket: (f64, f64),
    pub kind: TransitionKind,
    /// `|λ₁ − λ₂|` at `epsilon`.
    pub gap: f64,
    /// `|⟨v₁, v₂⟩|` of the unit right eigenvectors at `epsilon`.
    pub coalescence: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSample {
    pub epsilon: f64,
    pub state: PairState,
    pub values: [c64; 2],
}

struct Probe<'a> {
    family: &'a OperatorFamily,
    disc: Option<&'a Discretization>,
    pair: [usize; 2],
}

impl Probe<'_> {
    fn values(&self, eps: f64) -> Result<[c64; 2], PerturbationError> {
        let op = discretize::build(self.family, eps, self.disc)?;
        let v = eigensolve::eigenvalues(&op)?;
        let get = |i: usize| {
            v.get(i).copied().ok_or_else(|| {
                PerturbationError::BadParameter(format!("pair index {i} exceeds the dimension {}", v.len()))
            })
        };
        Ok([get(self.pair[0])?, get(self.pair[1])?])
    }

    fn sample(&self, eps: f64) -> Result<StateSample, PerturbationError> {
        let values = self.values(eps)?;
        Ok(StateSample { epsilon: eps, state: classify(values), values })
    }
}

/// State of an eigenvalue pair with tolerance `1e-12·max(1, |λ|)`.
pub fn classify([a, b]: [c64; 2]) -> PairState {
    let tol = 1e-12 * a.norm().max(b.norm()).max(1.0);
    if (a - b).norm() <= tol {
        PairState::Degenerate
    } else if a.im.abs() <= tol && b.im.abs() <= tol {
        PairState::SeparatedReal
    } else if (a - b.conj()).norm() <= tol {
        PairState::ConjugatePair
    } else {
        PairState::Other
    }
}

fn side(s: PairState) -> Option<bool> {
    match s {
        PairState::SeparatedReal => Some(false),
        PairState::ConjugatePair => Some(true),
        _ => None,
    }
}

/// Bisects for the parameter where the eigenvalue pair (indices into the
/// sorted spectrum) changes between separated-real and conjugate.
///
/// A pre-scan over [`PRESCAN_POINTS`] points rejects intervals with more
/// than one transition, returning the scan as a subdivision report. Points
/// where the pair is degenerate count as belonging to the `lo` side.
pub fn locate_exceptional(
    family: &OperatorFamily,
    disc: Option<&Discretization>,
    pair: [usize; 2],
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<ExceptionalPoint, PerturbationError> {
    if !(lo < hi) || !(tol > 0.0) || !lo.is_finite() || !hi.is_finite() {
        return Err(PerturbationError::BadParameter("need lo < hi and tol > 0".into()));
    }
    let probe = Probe { family, disc, pair };
    let first = probe.sample(lo)?;
    let last = probe.sample(hi)?;
    let (lo_side, hi_side) = match (side(first.state), side(last.state)) {
        (Some(a), Some(b)) if a != b => (a, b),
        _ => return Err(PerturbationError::NoTransition { lo: first, hi: last }),
    };
    let mut scan = vec![first];
    for i in 1..PRESCAN_POINTS - 1 {
        scan.push(probe.sample(lo + (hi - lo) * i as f64 / (PRESCAN_POINTS - 1) as f64)?);
    }
    scan.push(last);
    let sides: Vec<bool> = scan.iter().filter_map(|s| side(s.state)).collect();
    let changes = sides.windows(2).filter(|w| w[0] != w[1]).count();
    if changes != 1 || scan.iter().any(|s| s.state == PairState::Other) {
        return Err(PerturbationError::NonMonotone(scan));
    }
    let (mut a, mut b) = (lo, hi);
    // Narrow to the bracket found by the scan.
    for w in scan.windows(2) {
        let (s0, s1) = (side(w[0].state).unwrap_or(lo_side), side(w[1].state).unwrap_or(lo_side));
        if s0 != s1 {
            a = w[0].epsilon;
            b = w[1].epsilon;
        }
    }
    let mut iterations = 0;
    while b - a > tol && iterations < 200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let s = side(probe.sample(mid)?.state).unwrap_or(lo_side);
        if s == hi_side {
            b = mid;
        } else {
            a = mid;
        }
        iterations += 1;
    }
    let eps = 0.5 * (a + b);
    let values = probe.values(eps)?;
    let op = discretize::build(family, eps, disc)?;
    let coalescence = if op.size() <= linalg::DENSE_SVD_LIMIT {
        let spec = eigensolve::eig(&op)?;
        let v = |i: usize| spec.pairs[pair[i]].right_vector.clone();
        let (v1, v2) = (v(0), v(1));
        dot(&v1, &v2).norm() / (linalg::norm2(&v1) * linalg::norm2(&v2))
    } else {
        let (v1, _) = super::branches::inverse_iteration_vector(&op, values[0]);
        let (v2, _) = super::branches::inverse_iteration_vector(&op, values[1]);
        dot(&v1, &v2).norm()
    };
    let kind = if coalescence >= COALESCENCE_THRESHOLD { TransitionKind::Exceptional } else { TransitionKind::Crossing };
    Ok(ExceptionalPoint { epsilon: eps, bracket: (a, b), kind, gap: (values[0] - values[1]).norm(), coalescence, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::catalog;

    #[test]
    fn jordan_roots() {
        let fam = catalog("jordan2x2").unwrap();
        let p = locate_exceptional(&fam, None, [0, 1], -1.0, 0.5, 1e-12).unwrap();
        assert!(p.epsilon.abs() < 1e-10 && p.kind == TransitionKind::Exceptional);
        let p = locate_exceptional(&fam, None, [0, 1], -3.0, -1.0, 1e-12).unwrap();
        assert!((p.epsilon + 2.0).abs() < 1e-10 && p.kind == TransitionKind::Exceptional);
    }

    #[test]
    fn gap_threshold() {
        let fam = catalog("gap2x2").unwrap();
        let p = locate_exceptional(&fam, None, [0, 1], 0.5, 1.5, 1e-12).unwrap();
        assert!((p.epsilon - 1.0).abs() < 1e-10);
        assert!(p.coalescence > 0.99);
    }

    #[test]
    fn degenerate_pair_has_no_transition() {
        let fam = catalog("degenerate2x2").unwrap();
        let e = locate_exceptional(&fam, None, [0, 1], 0.0, 1.0, 1e-10);
        assert!(matches!(e, Err(PerturbationError::NoTransition { .. })));
    }
}
