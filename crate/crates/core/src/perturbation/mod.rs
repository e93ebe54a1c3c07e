//! ε-branch tracking, non-selfadjoint Rayleigh–Schrödinger series and
//! exceptional-point location.

mod branches;
mod exceptional;
mod rspe;

pub use branches::{
    track_branches, uniform_grid, Branch, BranchFlags, TrackOptions, TrackReport, WindowEvent, ROUNDOFF_FACTOR,
};
pub use exceptional::{
    classify, locate_exceptional, ExceptionalPoint, PairState, StateSample, TransitionKind, COALESCENCE_THRESHOLD,
    PRESCAN_POINTS,
};
pub use rspe::{
    coefficient_drift, perturbation_matrix, rspe_coefficients, rspe_reality_check, RspeSeries, SeriesRealityCheck,
    SeriesVerdict, BIORTHOGONALITY_THRESHOLD, EDGE_FRACTION_LIMIT,
};

use faer::c64;
use thiserror::Error;

use crate::discretize::DiscretizeError;
use crate::eigensolve::EigenError;
use crate::stability::StabilityError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbationError {
    #[error("invalid ε grid: {0}")]
    BadGrid(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("eigenvalue {value} is defective (m_g = {m_g}, m_a = {m_a}): a Jordan block, as in the jordan2x2 family at ε = 0; no nondegenerate series exists")]
    Defective { value: c64, m_g: usize, m_a: usize },
    #[error("eigenvalue {value} is near-defective: |⟨u_L, u_R⟩| = {overlap:.3e}")]
    NearDefective { value: c64, overlap: f64 },
    #[error("{target} is not an isolated eigenvalue of H0 (nearest {nearest})")]
    NotAnEigenvalue { target: c64, nearest: c64 },
    #[error("the family is not affine in ε, so W = H(1) − H(0) is not its perturbation")]
    NotAffine,
    #[error("no real/conjugate transition: {:?} at ε = {} and {:?} at ε = {}", lo.state, lo.epsilon, hi.state, hi.epsilon)]
    NoTransition { lo: StateSample, hi: StateSample },
    #[error("pair state is not monotone on the interval; subdivision: {}", describe(.0))]
    NonMonotone(Vec<StateSample>),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

impl PartialEq for StateSample {
    fn eq(&self, o: &Self) -> bool {
        self.epsilon == o.epsilon && self.state == o.state && self.values == o.values
    }
}

fn describe(s: &[StateSample]) -> String {
    s.iter().map(|x| format!("{:.6}:{:?}", x.epsilon, x.state)).collect::<Vec<_>>().join(", ")
}
