//! Contour spectral projections and stability verdicts, numerical ranges
//! (full and restricted to `|x| > n`), resolvent bounds, and the explicit
//! reality bound for parity-structured perturbations.

mod contour;
mod numrange;
mod theorem21;

pub use contour::{
    projector_distance, spectral_projection, spectral_projection_op, spectral_projection_with, stability_check, Contour,
    ProjectionOptions, ProjectionResult, Projector, StabilityReport, StabilityRow, StabilityVerdict, DECAY_RATIO,
    DENSE_PROJECTION_LIMIT,
};
pub use numrange::{
    distance_at_infinity, distance_sweep, energy_constant, numerical_range_boundary, numerical_range_matrix,
    resolvent_bound_audit, resolvent_norm, DistanceBound, DistanceSweep, EnergyConstant, NumericalRangeBoundary,
    ResolventAudit, ResolventSample, Restriction, Side,
};
pub use theorem21::{theorem21_bound, EigenspaceParity, Theorem21Bound, Theorem21Violation};

use faer::c64;
use thiserror::Error;

use crate::discretize::DiscretizeError;
use crate::eigensolve::EigenError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("invalid contour: {0}")]
    BadContour(String),
    #[error("contour passes within {distance:.3e} of the eigenvalue {eigenvalue}")]
    ContourTooClose { eigenvalue: c64, distance: f64 },
    #[error("contour quadrature did not converge (node-doubling change {estimate:.3e} at {nodes} nodes); an eigenvalue is probably close to the contour")]
    QuadratureNotConverged { estimate: f64, nodes: usize },
    #[error("no eigenvalue of H(0) inside the circle of radius {radius} around {center}")]
    NotAnEigenvalue { center: c64, radius: f64 },
    #[error("epsilons must be a strictly decreasing sequence of positive numbers")]
    NotDecreasing,
    #[error("at least 8 angles are required, got {0}")]
    TooFewAngles(usize),
    #[error("restricted subspace is empty")]
    EmptyRestriction,
    #[error("coordinate restrictions need a finite-difference grid")]
    RestrictionUnavailable,
    #[error("reality-bound hypothesis violated: {0}")]
    Hypothesis(Theorem21Violation),
    #[error("shift {shift} leaves a nonpositive denominator {denominator}")]
    ShiftInsufficient { shift: f64, denominator: f64 },
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}
