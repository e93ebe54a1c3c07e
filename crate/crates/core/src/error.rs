use thiserror::Error;

use crate::discretize::DiscretizeError;
use crate::eigensolve::EigenError;
use crate::perturbation::PerturbationError;
use crate::potentials::PotentialError;
use crate::stability::StabilityError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
