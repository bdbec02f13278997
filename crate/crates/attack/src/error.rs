use mvmf_core::MvmfError;
use mvmf_federation::FedError;
use mvmf_solvers::SolverError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error(transparent)]
    Model(#[from] MvmfError),
    #[error(transparent)]
    Federation(#[from] FedError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("observation: {0}")]
    Observation(String),
    #[error("invalid attack input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, AttackError>;
