use mvmf_core::MvmfError;
use mvmf_paillier::PaillierError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FedError {
    #[error(transparent)]
    Model(#[from] MvmfError),
    #[error("encryption: {0}")]
    Crypto(#[from] PaillierError),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, FedError>;
