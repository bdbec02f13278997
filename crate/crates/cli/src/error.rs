use mvmf_attack::AttackError;
use mvmf_core::MvmfError;
use mvmf_data::DataError;
use mvmf_federation::FedError;
use mvmf_paillier::PaillierError;
use thiserror::Error;

/// Process exit code on success.
pub const EXIT_OK: i32 = 0;
/// Bad configuration, missing or malformed input files.
pub const EXIT_INPUT: i32 = 2;
/// Non-finite values, singular systems, solver or encoding failures.
pub const EXIT_NUMERIC: i32 = 3;
/// Anything else (output I/O, protocol violations).
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Other(_) => EXIT_OTHER,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl From<MvmfError> for CliError {
    fn from(e: MvmfError) -> Self {
        match e {
            MvmfError::NonFinite(_) | MvmfError::Singular(_) => CliError::Numeric(e.to_string()),
            MvmfError::Protocol(_) => CliError::Other(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<PaillierError> for CliError {
    fn from(e: PaillierError) -> Self {
        match e {
            PaillierError::KeySize(_) | PaillierError::InvalidPrimes(_) | PaillierError::Malformed(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<FedError> for CliError {
    fn from(e: FedError) -> Self {
        match e {
            FedError::Model(m) => m.into(),
            FedError::Crypto(c) => c.into(),
            FedError::Config(_) => CliError::Input(e.to_string()),
            FedError::Protocol(_) => CliError::Other(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Model(m) => m.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::Model(m) => m.into(),
            AttackError::Federation(f) => f.into(),
            AttackError::Solver(_) => CliError::Numeric(e.to_string()),
            AttackError::Observation(_) | AttackError::Invalid(_) => CliError::Input(e.to_string()),
        }
    }
}

impl From<mvmf_solvers::SolverError> for CliError {
    fn from(e: mvmf_solvers::SolverError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("i/o: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(MvmfError::NonFinite("p")).exit_code(), EXIT_NUMERIC);
        assert_eq!(CliError::from(MvmfError::InvalidData("x".into())).exit_code(), EXIT_INPUT);
        let missing = DataError::Io {
            path: "ratings.dat".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        };
        let err = CliError::from(missing);
        assert_eq!(err.exit_code(), EXIT_INPUT);
        assert!(err.to_string().contains("ratings.dat"));
        assert_eq!(CliError::from(FedError::Model(MvmfError::Singular("m"))).exit_code(), EXIT_NUMERIC);
        assert_eq!(CliError::from(PaillierError::Overflow("sum".into())).exit_code(), EXIT_NUMERIC);
        assert_eq!(CliError::from(AttackError::Invalid("u".into())).exit_code(), EXIT_INPUT);
    }
}
