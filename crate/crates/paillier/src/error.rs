use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PaillierError {
    #[error("key size {0} bits is below the 64-bit floor or not even")]
    KeySize(u64),
    #[error("invalid primes: {0}")]
    InvalidPrimes(String),
    #[error("plaintext overflow: {0}")]
    Overflow(String),
    #[error("exponent mismatch: {0} vs {1}")]
    ExponentMismatch(i32, i32),
    #[error("value {0} outside the encodable range")]
    OutOfRange(f64),
    #[error("malformed serialized data: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, PaillierError>;
