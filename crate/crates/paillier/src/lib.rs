//! Paillier encryption with `g = N + 1`, CRT decryption and a base-16
//! fixed-point encoding of signed reals.
//!
//! Keys are immutable and `Sync`; callers supply the randomness source.

mod cipher;
mod encoding;
mod error;
mod keys;
mod prime;
mod wire;

pub use cipher::{
    add_assign_values, add_cipher, decrypt, decrypt_textbook, decrypt_values, encrypt, encrypt_values, encrypt_zero,
    scalar_mul, Ciphertext,
};
pub use encoding::{EncodedNumber, Encoding, DEFAULT_BASE, DEFAULT_EXPONENT};
pub use error::{PaillierError, Result};
pub use keys::{keygen, KeyPair, PrivateKey, PublicKey, MIN_KEY_BITS};
pub use num_bigint::BigUint;
pub use prime::{is_probable_prime, random_prime};
pub use wire::WIRE_VERSION;
