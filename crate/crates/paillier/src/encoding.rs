//! Fixed-point encoding of signed reals as residues modulo `N`.
//!
//! `x` becomes the integer `round(x * base^-exponent)`; negatives wrap to
//! `N - |m|`. Decoding reads residues up to `N/3` as positive, from `2N/3` as
//! negative and rejects the middle third, which leaves headroom for sums.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{PaillierError, Result};
use crate::keys::PublicKey;

pub const DEFAULT_BASE: u32 = 16;
/// `16^-7 ~ 3.7e-9`, so the rounding error is below `1e-8`.
pub const DEFAULT_EXPONENT: i32 = -7;

/// Base and (non-positive) exponent of the fixed-point scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoding {
    pub base: u32,
    pub exponent: i32,
}

impl Default for Encoding {
    fn default() -> Self {
        Self { base: DEFAULT_BASE, exponent: DEFAULT_EXPONENT }
    }
}

impl Encoding {
    /// Quantization step `base^exponent`.
    pub fn precision(&self) -> f64 {
        (self.base as f64).powi(self.exponent)
    }

    fn scale(&self) -> f64 {
        (self.base as f64).powi(-self.exponent)
    }

    /// Largest magnitude whose encoding stays in the positive band `[0, N/3]`.
    pub fn max_magnitude(&self, pk: &PublicKey) -> f64 {
        let third = pk.n() / 3u32;
        third.to_f64().unwrap_or(f64::MAX) / self.scale()
    }

    /// Whether `n_terms` values each clipped to `bound` can be summed without
    /// leaving the positive or negative band.
    pub fn has_headroom(&self, pk: &PublicKey, n_terms: usize, bound: f64) -> bool {
        n_terms as f64 * bound < self.max_magnitude(pk)
    }

    pub fn encode(&self, x: f64, pk: &PublicKey) -> Result<EncodedNumber> {
        if !x.is_finite() {
            return Err(PaillierError::OutOfRange(x));
        }
        let scaled = (x * self.scale()).round();
        let magnitude = BigInt::from_f64(scaled.abs()).ok_or(PaillierError::OutOfRange(x))?;
        let third = BigInt::from(pk.n() / 3u32);
        if magnitude > third {
            return Err(PaillierError::OutOfRange(x));
        }
        let magnitude = magnitude.to_biguint().expect("non-negative");
        let mantissa = if scaled < 0.0 && !magnitude.is_zero() { pk.n() - magnitude } else { magnitude };
        Ok(EncodedNumber { mantissa, exponent: self.exponent })
    }

    pub fn decode(&self, e: &EncodedNumber, pk: &PublicKey) -> Result<f64> {
        if e.exponent != self.exponent {
            return Err(PaillierError::ExponentMismatch(e.exponent, self.exponent));
        }
        let signed = e.signed_mantissa(pk)?;
        let v = signed.to_f64().ok_or_else(|| PaillierError::Overflow("mantissa not representable".into()))?;
        Ok(v / self.scale())
    }
}

/// Mantissa residue with its scale exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedNumber {
    pub mantissa: BigUint,
    pub exponent: i32,
}

impl EncodedNumber {
    /// Integer plaintext with exponent 0 (used for raw homomorphism checks).
    pub fn integer(m: BigUint) -> Self {
        Self { mantissa: m, exponent: 0 }
    }

    /// Signed integer value using the `N/3`, `2N/3` split.
    pub fn signed_mantissa(&self, pk: &PublicKey) -> Result<BigInt> {
        let n = pk.n();
        if self.mantissa >= *n {
            return Err(PaillierError::Overflow("mantissa not below N".into()));
        }
        let third = n / 3u32;
        if self.mantissa <= third {
            Ok(BigInt::from(self.mantissa.clone()))
        } else if self.mantissa >= n - &third {
            Ok(BigInt::from_biguint(Sign::Minus, n - &self.mantissa))
        } else {
            Err(PaillierError::Overflow("mantissa in the guard band between N/3 and 2N/3".into()))
        }
    }

    pub fn is_negative(&self, pk: &PublicKey) -> bool {
        self.signed_mantissa(pk).map(|v| v.is_negative()).unwrap_or(false)
    }
}
