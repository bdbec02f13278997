use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;

use crate::encoding::{EncodedNumber, Encoding};
use crate::error::{PaillierError, Result};
use crate::keys::{PrivateKey, PublicKey};

/// Residue modulo `N^2` tagged with the fixed-point exponent of its plaintext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub(crate) residue: BigUint,
    pub exponent: i32,
}

impl Ciphertext {
    pub fn residue(&self) -> &BigUint {
        &self.residue
    }

    pub fn from_residue(residue: BigUint, exponent: i32, pk: &PublicKey) -> Result<Self> {
        if residue >= *pk.n_squared() {
            return Err(PaillierError::Malformed("ciphertext residue not below N^2".into()));
        }
        Ok(Self { residue, exponent })
    }
}

/// `E(m) = g^m r^N mod N^2`; with `g = N + 1`, `g^m = 1 + mN mod N^2`.
pub fn encrypt<R: Rng + ?Sized>(m: &EncodedNumber, pk: &PublicKey, rng: &mut R) -> Result<Ciphertext> {
    if m.mantissa >= *pk.n() {
        return Err(PaillierError::Overflow("mantissa not below N".into()));
    }
    let n2 = pk.n_squared();
    let gm = (BigUint::one() + &m.mantissa * pk.n()) % n2;
    let r = pk.random_unit(rng);
    let rn = r.modpow(pk.n(), n2);
    Ok(Ciphertext { residue: (gm * rn) % n2, exponent: m.exponent })
}

pub fn decrypt(c: &Ciphertext, sk: &PrivateKey) -> EncodedNumber {
    EncodedNumber { mantissa: sk.decrypt_residue(&c.residue), exponent: c.exponent }
}

/// Decryption through `L(c^lambda) mu`, without the CRT shortcut.
pub fn decrypt_textbook(c: &Ciphertext, sk: &PrivateKey, pk: &PublicKey) -> EncodedNumber {
    EncodedNumber { mantissa: sk.decrypt_residue_textbook(&c.residue, pk), exponent: c.exponent }
}

/// `E(m1) E(m2) = E(m1 + m2)`. Exponents must already agree.
pub fn add_cipher(c1: &Ciphertext, c2: &Ciphertext, pk: &PublicKey) -> Result<Ciphertext> {
    if c1.exponent != c2.exponent {
        return Err(PaillierError::ExponentMismatch(c1.exponent, c2.exponent));
    }
    Ok(Ciphertext { residue: (&c1.residue * &c2.residue) % pk.n_squared(), exponent: c1.exponent })
}

/// `E(m)^k = E(k m)`. Negative `k` multiplies by the residue `N - |k|`.
pub fn scalar_mul(c: &Ciphertext, k: i64, pk: &PublicKey) -> Result<Ciphertext> {
    let magnitude = BigUint::from(k.unsigned_abs());
    if magnitude >= pk.n() / 3u32 {
        return Err(PaillierError::Overflow(format!("scalar {k} outside the N/3 band")));
    }
    let exp = if k < 0 { pk.n() - magnitude } else { magnitude };
    let residue = if exp.is_zero() { BigUint::one() } else { c.residue.modpow(&exp, pk.n_squared()) };
    Ok(Ciphertext { residue, exponent: c.exponent })
}

/// Encryption of zero at `exponent` with fresh randomness; the neutral start of a sum.
pub fn encrypt_zero<R: Rng + ?Sized>(exponent: i32, pk: &PublicKey, rng: &mut R) -> Ciphertext {
    let zero = EncodedNumber { mantissa: BigUint::zero(), exponent };
    encrypt(&zero, pk, rng).expect("zero is always in range")
}

/// Clips each value to `[-bound, bound]`, encodes and encrypts it.
pub fn encrypt_values<R: Rng + ?Sized>(
    values: &[f64],
    bound: f64,
    encoding: &Encoding,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<Vec<Ciphertext>> {
    values
        .iter()
        .map(|&x| {
            let e = encoding.encode(x.clamp(-bound, bound), pk)?;
            encrypt(&e, pk, rng)
        })
        .collect()
}

pub fn decrypt_values(cs: &[Ciphertext], encoding: &Encoding, sk: &PrivateKey, pk: &PublicKey) -> Result<Vec<f64>> {
    cs.iter().map(|c| encoding.decode(&decrypt(c, sk), pk)).collect()
}

/// Element-wise homomorphic sum `acc[i] <- acc[i] * cs[i]`.
pub fn add_assign_values(acc: &mut [Ciphertext], cs: &[Ciphertext], pk: &PublicKey) -> Result<()> {
    if acc.len() != cs.len() {
        return Err(PaillierError::Malformed(format!("adding {} ciphertexts to {}", cs.len(), acc.len())));
    }
    for (a, c) in acc.iter_mut().zip(cs) {
        if a.exponent != c.exponent {
            return Err(PaillierError::ExponentMismatch(a.exponent, c.exponent));
        }
        a.residue = (&a.residue * &c.residue) % pk.n_squared();
    }
    Ok(())
}
