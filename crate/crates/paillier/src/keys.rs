use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::One;
use rand::Rng;

use crate::error::{PaillierError, Result};
use crate::prime::{mod_inverse, random_prime};

/// Smallest accepted key size.
pub const MIN_KEY_BITS: u64 = 64;

/// `(N, g)` with `g = N + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) n: BigUint,
    pub(crate) n_squared: BigUint,
    pub(crate) g: BigUint,
}

impl PublicKey {
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        if n.bits() < 8 || n.is_even() {
            return Err(PaillierError::InvalidPrimes("modulus must be odd and at least 8 bits".into()));
        }
        let n_squared = &n * &n;
        let g = &n + 1u32;
        Ok(Self { n, n_squared, g })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// Uniform `r` in `[1, N)` coprime to `N`.
    pub(crate) fn random_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct CrtHalf {
    prime: BigUint,
    prime_squared: BigUint,
    /// `L_p(g^(p-1) mod p^2)^-1 mod p`
    h: BigUint,
}

impl CrtHalf {
    fn new(prime: &BigUint, g: &BigUint) -> Option<Self> {
        let prime_squared = prime * prime;
        let pm1 = prime - 1u32;
        let l = (g.modpow(&pm1, &prime_squared) - 1u32) / prime;
        let h = mod_inverse(&(l % prime), prime)?;
        Some(Self { prime: prime.clone(), prime_squared, h })
    }

    fn decrypt(&self, c: &BigUint) -> BigUint {
        let pm1 = &self.prime - 1u32;
        let u = c.modpow(&pm1, &self.prime_squared);
        let l = (u - 1u32) / &self.prime;
        (l * &self.h) % &self.prime
    }
}

/// `(lambda, mu)` plus the CRT form used for fast decryption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateKey {
    pub(crate) lambda: BigUint,
    pub(crate) mu: BigUint,
    p_half: CrtHalf,
    q_half: CrtHalf,
    /// `p^-1 mod q`
    p_inv_q: BigUint,
}

impl PrivateKey {
    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    /// CRT decryption of a raw residue.
    pub(crate) fn decrypt_residue(&self, c: &BigUint) -> BigUint {
        let mp = self.p_half.decrypt(c);
        let mq = self.q_half.decrypt(c);
        // Garner: m = mp + p * ((mq - mp) p^-1 mod q)
        let q = &self.q_half.prime;
        let diff = (mq + q - (&mp % q)) % q;
        let t = (diff * &self.p_inv_q) % q;
        mp + &self.p_half.prime * t
    }

    /// Textbook decryption `L(c^lambda mod N^2) mu mod N`.
    pub(crate) fn decrypt_residue_textbook(&self, c: &BigUint, pk: &PublicKey) -> BigUint {
        let u = c.modpow(&self.lambda, &pk.n_squared);
        let l = (u - 1u32) / &pk.n;
        (l * &self.mu) % &pk.n
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

impl KeyPair {
    /// Builds a key pair from two distinct primes. No primality test is run;
    /// this is the hook for hand-checkable parameters.
    pub fn from_primes(p: &BigUint, q: &BigUint) -> Result<Self> {
        if p == q {
            return Err(PaillierError::InvalidPrimes("p and q must differ".into()));
        }
        let n = p * q;
        let pm1 = p - 1u32;
        let qm1 = q - 1u32;
        if !n.gcd(&(&pm1 * &qm1)).is_one() {
            return Err(PaillierError::InvalidPrimes("gcd(pq, (p-1)(q-1)) != 1".into()));
        }
        let public = PublicKey::from_modulus(n)?;
        let lambda = pm1.lcm(&qm1);
        let u = public.g.modpow(&lambda, &public.n_squared);
        let l = (u - 1u32) / &public.n;
        let mu = mod_inverse(&l, &public.n).ok_or_else(|| PaillierError::InvalidPrimes("L(g^lambda) not invertible".into()))?;
        let p_half = CrtHalf::new(p, &public.g).ok_or_else(|| PaillierError::InvalidPrimes("CRT setup failed for p".into()))?;
        let q_half = CrtHalf::new(q, &public.g).ok_or_else(|| PaillierError::InvalidPrimes("CRT setup failed for q".into()))?;
        let p_inv_q = mod_inverse(&(p % q), q).ok_or_else(|| PaillierError::InvalidPrimes("p not invertible mod q".into()))?;
        Ok(Self {
            public,
            private: PrivateKey { lambda, mu, p_half, q_half, p_inv_q },
        })
    }
}

/// Generates a key pair whose modulus has exactly `keysize` bits.
pub fn keygen<R: Rng + ?Sized>(keysize: u64, rng: &mut R) -> Result<KeyPair> {
    if keysize < MIN_KEY_BITS || keysize % 2 != 0 {
        return Err(PaillierError::KeySize(keysize));
    }
    loop {
        let p = random_prime(keysize / 2, rng);
        let q = random_prime(keysize / 2, rng);
        if p == q {
            continue;
        }
        match KeyPair::from_primes(&p, &q) {
            Ok(kp) => {
                debug_assert_eq!(kp.public.bits(), keysize);
                return Ok(kp);
            }
            Err(PaillierError::InvalidPrimes(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

