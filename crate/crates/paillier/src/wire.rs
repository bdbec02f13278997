//! Byte serialization: a version byte followed by fields, each big-endian.
//! Integers are written as a `u32` length prefix and their big-endian bytes;
//! exponents as a big-endian `i32`.

use num_bigint::BigUint;

use crate::cipher::Ciphertext;
use crate::encoding::EncodedNumber;
use crate::error::{PaillierError, Result};
use crate::keys::PublicKey;

pub const WIRE_VERSION: u8 = 1;

fn put_uint(out: &mut Vec<u8>, v: &BigUint) {
    let bytes = v.to_bytes_be();
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(&bytes);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Result<Self> {
        match bytes.first() {
            Some(&WIRE_VERSION) => Ok(Self { bytes, pos: 1 }),
            Some(v) => Err(PaillierError::Malformed(format!("unsupported version {v}"))),
            None => Err(PaillierError::Malformed("empty input".into())),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| PaillierError::Malformed("truncated input".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn uint(&mut self) -> Result<BigUint> {
        let len = u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize;
        Ok(BigUint::from_bytes_be(self.take(len)?))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn finish(self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(PaillierError::Malformed("trailing bytes".into()))
        }
    }
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![WIRE_VERSION];
        put_uint(&mut out, self.n());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes)?;
        let n = r.uint()?;
        r.finish()?;
        PublicKey::from_modulus(n).map_err(|e| PaillierError::Malformed(e.to_string()))
    }
}

impl Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![WIRE_VERSION];
        out.extend_from_slice(&self.exponent.to_be_bytes());
        put_uint(&mut out, &self.residue);
        out
    }

    pub fn from_bytes(bytes: &[u8], pk: &PublicKey) -> Result<Self> {
        let mut r = Reader::new(bytes)?;
        let exponent = r.i32()?;
        let residue = r.uint()?;
        r.finish()?;
        Ciphertext::from_residue(residue, exponent, pk)
    }
}

impl EncodedNumber {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![WIRE_VERSION];
        out.extend_from_slice(&self.exponent.to_be_bytes());
        put_uint(&mut out, &self.mantissa);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes)?;
        let exponent = r.i32()?;
        let mantissa = r.uint()?;
        r.finish()?;
        Ok(EncodedNumber { mantissa, exponent })
    }
}
