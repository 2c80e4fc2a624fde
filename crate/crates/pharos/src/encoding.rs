//! Canonical byte encoding.
//!
//! Every hashed or signed structure serializes the same way: fields
//! concatenated in declaration order, variable-length fields prefixed with
//! their big-endian u64 length, integers big-endian fixed width. Digests are
//! taken over these bytes, so the encoding is part of the protocol.

use crate::crypto::{Digest, Seed, DIGEST_LEN};

/// Decoding failure: truncated input, trailing bytes, or a field that
/// violates its declared bounds.
#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("input truncated while reading {0}")]
    Truncated(&'static str),
    #[error("trailing bytes after a complete value")]
    TrailingBytes,
    #[error("length prefix {len} for {field} exceeds remaining input")]
    BadLength { field: &'static str, len: u64 },
    #[error("invalid tag {tag} for {field}")]
    BadTag { field: &'static str, tag: u8 },
}

/// Canonical encoder. A thin Vec wrapper so call sites read as field lists.
#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Encoder {
        Encoder::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    /// Fixed-width field: the caller guarantees the width.
    pub fn fixed(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    /// Variable-length field with a u64 length prefix.
    pub fn var(&mut self, bytes: &[u8]) -> &mut Self {
        self.u64(bytes.len() as u64);
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn digest(&mut self, d: &Digest) -> &mut Self {
        self.fixed(&d.0)
    }

    pub fn seed(&mut self, s: &Seed) -> &mut Self {
        self.fixed(&s.0)
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.buf
    }
}

/// Canonical decoder over a byte slice.
pub struct Decoder<'a> {
    rest: &'a [u8],
}

impl<'a> Decoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Decoder<'a> {
        Decoder { rest: bytes }
    }

    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], DecodeError> {
        if self.rest.len() < n {
            return Err(DecodeError::Truncated(field));
        }
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        Ok(head)
    }

    pub fn u8(&mut self, field: &'static str) -> Result<u8, DecodeError> {
        Ok(self.take(1, field)?[0])
    }

    pub fn u64(&mut self, field: &'static str) -> Result<u64, DecodeError> {
        let b = self.take(8, field)?;
        Ok(u64::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn fixed(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], DecodeError> {
        self.take(n, field)
    }

    pub fn var(&mut self, field: &'static str) -> Result<&'a [u8], DecodeError> {
        let len = self.u64(field)?;
        if len as usize > self.rest.len() {
            return Err(DecodeError::BadLength { field, len });
        }
        self.take(len as usize, field)
    }

    pub fn digest(&mut self, field: &'static str) -> Result<Digest, DecodeError> {
        let b = self.take(DIGEST_LEN, field)?;
        Ok(Digest(b.try_into().unwrap()))
    }

    pub fn seed(&mut self, field: &'static str) -> Result<Seed, DecodeError> {
        let b = self.take(DIGEST_LEN, field)?;
        Ok(Seed(b.try_into().unwrap()))
    }

    /// Assert the input is fully consumed.
    pub fn finish(self) -> Result<(), DecodeError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(DecodeError::TrailingBytes)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rest.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_mixed_fields() {
        let mut e = Encoder::new();
        e.u8(3).u64(0xdead_beef).var(b"payload").fixed(&[9; 4]);
        let bytes = e.finish();

        let mut d = Decoder::new(&bytes);
        assert_eq!(d.u8("tag").unwrap(), 3);
        assert_eq!(d.u64("n").unwrap(), 0xdead_beef);
        assert_eq!(d.var("payload").unwrap(), b"payload");
        assert_eq!(d.fixed(4, "pad").unwrap(), &[9; 4]);
        d.finish().unwrap();
    }

    #[test]
    fn truncation_and_trailing_are_errors() {
        let mut e = Encoder::new();
        e.u64(5);
        let bytes = e.finish();

        let mut d = Decoder::new(&bytes[..4]);
        assert_eq!(d.u64("n"), Err(DecodeError::Truncated("n")));

        let d2 = Decoder::new(&bytes);
        assert_eq!(d2.finish(), Err(DecodeError::TrailingBytes));

        // A length prefix larger than the remaining input is rejected.
        let mut e = Encoder::new();
        e.u64(1000);
        let bytes = e.finish();
        let mut d = Decoder::new(&bytes);
        assert!(matches!(d.var("v"), Err(DecodeError::BadLength { .. })));
    }
}
