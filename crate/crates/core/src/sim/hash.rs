//! Canonical byte stream and FNV-1a 64 hashing of world state.

use crate::geometry::{quantize_um, Vec2};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Writer for the canonical serialization. Integers are 8 bytes little
/// endian, reals are micrometers as i64, bools one byte, strings a length
/// prefix followed by UTF-8 bytes.
#[derive(Debug, Default, Clone)]
pub struct Canonical {
    pub bytes: Vec<u8>,
}

impl Canonical {
    pub fn new() -> Canonical {
        Canonical::default()
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.bytes.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn real(&mut self, v: f64) -> &mut Self {
        self.i64(quantize_um(v))
    }

    pub fn vec2(&mut self, v: Vec2) -> &mut Self {
        self.real(v.x).real(v.y)
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.bytes.push(v as u8);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.bytes.push(v);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u64(s.len() as u64);
        self.bytes.extend_from_slice(s.as_bytes());
        self
    }

    pub fn opt_str(&mut self, s: Option<&str>) -> &mut Self {
        match s {
            Some(s) => self.bool(true).str(s),
            None => self.bool(false),
        }
    }

    pub fn finish(&self) -> u64 {
        fnv1a64(&self.bytes)
    }
}
