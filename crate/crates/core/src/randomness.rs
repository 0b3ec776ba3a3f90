//! Keyed pseudorandom stream shared by the embedder and the detector.
//!
//! The value at position `i` is the first 64 bits of
//! `HMAC-SHA-256(key_material, i as 8-byte big-endian)`, read as a binary
//! fraction in `[0, 1)`. Every block embedding and every detection attempt
//! consumes the stream from position 0.

use hmac::{Hmac, KeyInit, Mac};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::key::SecretKey;

type HmacSha256 = Hmac<Sha256>;

/// A real in `[0, 1)` stored as a 64-bit binary fraction (`value / 2^64`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitReal(pub u64);

impl UnitReal {
    pub const HALF: UnitReal = UnitReal(1 << 63);

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 18_446_744_073_709_551_616.0
    }

    /// Nearest representable value to `x`, clamped into `[0, 1)`.
    pub fn from_f64(x: f64) -> UnitReal {
        if x <= 0.0 || x.is_nan() {
            return UnitReal(0);
        }
        let scaled = x * 18_446_744_073_709_551_616.0;
        if scaled >= u64::MAX as f64 {
            UnitReal(u64::MAX)
        } else {
            UnitReal(scaled as u64)
        }
    }

    pub fn is_below_half(self) -> bool {
        self.0 >> 63 == 0
    }
}

/// KeyGen: derives key material deterministically from caller-provided
/// entropy. The key has as many bits as the entropy supplied.
pub fn keygen(lambda: u32, entropy: &[u8]) -> Result<SecretKey> {
    if lambda < 8 {
        return Err(Error::InvalidLambda { lambda, min: 8 });
    }
    if entropy.len() * 8 < lambda as usize {
        return Err(Error::InsufficientEntropy {
            needed: lambda as usize,
            got: entropy.len() * 8,
        });
    }
    let mut material = Vec::with_capacity(entropy.len());
    let mut counter = 0u32;
    while material.len() < entropy.len() {
        let mut h = Sha256::new();
        h.update(b"ditsmark/keygen");
        h.update(counter.to_be_bytes());
        h.update(entropy);
        material.extend_from_slice(&h.finalize());
        counter += 1;
    }
    material.truncate(entropy.len());
    SecretKey::new(material, lambda)
}

/// Keyed PRF over stream positions.
#[derive(Clone)]
pub struct Prf {
    mac: HmacSha256,
}

impl Prf {
    pub fn new(key: &SecretKey) -> Self {
        let mac = HmacSha256::new_from_slice(key.material()).expect("HMAC accepts any key length");
        Self { mac }
    }

    pub fn at(&self, index: u64) -> UnitReal {
        let mut mac = self.mac.clone();
        mac.update(&index.to_be_bytes());
        let tag = mac.finalize().into_bytes();
        let mut head = [0u8; 8];
        head.copy_from_slice(&tag[..8]);
        UnitReal(u64::from_be_bytes(head))
    }
}

/// `r` at stream position `index` for key `sk`.
pub fn unit_real_at(sk: &SecretKey, index: u64) -> UnitReal {
    Prf::new(sk).at(index)
}

/// Sequential cursor over the keyed stream.
#[derive(Clone)]
pub struct RandomStream {
    prf: Prf,
    index: u64,
}

impl RandomStream {
    pub fn new(key: &SecretKey) -> Self {
        Self {
            prf: Prf::new(key),
            index: 0,
        }
    }

    pub fn position(&self) -> u64 {
        self.index
    }

    pub fn restart(&mut self) {
        self.index = 0;
    }
}

impl Iterator for RandomStream {
    type Item = UnitReal;

    fn next(&mut self) -> Option<UnitReal> {
        let r = self.prf.at(self.index);
        self.index += 1;
        Some(r)
    }
}

/// Memoized prefix of the stream for one key.
///
/// Holds the reals themselves and the packed indicator bits `1(r_i < 1/2)`
/// that the per-bit detector XORs against received bits.
#[derive(Clone)]
pub struct KeyStream {
    prf: Prf,
    reals: Vec<UnitReal>,
    below_half: BitString,
}

impl KeyStream {
    pub fn new(key: &SecretKey) -> Self {
        Self {
            prf: Prf::new(key),
            reals: Vec::new(),
            below_half: BitString::new(),
        }
    }

    /// Makes sure the first `len` positions are cached.
    pub fn ensure(&mut self, len: usize) {
        while self.reals.len() < len {
            let r = self.prf.at(self.reals.len() as u64);
            self.reals.push(r);
            self.below_half.push(r.is_below_half() as u8);
        }
    }

    pub fn cached_len(&self) -> usize {
        self.reals.len()
    }

    /// `r_index`, computing and caching it if necessary.
    pub fn real(&mut self, index: usize) -> UnitReal {
        self.ensure(index + 1);
        self.reals[index]
    }

    pub(crate) fn below_half(&self) -> &BitString {
        &self.below_half
    }
}
