//! Packed bit strings and the bit-level primitives the rest of the crate is
//! built on.
//!
//! Bits are stored most-significant-first inside 64-bit words, so bit `i`
//! of a string lives at word `i / 64`, shift `63 - i % 64`. Indices in the
//! API are 0-based: the `b_i` of the usual 1-based notation is `get(i - 1)`
//! and the inclusive substring `b_{i:j}` is `slice(i - 1..j)`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(WORD)),
            len: 0,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    /// Builds a string from a slice of 0/1 values; any non-zero byte is a 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        bits.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Returns bit `index` (0-based) as 0 or 1.
    ///
    /// Panics if `index >= len`.
    pub fn get(&self, index: usize) -> u8 {
        assert!(index < self.len, "bit index {index} out of range {}", self.len);
        ((self.words[index / WORD] >> (WORD - 1 - index % WORD)) & 1) as u8
    }

    pub fn set(&mut self, index: usize, bit: u8) {
        assert!(index < self.len, "bit index {index} out of range {}", self.len);
        let mask = 1u64 << (WORD - 1 - index % WORD);
        if bit != 0 {
            self.words[index / WORD] |= mask;
        } else {
            self.words[index / WORD] &= !mask;
        }
    }

    pub fn flip(&mut self, index: usize) {
        assert!(index < self.len, "bit index {index} out of range {}", self.len);
        self.words[index / WORD] ^= 1u64 << (WORD - 1 - index % WORD);
    }

    pub fn push(&mut self, bit: u8) {
        if self.len % WORD == 0 {
            self.words.push(0);
        }
        self.len += 1;
        if bit != 0 {
            let i = self.len - 1;
            self.words[i / WORD] |= 1u64 << (WORD - 1 - i % WORD);
        }
    }

    pub fn extend_from(&mut self, other: &BitString) {
        if self.len % WORD == 0 {
            // Word-aligned fast path.
            self.words.truncate(self.len / WORD);
            self.words.extend_from_slice(&other.words);
            self.len += other.len;
            return;
        }
        for bit in other.iter() {
            self.push(bit);
        }
    }

    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.len = len;
        self.words.truncate(len.div_ceil(WORD));
        self.clear_tail();
    }

    /// Concatenation `self || other`.
    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = BitString::with_capacity(self.len + other.len);
        out.extend_from(self);
        out.extend_from(other);
        out
    }

    /// Copies the half-open range of bits into a new string.
    pub fn slice(&self, range: Range<usize>) -> BitString {
        assert!(
            range.start <= range.end && range.end <= self.len,
            "slice {range:?} out of range {}",
            self.len
        );
        let len = range.end - range.start;
        let mut out = BitString::zeros(len);
        let mut pos = 0;
        while pos < len {
            out.words[pos / WORD] = self.word_at(range.start + pos);
            pos += WORD;
        }
        out.clear_tail();
        out
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// The 64 bits starting at `pos`, first bit in the most significant
    /// position; bits past the end read as zero.
    pub(crate) fn word_at(&self, pos: usize) -> u64 {
        if pos >= self.len {
            return 0;
        }
        let idx = pos / WORD;
        let shift = pos % WORD;
        let hi = self.words[idx];
        if shift == 0 {
            return hi;
        }
        let lo = self.words.get(idx + 1).copied().unwrap_or(0);
        (hi << shift) | (lo >> (WORD - shift))
    }

    fn clear_tail(&mut self) {
        let keep = self.len % WORD;
        if keep != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= !0u64 << (WORD - keep);
            }
        }
    }

    /// ASCII '0'/'1' rendering followed by a newline.
    pub fn to_text(&self) -> String {
        let mut s = self.to_string();
        s.push('\n');
        s
    }

    /// Parses the ASCII bit format; surrounding whitespace (including the
    /// trailing newline) is ignored.
    pub fn parse_text(text: &str) -> Result<BitString> {
        text.trim().parse()
    }
}

/// Number of ones in `a ⊕ b` within `[a_off, a_off + len)` and
/// `[b_off, b_off + len)`. Both ranges must lie inside their strings.
pub(crate) fn xor_popcount(a: &BitString, a_off: usize, b: &BitString, b_off: usize, len: usize) -> usize {
    debug_assert!(a_off + len <= a.len && b_off + len <= b.len);
    let mut count = 0usize;
    let mut done = 0usize;
    while done + WORD <= len {
        count += (a.word_at(a_off + done) ^ b.word_at(b_off + done)).count_ones() as usize;
        done += WORD;
    }
    let rest = len - done;
    if rest > 0 {
        let mask = !0u64 << (WORD - rest);
        count += ((a.word_at(a_off + done) ^ b.word_at(b_off + done)) & mask).count_ones() as usize;
    }
    count
}

impl FromIterator<u8> for BitString {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        let mut out = BitString::new();
        for bit in iter {
            out.push(bit);
        }
        out
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = BitString::with_capacity(s.len());
        for (offset, c) in s.chars().enumerate() {
            match c {
                '0' => out.push(0),
                '1' => out.push(1),
                found => return Err(Error::InvalidBitChar { offset, found }),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b == 1 { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitString({self})")
        } else {
            write!(f, "BitString(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

/// `wt(a ⊕ b)`; the operands must have equal length.
pub fn hamming_distance(a: &BitString, b: &BitString) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

/// Most-significant-bit-first expansion of a byte sequence.
pub fn bits_from_bytes(data: &[u8]) -> BitString {
    let mut out = BitString::zeros(data.len() * 8);
    for (i, chunk) in data.chunks(8).enumerate() {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        out.words[i] = u64::from_be_bytes(word);
    }
    out
}

/// Inverse of [`bits_from_bytes`].
pub fn bytes_from_bits(bits: &BitString) -> Result<Vec<u8>> {
    if bits.len() % 8 != 0 {
        return Err(Error::Padding { len: bits.len() });
    }
    let mut out = Vec::with_capacity(bits.len() / 8);
    for word in &bits.words {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.truncate(bits.len() / 8);
    Ok(out)
}
