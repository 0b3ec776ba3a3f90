//! Dual inverse transform sampling and the per-bit detector.
//!
//! The watermarked sampler keeps two mirror-image arrangements of the unit
//! interval and picks one by the watermark signal `m`:
//!
//! ```text
//! m = 0:  [0, p1) -> 1   [p1, 1) -> 0
//! m = 1:  [0, p0) -> 0   [p0, 1) -> 1
//! ```
//!
//! Each arrangement is an inverse-transform sampler of `(p0, p1)`, so the
//! output bit has the model's distribution whatever `m` is. The detector
//! scores a bit as `1(r < 1/2) ⊕ b`; under `m = 1` the score is 1 with
//! probability `1 - (max(p0, p1) - 1/2)`, under `m = 0` it is 0 with that
//! probability, and at `p0 = p1 = 1/2` it always equals `m`.

use crate::model::NextBitDistribution;
use crate::randomness::UnitReal;

/// Samples a bit from `dist` in the arrangement selected by `m` (0 or 1).
pub fn wat_sample(dist: &NextBitDistribution, m: u8, r: UnitReal) -> u8 {
    let r = r.raw() as u128;
    if m == 0 {
        (r < dist.p1_fixed()) as u8
    } else {
        (r >= dist.p0_fixed()) as u8
    }
}

/// Per-bit detection score `1(r < 1/2) ⊕ b`.
pub fn detect_1bit(b: u8, r: UnitReal) -> u8 {
    (r.is_below_half() as u8) ^ (b & 1)
}

/// Unwatermarked inverse-transform sampler: 0 iff `r < p0`.
pub fn plain_sample(dist: &NextBitDistribution, r: UnitReal) -> u8 {
    ((r.raw() as u128) >= dist.p0_fixed()) as u8
}
