//! Statistical distinguishers between watermarked and plain output.
//!
//! The watermarked arm is a run of single-bit blocks carrying signal 1,
//! each embedded under its own key derived from the master key, so every
//! block sees fresh keyed randomness the way a freshly generated key would.
//! The reference arm samples the same source kind with fresh seeds and the
//! same segment lengths. Every test works on block-aligned windows only:
//! bits of one segment are never paired with bits of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::key::{SecretKey, WatermarkSignal};
use crate::model::{predict_next, Predictor};
use crate::randomness::{keygen, UnitReal};
use crate::sampler::plain_sample;
use crate::singlebit::{Embedder, SchemeConfig};

/// A test fails when its p-value falls below this.
pub const BATTERY_SIGNIFICANCE: f64 = 1e-4;

/// How the comparison arm is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    /// Plain inverse-transform sampling from the model.
    Plain,
    /// A broken sampler that always outputs the signal bit 1.
    BiasedOnes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatTest {
    pub name: &'static str,
    pub statistic: f64,
    pub pvalue: f64,
}

impl StatTest {
    pub fn passed(&self) -> bool {
        self.pvalue >= BATTERY_SIGNIFICANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryReport {
    pub segments: usize,
    pub watermarked_bits: usize,
    pub reference_bits: usize,
    pub tests: Vec<StatTest>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.tests.iter().all(StatTest::passed)
    }

    pub fn test(&self, name: &str) -> Option<&StatTest> {
        self.tests.iter().find(|t| t.name == name)
    }
}

/// Key for block `index` of the battery's watermarked arm.
pub fn block_key(sk: &SecretKey, index: u64) -> Result<SecretKey> {
    let mut entropy = b"battery-block".to_vec();
    entropy.extend_from_slice(sk.material());
    entropy.extend_from_slice(&index.to_be_bytes());
    keygen(sk.lambda(), &entropy)
}

/// Watermarked segments totalling at least `min_bits`.
pub fn watermarked_segments<P, F>(
    sk: &SecretKey,
    source: &F,
    cfg: &SchemeConfig,
    min_bits: usize,
    seed: u64,
) -> Result<Vec<BitString>>
where
    P: Predictor,
    F: Fn(u64) -> P,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut total = 0;
    while total < min_bits {
        let key = block_key(sk, out.len() as u64)?;
        let src = source(rng.random());
        let mut context = BitString::new();
        let block = Embedder::new(&key, *cfg)?.embed(WatermarkSignal::One, &src, &mut context)?;
        total += block.bits.len();
        out.push(block.bits);
    }
    Ok(out)
}

/// Reference segments with the given lengths.
pub fn generate_arm<P, F>(arm: Arm, source: &F, lengths: &[usize], seed: u64) -> Result<Vec<BitString>>
where
    P: Predictor,
    F: Fn(u64) -> P,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lengths
        .iter()
        .map(|&n| match arm {
            Arm::BiasedOnes => Ok((0..n).map(|_| 1u8).collect()),
            Arm::Plain => {
                let src = source(rng.random());
                let mut bits = BitString::with_capacity(n);
                for _ in 0..n {
                    let dist = predict_next(&src, &bits)?;
                    bits.push(plain_sample(&dist, UnitReal(rng.random())));
                }
                Ok(bits)
            }
        })
        .collect()
}

/// Watermarked versus plain output, at least `samples` bits per arm.
pub fn distinguisher_battery<P, F>(
    sk: &SecretKey,
    source: F,
    cfg: &SchemeConfig,
    samples: usize,
    seed: u64,
) -> Result<BatteryReport>
where
    P: Predictor,
    F: Fn(u64) -> P,
{
    battery_against(sk, source, cfg, samples, seed, Arm::Plain)
}

/// Watermarked output versus the chosen reference arm.
pub fn battery_against<P, F>(
    sk: &SecretKey,
    source: F,
    cfg: &SchemeConfig,
    samples: usize,
    seed: u64,
    arm: Arm,
) -> Result<BatteryReport>
where
    P: Predictor,
    F: Fn(u64) -> P,
{
    if samples < 10_000 {
        return Err(Error::InvalidConfig(format!("battery needs at least 10000 samples, got {samples}")));
    }
    let wat = watermarked_segments(sk, &source, cfg, samples, seed)?;
    let lengths: Vec<usize> = wat.iter().map(BitString::len).collect();
    let reference = generate_arm(arm, &source, &lengths, seed ^ 0x5bd1_e995_9e37_79b9)?;
    Ok(BatteryReport {
        segments: wat.len(),
        watermarked_bits: lengths.iter().sum(),
        reference_bits: reference.iter().map(BitString::len).sum(),
        tests: battery_tests(&wat, &reference),
    })
}

/// Frequency, lag-1 serial correlation and nibble chi-square tests between
/// two corpora of segments.
pub fn battery_tests(a: &[BitString], b: &[BitString]) -> Vec<StatTest> {
    vec![frequency_test(a, b), serial_test(a, b), nibble_test(a, b)]
}

fn two_sided(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    (2.0 * normal.sf(z.abs())).min(1.0)
}

/// Two-proportion z-test on the fraction of ones.
fn frequency_test(a: &[BitString], b: &[BitString]) -> StatTest {
    let count = |c: &[BitString]| {
        c.iter()
            .fold((0usize, 0usize), |(n, k), s| (n + s.len(), k + s.count_ones()))
    };
    let (n1, k1) = count(a);
    let (n2, k2) = count(b);
    let (f1, f2) = (k1 as f64 / n1 as f64, k2 as f64 / n2 as f64);
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let z = if se > 0.0 {
        (f1 - f2) / se
    } else if f1 == f2 {
        0.0
    } else {
        f64::INFINITY
    };
    StatTest {
        name: "frequency",
        statistic: z,
        pvalue: two_sided(z),
    }
}

/// Pearson correlation of adjacent pairs within segments, and the number
/// of pairs.
fn lag1_correlation(c: &[BitString]) -> (f64, usize) {
    let (mut n, mut sx, mut sy, mut sxy) = (0usize, 0usize, 0usize, 0usize);
    for s in c {
        for i in 1..s.len() {
            let (x, y) = (s.get(i - 1) as usize, s.get(i) as usize);
            n += 1;
            sx += x;
            sy += y;
            sxy += x * y;
        }
    }
    let nf = n as f64;
    let cov = sxy as f64 / nf - (sx as f64 / nf) * (sy as f64 / nf);
    // bits are 0/1, so E[x^2] = E[x]
    let vx = sx as f64 / nf - (sx as f64 / nf).powi(2);
    let vy = sy as f64 / nf - (sy as f64 / nf).powi(2);
    let r = if vx > 0.0 && vy > 0.0 { cov / (vx * vy).sqrt() } else { 0.0 };
    (r, n)
}

/// Fisher z comparison of the two lag-1 correlations.
fn serial_test(a: &[BitString], b: &[BitString]) -> StatTest {
    let (r1, m1) = lag1_correlation(a);
    let (r2, m2) = lag1_correlation(b);
    let clamp = |r: f64| r.clamp(-0.999_999, 0.999_999);
    let se = (1.0 / (m1 as f64 - 3.0) + 1.0 / (m2 as f64 - 3.0)).sqrt();
    let z = (clamp(r1).atanh() - clamp(r2).atanh()) / se;
    StatTest {
        name: "serial",
        statistic: z,
        pvalue: two_sided(z),
    }
}

/// 2x16 homogeneity test on nibbles read at offsets 0, 4, 8, ... of each
/// segment.
fn nibble_test(a: &[BitString], b: &[BitString]) -> StatTest {
    let histogram = |c: &[BitString]| {
        let mut h = [0u64; 16];
        for s in c {
            for k in 0..s.len() / 4 {
                let v = (0..4).fold(0usize, |acc, j| (acc << 1) | s.get(4 * k + j) as usize);
                h[v] += 1;
            }
        }
        h
    };
    let rows = [histogram(a), histogram(b)];
    let row_tot: Vec<f64> = rows.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let total: f64 = row_tot.iter().sum();
    let mut stat = 0.0;
    let mut used = 0;
    for j in 0..16 {
        let col = (rows[0][j] + rows[1][j]) as f64;
        if col == 0.0 {
            continue;
        }
        used += 1;
        for (i, row) in rows.iter().enumerate() {
            let expected = row_tot[i] * col / total;
            if expected > 0.0 {
                stat += (row[j] as f64 - expected).powi(2) / expected;
            }
        }
    }
    let pvalue = if used < 2 {
        1.0
    } else {
        ChiSquared::new((used - 1) as f64).expect("positive df").sf(stat)
    };
    StatTest {
        name: "chi_square",
        statistic: stat,
        pvalue,
    }
}
