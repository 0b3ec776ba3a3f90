//! Single-bit watermark blocks: adaptive embedding with a Hoeffding stopping
//! rule, and first-passage block detection.
//!
//! A block repeats one signal `m` through the watermarked sampler until the
//! running mean `X` of per-bit scores satisfies
//! `exp(-2N(X - 1/2)^2) < negl`, with `negl = e^{-λ}`. Detection replays the
//! same keyed stream from position 0, scans prefixes of the received bits and
//! stops at the first prefix whose bound drops below `negl^ε`; `X > 1/2`
//! reads as signal 1, `X < 1/2` as signal 0.
//!
//! Comparisons are done on the exponent rather than on `exp(..)` values:
//! with `D = 2·ones - N` the test `scale·N·(X - 1/2)^2 > ε·λ` becomes
//! `scale·D^2 > 4·ε·λ·N`, which is exact for the integer and dyadic values
//! involved.

use std::fmt;

use crate::bits::{xor_popcount, BitString};
use crate::error::{Error, Result};
use crate::key::{SecretKey, WatermarkSignal};
use crate::kv;
use crate::model::{predict_next, Predictor};
use crate::randomness::KeyStream;
use crate::sampler::{detect_1bit, wat_sample};

/// Detection threshold exponent for strict detection.
pub const EPSILON_STRICT: f64 = 1.0;
/// Relaxed exponent used when detecting under substitution attacks.
pub const EPSILON_ROBUST: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub lambda: u32,
    /// Constant in the exponent of the bound, `exp(-scale·N·(X - 1/2)^2)`.
    /// Embedding and detection must agree on it.
    pub detect_exponent_scale: f64,
    /// Embedding gives up after this many bits without closing the block.
    pub max_block_len: usize,
    /// Detection accepts a block once its bound is below `negl^epsilon`.
    pub epsilon: f64,
}

impl SchemeConfig {
    pub fn new(lambda: u32) -> Self {
        Self {
            lambda,
            detect_exponent_scale: 2.0,
            max_block_len: (256 * lambda as usize).max(min_block_length(lambda)),
            epsilon: EPSILON_STRICT,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn robust(self) -> Self {
        self.with_epsilon(EPSILON_ROBUST)
    }

    pub fn with_max_block_len(mut self, max_block_len: usize) -> Self {
        self.max_block_len = max_block_len;
        self
    }

    /// `negl(λ) = e^{-λ}`.
    pub fn negl(&self) -> f64 {
        (-(self.lambda as f64)).exp()
    }

    /// `negl^ε`, the detection threshold.
    pub fn detect_threshold(&self) -> f64 {
        (-(self.lambda as f64) * self.epsilon).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 {
            return Err(Error::InvalidLambda { lambda: 0, min: 1 });
        }
        if self.max_block_len < min_block_length(self.lambda) {
            return Err(Error::InvalidConfig(format!(
                "max_block_len {} below 2*lambda+1 = {}",
                self.max_block_len,
                min_block_length(self.lambda)
            )));
        }
        if !(self.detect_exponent_scale > 0.0 && self.detect_exponent_scale.is_finite()) {
            return Err(Error::InvalidConfig("detect_exponent_scale must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon {} outside (0, 1]", self.epsilon)));
        }
        Ok(())
    }

    /// Whether a prefix of `n` bits whose score count deviates from `n/2`
    /// by `dev / 2` (i.e. `dev = |2·ones - n|`) beats the threshold
    /// `negl^threshold_eps`.
    fn exceeds(&self, n: usize, dev: u64, threshold_eps: f64) -> bool {
        let dev = dev as f64;
        self.detect_exponent_scale * dev * dev > 4.0 * threshold_eps * self.lambda as f64 * n as f64
    }

    /// Bound for a prefix of `n` bits with `ones` positive scores, under this
    /// config's exponent constant.
    pub fn pvalue(&self, n: usize, ones: usize) -> f64 {
        if n == 0 {
            return 1.0;
        }
        let dev = ones as f64 / n as f64 - 0.5;
        (-self.detect_exponent_scale * n as f64 * dev * dev).exp()
    }

    /// Parses `lambda=`, `epsilon=`, `max_block_len=` and
    /// `detect_exponent_scale=` entries; unspecified fields take defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let entries = kv::parse(text)?;
        let lambda = entries
            .iter()
            .find(|e| e.key == "lambda")
            .ok_or_else(|| Error::parse(0, "missing lambda"))?
            .parse::<u32>()?;
        let mut cfg = SchemeConfig::new(lambda);
        for e in &entries {
            match e.key {
                "lambda" => {}
                "epsilon" => cfg.epsilon = e.parse()?,
                "max_block_len" => cfg.max_block_len = e.parse()?,
                "detect_exponent_scale" => cfg.detect_exponent_scale = e.parse()?,
                other => return Err(Error::parse(e.line, format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SchemeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lambda={}", self.lambda)?;
        writeln!(f, "epsilon={}", self.epsilon)?;
        writeln!(f, "max_block_len={}", self.max_block_len)?;
        writeln!(f, "detect_exponent_scale={}", self.detect_exponent_scale)
    }
}

/// `exp(-2n(score - 1/2)^2)`.
pub fn hoeffding_bound(n: usize, score: f64) -> f64 {
    let t = score - 0.5;
    (-2.0 * n as f64 * t * t).exp()
}

/// Shortest block that can meet `negl = e^{-λ}`: `2λ + 1`.
pub fn min_block_length(lambda: u32) -> usize {
    2 * lambda as usize + 1
}

/// Outcome of scanning one bit string for a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDetection {
    pub signal: WatermarkSignal,
    /// 0-based offset of the block in the scanned string.
    pub start: usize,
    /// Block length; 0 when `signal` is `Bottom`.
    pub n: usize,
    /// Mean per-bit score over the block (over the whole scanned suffix for
    /// `Bottom`).
    pub score: f64,
    pub pvalue_bound: f64,
}

impl BlockDetection {
    pub fn is_detected(&self) -> bool {
        self.signal != WatermarkSignal::Bottom
    }

    /// Inclusive end offset, `None` for `Bottom`.
    pub fn end(&self) -> Option<usize> {
        (self.n > 0).then(|| self.start + self.n - 1)
    }
}

/// Statistics of an embedded block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEmbedding {
    pub bits: BitString,
    /// Number of positions whose per-bit score is 1.
    pub ones: usize,
    /// Mean of `min(p0, p1)` over the block's steps.
    pub mean_gap: f64,
}

impl BlockEmbedding {
    pub fn score(&self) -> f64 {
        self.ones as f64 / self.bits.len() as f64
    }
}

/// Block embedder holding the cached keyed stream.
#[derive(Clone)]
pub struct Embedder {
    stream: KeyStream,
    cfg: SchemeConfig,
}

impl Embedder {
    pub fn new(sk: &SecretKey, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            stream: KeyStream::new(sk),
            cfg,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    /// Embeds one block carrying `m`, appending its bits to `context`.
    ///
    /// On error `context` is restored to its original length.
    pub fn embed<P: Predictor + ?Sized>(
        &mut self,
        m: WatermarkSignal,
        source: &P,
        context: &mut BitString,
    ) -> Result<BlockEmbedding> {
        let m = m.bit().ok_or(Error::BottomSignal)?;
        let base = context.len();
        let mut bits = BitString::new();
        let mut ones = 0usize;
        let mut gap_sum = 0.0;
        loop {
            let dist = match predict_next(source, context) {
                Ok(d) => d,
                Err(e) => {
                    context.truncate(base);
                    return Err(e);
                }
            };
            let i = bits.len();
            let r = self.stream.real(i);
            let b = wat_sample(&dist, m, r);
            bits.push(b);
            context.push(b);
            ones += detect_1bit(b, r) as usize;
            gap_sum += dist.min_prob();

            let n = bits.len();
            let dev = (2 * ones).abs_diff(n) as u64;
            if self.cfg.exceeds(n, dev, 1.0) {
                if (2 * ones > n) != (m == 1) {
                    context.truncate(base);
                    return Err(Error::SignalInverted { offset: 0 });
                }
                return Ok(BlockEmbedding {
                    bits,
                    ones,
                    mean_gap: gap_sum / n as f64,
                });
            }
            if n >= self.cfg.max_block_len {
                context.truncate(base);
                return Err(Error::EntropyExhausted {
                    offset: 0,
                    len: n,
                    score: ones as f64 / n as f64,
                    pvalue: self.cfg.pvalue(n, ones),
                });
            }
        }
    }
}

/// Embeds one block carrying `m` after `context` and returns its bits.
pub fn embed_block<P: Predictor + ?Sized>(
    sk: &SecretKey,
    m: WatermarkSignal,
    source: &P,
    context: &BitString,
    cfg: &SchemeConfig,
) -> Result<BitString> {
    let mut ctx = context.clone();
    Ok(Embedder::new(sk, *cfg)?.embed(m, source, &mut ctx)?.bits)
}

/// Block detector holding the cached keyed stream.
#[derive(Clone)]
pub struct Detector {
    stream: KeyStream,
    cfg: SchemeConfig,
}

impl Detector {
    pub fn new(sk: &SecretKey, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            stream: KeyStream::new(sk),
            cfg,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn set_epsilon(&mut self, epsilon: f64) -> Result<()> {
        let cfg = self.cfg.with_epsilon(epsilon);
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    /// Caches enough of the keyed stream for inputs of `len` bits.
    pub fn prepare(&mut self, len: usize) {
        self.stream.ensure(len);
    }

    pub fn detect(&mut self, b: &BitString) -> BlockDetection {
        self.detect_at(b, 0)
    }

    /// Runs block detection on the suffix of `b` starting at `start`, with
    /// the keyed stream restarted at that offset.
    pub fn detect_at(&mut self, b: &BitString, start: usize) -> BlockDetection {
        let total = b.len().saturating_sub(start);
        self.stream.ensure(total);
        let half = self.stream.below_half();
        let eps = self.cfg.epsilon;

        let mut len = 0usize;
        let mut ones = 0usize;
        while len < total {
            let dev = (2 * ones).abs_diff(len) as u64;
            let jump = self.safe_jump(len, dev).min(total - len);
            if jump > 0 {
                ones += xor_popcount(b, start + len, half, len, jump);
                len += jump;
                continue;
            }
            ones += (b.get(start + len) ^ half.get(len)) as usize;
            len += 1;
            let dev = (2 * ones).abs_diff(len) as u64;
            if self.cfg.exceeds(len, dev, eps) {
                let signal = if 2 * ones > len {
                    WatermarkSignal::One
                } else {
                    WatermarkSignal::Zero
                };
                return BlockDetection {
                    signal,
                    start,
                    n: len,
                    score: ones as f64 / len as f64,
                    pvalue_bound: self.cfg.pvalue(len, ones),
                };
            }
        }
        BlockDetection {
            signal: WatermarkSignal::Bottom,
            start,
            n: 0,
            score: if total == 0 { 0.5 } else { ones as f64 / total as f64 },
            pvalue_bound: self.cfg.pvalue(total, ones),
        }
    }

    /// Largest `k` such that no prefix of length `len + 1 ..= len + k` can
    /// pass, given the current deviation `dev`: even if every one of the next
    /// `k` scores moved away from 1/2 the bound would not be met.
    fn safe_jump(&self, len: usize, dev: u64) -> usize {
        let eps = self.cfg.epsilon;
        let c = 4.0 * eps * self.cfg.lambda as f64 / self.cfg.detect_exponent_scale;
        let a = dev as f64;
        let disc = c * (c - 4.0 * a + 4.0 * len as f64);
        if disc < 0.0 {
            return 0;
        }
        let root = ((c - 2.0 * a) + disc.sqrt()) / 2.0;
        if root < 1.0 {
            return 0;
        }
        let mut k = root.floor() as usize;
        while k > 0 && self.cfg.exceeds(len + k, dev + k as u64, eps) {
            k -= 1;
        }
        k
    }
}

/// Scans `b` for a block starting at its first bit.
pub fn detect_block(sk: &SecretKey, b: &BitString, cfg: &SchemeConfig) -> Result<BlockDetection> {
    Ok(Detector::new(sk, *cfg)?.detect(b))
}

/// Reference detector: recomputes every prefix bound one bit at a time from
/// the raw stream, without skipping. Used to cross-check [`Detector`].
#[doc(hidden)]
pub fn detect_block_naive(sk: &SecretKey, b: &BitString, cfg: &SchemeConfig) -> BlockDetection {
    let mut stream = crate::randomness::RandomStream::new(sk);
    let mut ones = 0usize;
    for i in 0..b.len() {
        let r = stream.next().expect("stream is infinite");
        ones += detect_1bit(b.get(i), r) as usize;
        let n = i + 1;
        let x = ones as f64 / n as f64;
        // compared in the exponent domain: the rounded exp() misjudges exact ties
        let d = 2.0 * ones as f64 - n as f64;
        if cfg.detect_exponent_scale * d * d > 4.0 * cfg.epsilon * cfg.lambda as f64 * n as f64 {
            let bound = cfg.pvalue(n, ones);
            return BlockDetection {
                signal: if x > 0.5 { WatermarkSignal::One } else { WatermarkSignal::Zero },
                start: 0,
                n,
                score: x,
                pvalue_bound: bound,
            };
        }
    }
    BlockDetection {
        signal: WatermarkSignal::Bottom,
        start: 0,
        n: 0,
        score: if b.is_empty() { 0.5 } else { ones as f64 / b.len() as f64 },
        pvalue_bound: cfg.pvalue(b.len(), ones),
    }
}
