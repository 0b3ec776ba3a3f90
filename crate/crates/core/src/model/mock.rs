//! Mock entropy sources used in place of a real language model.
//!
//! All mock sources treat the context length as the step counter: the
//! distribution for the bit at position `t` depends only on `t` (and, for
//! the Markov source, on the last bit), and the source halts once the
//! context holds `max_steps` bits.

use std::fmt;

use super::{NextBitDistribution, Predictor, PROB_ONE};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::kv;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MockKind {
    /// Same `p0` at every step.
    Fixed { p0: f64 },
    /// `p0` drawn per position from a public seeded sequence, uniform in
    /// `[low, high]`.
    Band { low: f64, high: f64 },
    /// Repeats the previous bit with probability `stay`; the first bit is
    /// uniform.
    Markov { stay: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockSourceConfig {
    pub kind: MockKind,
    /// Public model seed; unrelated to the watermark key.
    pub seed: u64,
    /// Halt once the context reaches this many bits.
    pub max_steps: usize,
}

impl MockSourceConfig {
    pub fn fixed(p0: f64, max_steps: usize) -> Self {
        Self {
            kind: MockKind::Fixed { p0 },
            seed: 0,
            max_steps,
        }
    }

    pub fn band(low: f64, high: f64, seed: u64, max_steps: usize) -> Self {
        Self {
            kind: MockKind::Band { low, high },
            seed,
            max_steps,
        }
    }

    pub fn markov(stay: f64, max_steps: usize) -> Self {
        Self {
            kind: MockKind::Markov { stay },
            seed: 0,
            max_steps,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        let check = |what: &'static str, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(Error::InvalidProbability { what, value })
            }
        };
        match self.kind {
            MockKind::Fixed { p0 } => check("p0", p0),
            MockKind::Markov { stay } => check("markov_stay", stay),
            MockKind::Band { low, high } => {
                if !(low > 0.0 && low <= high && high < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "band must satisfy 0 < low <= high < 1, got [{low}, {high}]"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn build(&self) -> Result<MockSource> {
        self.validate()?;
        Ok(MockSource { config: *self })
    }

    /// Parses the `key=value` config format:
    ///
    /// ```text
    /// kind=band
    /// band_low=0.35
    /// band_high=0.65
    /// seed=7
    /// max_steps=4096
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut kind: Option<String> = None;
        let (mut p0, mut low, mut high, mut stay) = (None, None, None, None);
        let mut seed = 0u64;
        let mut max_steps = None;
        for entry in kv::parse(text)? {
            match entry.key {
                "kind" => kind = Some(entry.value.to_string()),
                "p0" | "p0_fixed" => p0 = Some(entry.parse::<f64>()?),
                "band_low" => low = Some(entry.parse::<f64>()?),
                "band_high" => high = Some(entry.parse::<f64>()?),
                "markov_stay" => stay = Some(entry.parse::<f64>()?),
                "seed" => seed = entry.parse()?,
                "max_steps" => max_steps = Some(entry.parse::<usize>()?),
                other => return Err(Error::parse(entry.line, format!("unknown key {other:?}"))),
            }
        }
        let missing = |what: &str| Error::parse(0, format!("missing {what}"));
        let kind = match kind.as_deref() {
            Some("fixed") => MockKind::Fixed {
                p0: p0.ok_or_else(|| missing("p0"))?,
            },
            Some("band") => MockKind::Band {
                low: low.ok_or_else(|| missing("band_low"))?,
                high: high.ok_or_else(|| missing("band_high"))?,
            },
            Some("markov") => MockKind::Markov {
                stay: stay.ok_or_else(|| missing("markov_stay"))?,
            },
            Some(other) => return Err(Error::parse(0, format!("unknown kind {other:?}"))),
            None => return Err(missing("kind")),
        };
        let config = MockSourceConfig {
            kind,
            seed,
            max_steps: max_steps.ok_or_else(|| missing("max_steps"))?,
        };
        config.validate()?;
        Ok(config)
    }
}

impl fmt::Display for MockSourceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MockKind::Fixed { p0 } => writeln!(f, "kind=fixed\np0={p0}")?,
            MockKind::Band { low, high } => writeln!(f, "kind=band\nband_low={low}\nband_high={high}")?,
            MockKind::Markov { stay } => writeln!(f, "kind=markov\nmarkov_stay={stay}")?,
        }
        writeln!(f, "seed={}\nmax_steps={}", self.seed, self.max_steps)
    }
}

#[derive(Debug, Clone)]
pub struct MockSource {
    config: MockSourceConfig,
}

impl MockSource {
    pub fn config(&self) -> &MockSourceConfig {
        &self.config
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn prob_fixed(p: f64) -> u128 {
    ((p * PROB_ONE as f64).round() as u128).min(PROB_ONE)
}

impl Predictor for MockSource {
    fn next(&self, context: &BitString) -> NextBitDistribution {
        let p0 = match self.config.kind {
            MockKind::Fixed { p0 } => prob_fixed(p0),
            MockKind::Band { low, high } => {
                let t = context.len() as u64;
                let u = splitmix64(self.config.seed ^ splitmix64(t)) >> 11;
                let u = u as f64 / (1u64 << 53) as f64;
                prob_fixed(low + (high - low) * u)
            }
            MockKind::Markov { stay } => match context.len() {
                0 => PROB_ONE / 2,
                n if context.get(n - 1) == 0 => prob_fixed(stay),
                _ => PROB_ONE - prob_fixed(stay),
            },
        };
        NextBitDistribution::from_fixed(p0).expect("validated config keeps p0 in [0, 1]")
    }

    fn halted(&self, context: &BitString) -> bool {
        context.len() >= self.config.max_steps
    }
}
