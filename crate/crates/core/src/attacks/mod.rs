//! Substitution attacks, forgery games and empirical measurements.
//!
//! Substitution attacks move a payload inside the Hamming ball
//! `B(b, γ)`. The games replay embedding, tampering and verification and
//! report whether the adversary won. [`robustness_sweep`] charts block
//! recovery against the flip budget and [`distinguisher_battery`] runs
//! statistical tests between watermarked and plain output.

mod battery;
mod games;
mod sweep;

pub use battery::{
    battery_against, battery_tests, block_key, distinguisher_battery, generate_arm, watermarked_segments, Arm,
    BatteryReport, StatTest, BATTERY_SIGNIFICANCE,
};
pub use games::{
    forge_with_flip, prompt_misattribution_game, robustness_forgery_game, FlipRegion, GameOutcome, GameTranscript,
};
pub use sweep::{flip_radius, robustness_sweep, AttackMode, GammaSpec, SweepRow};

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::key::SecretKey;
use crate::kv;
use crate::randomness::KeyStream;
use crate::sampler::detect_1bit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    /// `gamma` distinct positions chosen uniformly in the target.
    RandomFlip,
    /// `gamma` positions whose score agrees with the block majority; needs
    /// the secret key.
    AdversarialFlip,
    /// The whole target span overwritten with fresh uniform bits.
    Splice,
    /// `gamma` uniformly chosen prompt bits flipped; applied with
    /// [`swap_prompt`].
    PromptSwap,
    /// One flip at the first position of the target.
    SingleFlipForgery,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::RandomFlip => "random_flip",
            AttackKind::AdversarialFlip => "adversarial_flip",
            AttackKind::Splice => "splice",
            AttackKind::PromptSwap => "prompt_swap",
            AttackKind::SingleFlipForgery => "single_flip_forgery",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random_flip" => AttackKind::RandomFlip,
            "adversarial_flip" => AttackKind::AdversarialFlip,
            "splice" => AttackKind::Splice,
            "prompt_swap" => AttackKind::PromptSwap,
            "single_flip_forgery" => AttackKind::SingleFlipForgery,
            other => return Err(Error::InvalidAttack(format!("unknown attack kind {other:?}"))),
        })
    }
}

/// Attack description.
///
/// Text form is `key=value` entries: `kind`, `gamma`, `seed` and optionally
/// `target=start..end` (end exclusive; the whole input when absent).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub gamma: usize,
    pub seed: u64,
    pub target: Option<Range<usize>>,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, gamma: usize, seed: u64) -> Self {
        Self {
            kind,
            gamma,
            seed,
            target: None,
        }
    }

    pub fn with_target(mut self, target: Range<usize>) -> Self {
        self.target = Some(target);
        self
    }

    /// Target span resolved against an input of `len` bits.
    pub fn span(&self, len: usize) -> Result<Range<usize>> {
        let span = self.target.clone().unwrap_or(0..len);
        if span.start > span.end || span.end > len {
            return Err(Error::InvalidAttack(format!(
                "target {}..{} outside input of {len} bits",
                span.start, span.end
            )));
        }
        Ok(span)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut gamma = None;
        let mut seed = None;
        let mut target = None;
        for e in kv::parse(text)? {
            match e.key {
                "kind" => kind = Some(e.value.parse::<AttackKind>()?),
                "gamma" => gamma = Some(e.parse()?),
                "seed" => seed = Some(e.parse()?),
                "target" => {
                    let (a, b) = e
                        .value
                        .split_once("..")
                        .ok_or_else(|| Error::parse(e.line, "target must be start..end"))?;
                    let a = a.trim().parse().map_err(|_| Error::parse(e.line, "bad target start"))?;
                    let b = b.trim().parse().map_err(|_| Error::parse(e.line, "bad target end"))?;
                    target = Some(a..b);
                }
                other => return Err(Error::parse(e.line, format!("unknown key {other:?}"))),
            }
        }
        let kind = kind.ok_or_else(|| Error::parse(0, "missing kind"))?;
        let gamma = match (kind, gamma) {
            (AttackKind::Splice, g) => g.unwrap_or(0),
            (AttackKind::SingleFlipForgery, g) => g.unwrap_or(1),
            (_, Some(g)) => g,
            (_, None) => return Err(Error::parse(0, "missing gamma")),
        };
        let seed = seed.ok_or_else(|| Error::parse(0, "missing seed"))?;
        Ok(Self {
            kind,
            gamma,
            seed,
            target,
        })
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "kind={},gamma={},seed={}", self.kind, self.gamma, self.seed)?;
        if let Some(t) = &self.target {
            write!(f, ",target={}..{}", t.start, t.end)?;
        }
        Ok(())
    }
}

impl FromStr for AttackSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackSpec::parse(s)
    }
}

/// Applies a payload attack and returns the modified bits.
///
/// Flip attacks land exactly `gamma` bits from the input. The adversarial
/// variant treats the target span as one block, so keyed randomness index
/// `j` belongs to position `target.start + j`.
pub fn substitution_attack(b: &BitString, spec: &AttackSpec, sk: Option<&SecretKey>) -> Result<BitString> {
    let span = spec.span(b.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = b.clone();
    match spec.kind {
        AttackKind::RandomFlip => {
            check_budget(spec.gamma, span.len())?;
            for j in sample(&mut rng, span.len(), spec.gamma) {
                out.flip(span.start + j);
            }
        }
        AttackKind::AdversarialFlip => {
            check_budget(spec.gamma, span.len())?;
            let sk = sk.ok_or_else(|| Error::InvalidAttack("adversarial_flip needs the secret key".into()))?;
            for pos in adversarial_positions(b, span, spec.gamma, sk, &mut rng) {
                out.flip(pos);
            }
        }
        AttackKind::Splice => {
            for i in span {
                out.set(i, rng.random_range(0..2u8));
            }
        }
        AttackKind::SingleFlipForgery => {
            if span.is_empty() {
                return Err(Error::InvalidAttack("empty target".into()));
            }
            out.flip(span.start);
        }
        AttackKind::PromptSwap => {
            return Err(Error::InvalidAttack(
                "prompt_swap changes the prompt, not the payload".into(),
            ))
        }
    }
    Ok(out)
}

/// Flips `gamma` distinct uniformly chosen bits of the prompt.
pub fn swap_prompt(prompt: &BitString, spec: &AttackSpec) -> Result<BitString> {
    if spec.kind != AttackKind::PromptSwap {
        return Err(Error::InvalidAttack(format!("{} is not a prompt attack", spec.kind)));
    }
    if spec.gamma == 0 {
        return Err(Error::InvalidAttack("prompt_swap needs gamma >= 1".into()));
    }
    let span = spec.span(prompt.len())?;
    check_budget(spec.gamma, span.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = prompt.clone();
    for j in sample(&mut rng, span.len(), spec.gamma) {
        out.flip(span.start + j);
    }
    Ok(out)
}

fn check_budget(gamma: usize, span: usize) -> Result<()> {
    if gamma > span {
        return Err(Error::InvalidAttack(format!("gamma {gamma} exceeds target length {span}")));
    }
    Ok(())
}

/// Positions to flip: uniformly among those whose score agrees with the
/// block majority (ties count as majority 1), then among the rest if the
/// budget is larger.
fn adversarial_positions(
    b: &BitString,
    span: Range<usize>,
    gamma: usize,
    sk: &SecretKey,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut stream = KeyStream::new(sk);
    stream.ensure(span.len());
    let scores: Vec<u8> = span
        .clone()
        .enumerate()
        .map(|(j, i)| detect_1bit(b.get(i), stream.real(j)))
        .collect();
    let ones = scores.iter().filter(|&&s| s == 1).count();
    let majority = (2 * ones >= scores.len()) as u8;
    let (agree, disagree): (Vec<usize>, Vec<usize>) =
        (0..scores.len()).partition(|&j| scores[j] == majority);
    let take = gamma.min(agree.len());
    let mut out: Vec<usize> = sample(rng, agree.len(), take)
        .into_iter()
        .map(|k| span.start + agree[k])
        .collect();
    if gamma > take {
        out.extend(
            sample(rng, disagree.len(), gamma - take)
                .into_iter()
                .map(|k| span.start + disagree[k]),
        );
    }
    out
}
