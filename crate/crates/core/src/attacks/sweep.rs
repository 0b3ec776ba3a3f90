//! Block recovery under substitution, as a function of the flip budget.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{substitution_attack, AttackKind, AttackSpec};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::key::{SecretKey, WatermarkSignal};
use crate::model::Predictor;
use crate::singlebit::{Detector, Embedder, SchemeConfig, EPSILON_ROBUST, EPSILON_STRICT};

/// Robustness radius `⌊√(nλ/8)⌋` for a block of `n` bits.
pub fn flip_radius(n: usize, lambda: u32) -> usize {
    ((n as f64 * lambda as f64 / 8.0).sqrt()).floor() as usize
}

/// Flip budget, possibly relative to the attacked block.
///
/// Text forms: `12` (fixed), `4r` (multiple of [`flip_radius`]),
/// `0.5n` (fraction of the block length, rounded down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Fixed(usize),
    Radius(f64),
    Fraction(f64),
}

impl GammaSpec {
    /// Budget for a block of `n` bits, capped at `n`.
    pub fn resolve(&self, n: usize, lambda: u32) -> usize {
        let g = match *self {
            GammaSpec::Fixed(g) => g,
            GammaSpec::Radius(k) => (k * flip_radius(n, lambda) as f64).floor() as usize,
            GammaSpec::Fraction(f) => (f * n as f64).floor() as usize,
        };
        g.min(n)
    }
}

impl fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSpec::Fixed(g) => write!(f, "{g}"),
            GammaSpec::Radius(k) => write!(f, "{k}r"),
            GammaSpec::Fraction(x) => write!(f, "{x}n"),
        }
    }
}

impl FromStr for GammaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidAttack(format!("bad gamma {s:?}"));
        let number = |t: &str| -> Result<f64> {
            let v: f64 = t.parse().map_err(|_| bad())?;
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(bad())
            }
        };
        if let Some(k) = s.strip_suffix('r') {
            Ok(GammaSpec::Radius(number(k)?))
        } else if let Some(x) = s.strip_suffix('n') {
            Ok(GammaSpec::Fraction(number(x)?))
        } else {
            s.parse().map(GammaSpec::Fixed).map_err(|_| bad())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    Random,
    Adversarial,
}

impl AttackMode {
    fn kind(self) -> AttackKind {
        match self {
            AttackMode::Random => AttackKind::RandomFlip,
            AttackMode::Adversarial => AttackKind::AdversarialFlip,
        }
    }
}

impl FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" | "random_flip" => Ok(AttackMode::Random),
            "adversarial" | "adversarial_flip" => Ok(AttackMode::Adversarial),
            other => Err(Error::InvalidAttack(format!("unknown attack mode {other:?}"))),
        }
    }
}

/// One `(gamma, epsilon)` point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: GammaSpec,
    pub epsilon: f64,
    pub trials: usize,
    pub successes: usize,
    pub recovery: f64,
    /// Mean over trials of the block's mean `min(p0, p1)`.
    pub mean_gap: f64,
}

impl fmt::Display for SweepRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.gamma, self.epsilon, self.trials, self.successes, self.recovery, self.mean_gap
        )
    }
}

impl FromStr for SweepRow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t: Vec<&str> = s.split_whitespace().collect();
        if t.len() != 6 {
            return Err(Error::parse(0, format!("sweep row needs 6 fields, got {}", t.len())));
        }
        let num = |i: usize| t[i].parse::<f64>().map_err(|_| Error::parse(0, format!("bad field {:?}", t[i])));
        let int = |i: usize| t[i].parse::<usize>().map_err(|_| Error::parse(0, format!("bad field {:?}", t[i])));
        Ok(SweepRow {
            gamma: t[0].parse()?,
            epsilon: num(1)?,
            trials: int(2)?,
            successes: int(3)?,
            recovery: num(4)?,
            mean_gap: num(5)?,
        })
    }
}

/// Embeds `trials` single blocks (alternating signals, fresh source seed per
/// trial), attacks each with every budget in `gammas` and detects at both
/// the strict and robust thresholds. Each trial's block is shared by all
/// budgets. Rows come out per gamma, strict first.
pub fn robustness_sweep<P, F>(
    sk: &SecretKey,
    source: F,
    cfg: &SchemeConfig,
    gammas: &[GammaSpec],
    mode: AttackMode,
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>>
where
    P: Predictor,
    F: Fn(u64) -> P,
{
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let epsilons = [EPSILON_STRICT, EPSILON_ROBUST];
    let mut embedder = Embedder::new(sk, cfg.with_epsilon(EPSILON_STRICT))?;
    let mut detectors = [
        Detector::new(sk, cfg.with_epsilon(EPSILON_STRICT))?,
        Detector::new(sk, cfg.with_epsilon(EPSILON_ROBUST))?,
    ];
    let mut successes = vec![[0usize; 2]; gammas.len()];
    let mut gap_sum = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for t in 0..trials {
        let m = WatermarkSignal::from_bit((t % 2) as u8);
        let src = source(rng.random());
        let mut context = BitString::new();
        let block = embedder.embed(m, &src, &mut context)?;
        gap_sum += block.mean_gap;
        let n = block.bits.len();
        for (g, gamma) in gammas.iter().enumerate() {
            let spec = AttackSpec::new(mode.kind(), gamma.resolve(n, cfg.lambda), rng.random());
            let attacked = substitution_attack(&block.bits, &spec, Some(sk))?;
            for (e, det) in detectors.iter_mut().enumerate() {
                if det.detect(&attacked).signal == m {
                    successes[g][e] += 1;
                }
            }
        }
    }

    let mean_gap = gap_sum / trials as f64;
    let mut rows = Vec::with_capacity(2 * gammas.len());
    for (g, gamma) in gammas.iter().enumerate() {
        for (e, &epsilon) in epsilons.iter().enumerate() {
            rows.push(SweepRow {
                gamma: *gamma,
                epsilon,
                trials,
                successes: successes[g][e],
                recovery: successes[g][e] as f64 / trials as f64,
                mean_gap,
            });
        }
    }
    Ok(rows)
}
