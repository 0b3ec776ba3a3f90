//! Binary autoregressive model abstraction.
//!
//! A model is split into a deterministic [`Predictor`] that maps the bits
//! seen so far to the distribution of the next bit, and a sampler that
//! turns that distribution plus randomness into a bit (see
//! [`crate::sampler`]). Mock predictors stand in for a language model in
//! experiments; [`token`] adapts a token vocabulary into a bit-level walk.

pub mod mock;
pub mod token;

pub use mock::{MockKind, MockSource, MockSourceConfig};
pub use token::{decode_tokens, token_bit_walk, TokenAdapter, TokenSource, TokenVocab};

use crate::bits::BitString;
use crate::error::{Error, Result};

/// Fixed-point one: probabilities are stored as `p * 2^64`.
pub const PROB_ONE: u128 = 1 << 64;

/// `(p(0), p(1))` for the next bit, with `p(0) + p(1) = 1` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NextBitDistribution {
    p0: u128,
}

impl NextBitDistribution {
    pub const UNIFORM: NextBitDistribution = NextBitDistribution { p0: PROB_ONE / 2 };

    pub fn from_p0(p0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::InvalidProbability { what: "p0", value: p0 });
        }
        Ok(Self {
            p0: (p0 * PROB_ONE as f64).round() as u128,
        })
    }

    /// `p0_fixed / 2^64`; must not exceed `2^64`.
    pub fn from_fixed(p0_fixed: u128) -> Result<Self> {
        if p0_fixed > PROB_ONE {
            return Err(Error::InvalidProbability {
                what: "p0",
                value: p0_fixed as f64 / PROB_ONE as f64,
            });
        }
        Ok(Self { p0: p0_fixed })
    }

    pub fn p0_fixed(&self) -> u128 {
        self.p0
    }

    pub fn p1_fixed(&self) -> u128 {
        PROB_ONE - self.p0
    }

    pub fn p0(&self) -> f64 {
        self.p0 as f64 / PROB_ONE as f64
    }

    pub fn p1(&self) -> f64 {
        self.p1_fixed() as f64 / PROB_ONE as f64
    }

    /// `min(p0, p1)`: this step's contribution to the detection gap.
    pub fn min_prob(&self) -> f64 {
        self.p0.min(self.p1_fixed()) as f64 / PROB_ONE as f64
    }
}

/// The deterministic half of a model.
pub trait Predictor {
    /// Distribution of the bit following `context`. Must be a pure function
    /// of `context`.
    fn next(&self, context: &BitString) -> NextBitDistribution;

    /// Whether generation stops after `context`.
    fn halted(&self, _context: &BitString) -> bool {
        false
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn next(&self, context: &BitString) -> NextBitDistribution {
        (**self).next(context)
    }

    fn halted(&self, context: &BitString) -> bool {
        (**self).halted(context)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn next(&self, context: &BitString) -> NextBitDistribution {
        (**self).next(context)
    }

    fn halted(&self, context: &BitString) -> bool {
        (**self).halted(context)
    }
}

/// Queries `source`, turning a halted source into [`Error::SourceHalted`].
pub fn predict_next<P: Predictor + ?Sized>(source: &P, context: &BitString) -> Result<NextBitDistribution> {
    if source.halted(context) {
        return Err(Error::SourceHalted {
            context_len: context.len(),
        });
    }
    Ok(source.next(context))
}
