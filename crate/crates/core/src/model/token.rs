//! Token vocabularies walked one bit at a time.
//!
//! Every token ID is a fixed-width bit string. Sampling a token is split
//! into `width` binary decisions: first between the IDs starting with 0 and
//! those starting with 1, then on the next bit within the chosen half, and
//! so on.

use std::collections::BTreeMap;

use super::{NextBitDistribution, Predictor, PROB_ONE};
use crate::bits::BitString;
use crate::error::{Error, Result};

const MASS_TOLERANCE: f64 = 1.0 / (1u64 << 40) as f64;

/// Fixed-width token vocabulary with a probability per token ID.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenVocab {
    width: usize,
    probabilities: BTreeMap<u64, f64>,
}

impl TokenVocab {
    pub fn new(width: usize, probabilities: BTreeMap<u64, f64>) -> Result<Self> {
        if width == 0 || width > 63 {
            return Err(Error::InvalidVocab(format!("width {width} outside 1..=63")));
        }
        if probabilities.is_empty() {
            return Err(Error::InvalidVocab("no tokens".into()));
        }
        for (&id, &p) in &probabilities {
            if id >> width != 0 {
                return Err(Error::InvalidVocab(format!("token {id} wider than {width} bits")));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability { what: "token", value: p });
            }
        }
        let total: f64 = probabilities.values().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidVocab(format!("probabilities sum to {total}")));
        }
        Ok(Self { width, probabilities })
    }

    pub fn uniform(width: usize) -> Result<Self> {
        let n = 1u64 << width;
        Self::new(width, (0..n).map(|id| (id, 1.0 / n as f64)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn probability(&self, token: u64) -> Option<f64> {
        self.probabilities.get(&token).copied()
    }

    pub fn tokens(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probabilities.iter().map(|(&t, &p)| (t, p))
    }

    /// Total probability of tokens whose ID starts with `prefix`.
    fn mass(&self, prefix: u64, prefix_len: usize) -> f64 {
        let shift = self.width - prefix_len;
        let lo = prefix << shift;
        let hi = lo + (1u64 << shift);
        self.probabilities.range(lo..hi).map(|(_, &p)| p).sum()
    }

    pub fn token_bits(&self, token: u64) -> BitString {
        (0..self.width).rev().map(|i| ((token >> i) & 1) as u8).collect()
    }

    /// Vocabulary file: one `<bits> <probability>` line per token.
    pub fn parse(text: &str) -> Result<Self> {
        let mut width = None;
        let mut probabilities = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(bits), Some(prob), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(n + 1, "expected `<bits> <probability>`"));
            };
            let id_bits: BitString = bits.parse().map_err(|e| Error::parse(n + 1, format!("{e}")))?;
            match width {
                None => width = Some(id_bits.len()),
                Some(w) if w != id_bits.len() => {
                    return Err(Error::parse(n + 1, format!("token width {} != {w}", id_bits.len())))
                }
                _ => {}
            }
            if id_bits.len() > 63 {
                return Err(Error::parse(n + 1, "token wider than 63 bits"));
            }
            let id = id_bits.iter().fold(0u64, |acc, b| (acc << 1) | b as u64);
            let p: f64 = prob.parse().map_err(|e| Error::parse(n + 1, format!("probability: {e}")))?;
            if probabilities.insert(id, p).is_some() {
                return Err(Error::parse(n + 1, format!("duplicate token {bits}")));
            }
        }
        let width = width.ok_or_else(|| Error::parse(0, "empty vocabulary"))?;
        TokenVocab::new(width, probabilities)
    }

    pub fn to_file_string(&self) -> String {
        self.tokens()
            .map(|(t, p)| format!("{} {p}\n", self.token_bits(t)))
            .collect()
    }
}

/// Something that yields a next-token distribution given the tokens so far.
pub trait TokenSource {
    fn vocab(&self, token_context: &[u64]) -> &TokenVocab;
}

impl TokenSource for TokenVocab {
    fn vocab(&self, _token_context: &[u64]) -> &TokenVocab {
        self
    }
}

/// Conditional distribution of the next ID bit given the bits of the
/// current token chosen so far.
pub fn token_bit_walk<S: TokenSource + ?Sized>(
    source: &S,
    token_context: &[u64],
    bit_prefix: &BitString,
) -> Result<NextBitDistribution> {
    let vocab = source.vocab(token_context);
    let k = bit_prefix.len();
    if k >= vocab.width {
        return Err(Error::InvalidVocab(format!(
            "prefix of {k} bits is not shorter than the {}-bit width",
            vocab.width
        )));
    }
    let prefix = bit_prefix.iter().fold(0u64, |acc, b| (acc << 1) | b as u64);
    let total = vocab.mass(prefix, k);
    if total <= 0.0 {
        return Err(Error::ImpossiblePrefix {
            prefix: bit_prefix.to_string(),
        });
    }
    let zero = vocab.mass(prefix << 1, k + 1);
    let p0 = ((zero / total) * PROB_ONE as f64).round() as u128;
    NextBitDistribution::from_fixed(p0.min(PROB_ONE))
}

/// Splits `bits` into `width`-bit chunks and maps each to its token ID.
pub fn decode_tokens(bits: &BitString, vocab: &TokenVocab) -> Result<Vec<u64>> {
    let w = vocab.width;
    if bits.len() % w != 0 {
        return Err(Error::UnknownToken {
            offset: bits.len() - bits.len() % w,
        });
    }
    (0..bits.len() / w)
        .map(|i| {
            let id = (0..w).fold(0u64, |acc, j| (acc << 1) | bits.get(i * w + j) as u64);
            match vocab.probability(id) {
                Some(_) => Ok(id),
                None => Err(Error::UnknownToken { offset: i * w }),
            }
        })
        .collect()
}

/// Presents a token source as a bit-level [`Predictor`].
///
/// The first `prompt_bits` bits of every context are the prompt and are
/// not interpreted as tokens. Generation halts on a token boundary once
/// `max_tokens` tokens have been produced.
pub struct TokenAdapter<S> {
    source: S,
    prompt_bits: usize,
    max_tokens: usize,
}

impl<S: TokenSource> TokenAdapter<S> {
    pub fn new(source: S, prompt_bits: usize, max_tokens: usize) -> Self {
        Self {
            source,
            prompt_bits,
            max_tokens,
        }
    }

    fn split(&self, context: &BitString) -> (Vec<u64>, BitString) {
        let generated = context.len().saturating_sub(self.prompt_bits);
        let mut tokens = Vec::new();
        let mut pos = self.prompt_bits;
        let mut width = self.source.vocab(&tokens).width();
        while generated - (pos - self.prompt_bits) >= width {
            let id = (0..width).fold(0u64, |acc, j| (acc << 1) | context.get(pos + j) as u64);
            tokens.push(id);
            pos += width;
            width = self.source.vocab(&tokens).width();
        }
        (tokens, context.slice(pos..context.len()))
    }
}

impl<S: TokenSource> Predictor for TokenAdapter<S> {
    fn next(&self, context: &BitString) -> NextBitDistribution {
        let (tokens, prefix) = self.split(context);
        // Contexts produced by sampling never reach a zero-mass prefix.
        token_bit_walk(&self.source, &tokens, &prefix).unwrap_or(NextBitDistribution::UNIFORM)
    }

    fn halted(&self, context: &BitString) -> bool {
        let (tokens, prefix) = self.split(context);
        prefix.is_empty() && tokens.len() >= self.max_tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::{keygen, KeyStream};
    use crate::sampler::wat_sample;

    fn skewed() -> TokenVocab {
        TokenVocab::parse("00 0.1\n01 0.2\n10 0.3\n11 0.4\n").unwrap()
    }

    #[test]
    fn walk_examples() {
        let d = token_bit_walk(&TokenVocab::uniform(2).unwrap(), &[], &BitString::new()).unwrap();
        assert_eq!((d.p0(), d.p1()), (0.5, 0.5));
        let d = token_bit_walk(&skewed(), &[], &BitString::new()).unwrap();
        assert!((d.p0() - 0.3).abs() < 1e-15 && (d.p1() - 0.7).abs() < 1e-15);
        let d = token_bit_walk(&skewed(), &[], &BitString::from_bits(&[1])).unwrap();
        assert!((d.p0() - 0.3 / 0.7).abs() < 1e-15 && (d.p1() - 0.4 / 0.7).abs() < 1e-15);
    }

    #[test]
    fn walk_errors() {
        let vocab = TokenVocab::parse("00 0.5\n01 0.5\n10 0\n").unwrap();
        assert!(matches!(
            token_bit_walk(&vocab, &[], &BitString::from_bits(&[1])),
            Err(Error::ImpossiblePrefix { .. })
        ));
        assert!(token_bit_walk(&vocab, &[], &BitString::from_bits(&[1, 1])).is_err());
    }

    #[test]
    fn walk_product_reconstructs_token_probability() {
        let mut probs = BTreeMap::new();
        let mut total = 0.0;
        for id in 0..64u64 {
            let w = ((id * 37 + 11) % 23 + 1) as f64;
            probs.insert(id, w);
            total += w;
        }
        for p in probs.values_mut() {
            *p /= total;
        }
        let vocab = TokenVocab::new(6, probs).unwrap();
        for (id, p) in vocab.tokens() {
            let bits = vocab.token_bits(id);
            let mut prod = 1.0;
            for k in 0..bits.len() {
                let d = token_bit_walk(&vocab, &[], &bits.slice(0..k)).unwrap();
                prod *= if bits.get(k) == 0 { d.p0() } else { d.p1() };
            }
            assert!((prod - p).abs() < MASS_TOLERANCE, "token {id}: {prod} vs {p}");
        }
    }

    #[test]
    fn decode_examples() {
        let vocab = TokenVocab::uniform(2).unwrap();
        assert_eq!(decode_tokens(&"0011".parse().unwrap(), &vocab).unwrap(), vec![0b00, 0b11]);
        assert!(decode_tokens(&BitString::new(), &vocab).unwrap().is_empty());
        let sparse = TokenVocab::parse("00 0.5\n01 0.5\n").unwrap();
        assert_eq!(
            decode_tokens(&"0110".parse().unwrap(), &sparse).unwrap_err(),
            Error::UnknownToken { offset: 2 }
        );
        assert!(decode_tokens(&"011".parse().unwrap(), &sparse).is_err());
    }

    #[test]
    fn generate_then_decode_round_trip() {
        let vocab = TokenVocab::parse("000 0.05\n001 0.15\n010 0.1\n011 0.2\n101 0.3\n110 0.2\n").unwrap();
        let prompt = BitString::from_bits(&[1, 0, 1, 1, 0]);
        let adapter = TokenAdapter::new(vocab.clone(), prompt.len(), 64);
        let mut stream = KeyStream::new(&keygen(16, &[5; 32]).unwrap());
        let mut ctx = prompt.clone();
        let mut i = 0;
        while !adapter.halted(&ctx) {
            let d = adapter.next(&ctx);
            ctx.push(wat_sample(&d, (i / 7 % 2) as u8, stream.real(i)));
            i += 1;
        }
        let payload = ctx.slice(prompt.len()..ctx.len());
        assert_eq!(payload.len(), 64 * 3);
        let tokens = decode_tokens(&payload, &vocab).unwrap();
        assert_eq!(tokens.len(), 64);
        let re_encoded: BitString = tokens.iter().fold(BitString::new(), |acc, &t| acc.concat(&vocab.token_bits(t)));
        assert_eq!(re_encoded, payload);
        assert!(tokens.iter().all(|&t| t != 0b100 && t != 0b111));
    }

    #[test]
    fn vocab_file_round_trip_and_errors() {
        let v = skewed();
        assert_eq!(TokenVocab::parse(&v.to_file_string()).unwrap(), v);
        assert!(matches!(TokenVocab::parse("00 0.5\n011 0.5\n"), Err(Error::Parse { line: 2, .. })));
        assert!(TokenVocab::parse("00 0.5\n01 0.4\n").is_err());
        assert!(matches!(TokenVocab::parse("00 0.5\n00 0.5\n"), Err(Error::Parse { line: 2, .. })));
    }
}
