//! Hash-chained multi-bit watermarking.
//!
//! The generated payload is cut into links of λ blocks. Block `i` of a link
//! carries bit `i` of `Hash(prev)`, where `prev` is the prompt for the first
//! link and the previous link's payload bits afterwards. Detection scans the
//! received bits for blocks left to right, and [`verify`] regroups the
//! recovered signals into links and re-checks every hash.

mod report;
mod verify;

pub use report::ChainReport;
pub use verify::{verify, Classification, LinkCheck, VerificationReport, VerifyWarning};

use std::ops::Range;

use sha2::{Digest, Sha256};

use crate::bits::{bytes_from_bits, BitString};
use crate::error::{Error, Result};
use crate::key::{SecretKey, WatermarkSignal};
use crate::model::Predictor;
use crate::singlebit::{BlockDetection, Detector, Embedder, SchemeConfig};

/// SHA-256 truncated to `lambda` bits.
///
/// The input is hashed as its bit length (8-byte big-endian) followed by
/// its bits padded with zeros to a whole number of bytes, so strings that
/// differ only in trailing zero padding hash differently.
pub fn hash_bits(data: &BitString, lambda: u32) -> Result<BitString> {
    if lambda > 256 {
        return Err(Error::UnsupportedHashLength { lambda });
    }
    let mut padded = data.clone();
    while padded.len() % 8 != 0 {
        padded.push(0);
    }
    let digest = Sha256::new()
        .chain_update((data.len() as u64).to_be_bytes())
        .chain_update(bytes_from_bits(&padded)?)
        .finalize();
    let mut out = crate::bits::bits_from_bytes(&digest);
    out.truncate(lambda as usize);
    Ok(out)
}

/// One link of an embedded chain.
#[derive(Debug, Clone, PartialEq)]
pub struct WatermarkLink {
    /// Payload ranges of the link's blocks, in order.
    pub blocks: Vec<Range<usize>>,
    /// Signals embedded so far: a prefix of the link's hash, all λ bits when
    /// the link is complete.
    pub signals: BitString,
    pub complete: bool,
}

impl WatermarkLink {
    pub fn span(&self) -> Range<usize> {
        match (self.blocks.first(), self.blocks.last()) {
            (Some(a), Some(b)) => a.start..b.end,
            _ => 0..0,
        }
    }
}

/// Prompt, links and emitted payload of one [`uembed_chain`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct WatermarkChain {
    pub prompt: BitString,
    pub links: Vec<WatermarkLink>,
    pub payload: BitString,
}

impl WatermarkChain {
    pub fn complete_links(&self) -> usize {
        self.links.iter().filter(|l| l.complete).count()
    }

    /// Payload range protected against modification: every complete link
    /// except the last complete one, which has no checked successor.
    pub fn protected_span(&self) -> Range<usize> {
        let complete = self.complete_links();
        if complete < 2 {
            return 0..0;
        }
        0..self.links[complete - 2].span().end
    }

    /// Block boundaries across all links.
    pub fn block_spans(&self) -> impl Iterator<Item = &Range<usize>> {
        self.links.iter().flat_map(|l| l.blocks.iter())
    }
}

/// Runs hash-chained embedding until the source halts.
///
/// A block cut short by the halt is dropped, so the payload always ends on
/// a block boundary; the final link may hold fewer than λ blocks.
pub fn uembed_chain<P: Predictor + ?Sized>(
    sk: &SecretKey,
    prompt: &BitString,
    source: &P,
    cfg: &SchemeConfig,
) -> Result<WatermarkChain> {
    if prompt.is_empty() {
        return Err(Error::InvalidConfig("prompt must not be empty".into()));
    }
    if source.halted(prompt) {
        return Err(Error::SourceHalted {
            context_len: prompt.len(),
        });
    }
    let lambda = cfg.lambda;
    let mut embedder = Embedder::new(sk, *cfg)?;
    let mut context = prompt.clone();
    let mut payload = BitString::new();
    let mut links = Vec::new();
    let mut prev = prompt.clone();

    'chain: loop {
        let hash = hash_bits(&prev, lambda)?;
        let mut link = WatermarkLink {
            blocks: Vec::with_capacity(lambda as usize),
            signals: BitString::new(),
            complete: false,
        };
        let mut link_bits = BitString::new();
        for i in 0..lambda as usize {
            let m = WatermarkSignal::from_bit(hash.get(i));
            match embedder.embed(m, source, &mut context) {
                Ok(block) => {
                    let start = payload.len();
                    payload.extend_from(&block.bits);
                    link_bits.extend_from(&block.bits);
                    link.blocks.push(start..payload.len());
                    link.signals.push(hash.get(i));
                }
                Err(Error::SourceHalted { .. }) => {
                    if !link.blocks.is_empty() {
                        links.push(link);
                    }
                    break 'chain;
                }
                Err(Error::EntropyExhausted { len, score, pvalue, .. }) => {
                    return Err(Error::EntropyExhausted {
                        offset: payload.len(),
                        len,
                        score,
                        pvalue,
                    })
                }
                Err(Error::SignalInverted { .. }) => {
                    return Err(Error::SignalInverted { offset: payload.len() })
                }
                Err(e) => return Err(e),
            }
        }
        link.complete = true;
        links.push(link);
        prev = link_bits;
    }

    Ok(WatermarkChain {
        prompt: prompt.clone(),
        links,
        payload,
    })
}

/// Hash-chained embedding; returns only the emitted payload bits.
pub fn uembed<P: Predictor + ?Sized>(
    sk: &SecretKey,
    prompt: &BitString,
    source: &P,
    cfg: &SchemeConfig,
) -> Result<BitString> {
    Ok(uembed_chain(sk, prompt, source, cfg)?.payload)
}

/// Scans `b` for blocks: tries block detection at each offset, and after a
/// hit resumes right after the detected block.
pub fn udetect(sk: &SecretKey, b: &BitString, cfg: &SchemeConfig) -> Result<Vec<BlockDetection>> {
    let mut detector = Detector::new(sk, *cfg)?;
    Ok(udetect_with(&mut detector, b))
}

/// [`udetect`] with a caller-owned detector, so the keyed stream cache is
/// reused across inputs.
pub fn udetect_with(detector: &mut Detector, b: &BitString) -> Vec<BlockDetection> {
    detector.prepare(b.len());
    let mut found = Vec::new();
    let mut offset = 0;
    while offset < b.len() {
        let d = detector.detect_at(b, offset);
        match d.end() {
            Some(end) if d.is_detected() => {
                found.push(d);
                offset = end + 1;
            }
            _ => offset += 1,
        }
    }
    found
}
