use std::fmt;
use std::str::FromStr;

use super::hash_bits;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::singlebit::BlockDetection;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// No block was found.
    Unwatermarked,
    /// Blocks cover the whole input and every complete link checks out.
    CleanPrefix,
    /// Some hash mismatched or part of the input is not covered by blocks.
    Tampered,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Unwatermarked => "unwatermarked",
            Classification::CleanPrefix => "clean-prefix",
            Classification::Tampered => "tampered",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unwatermarked" => Ok(Classification::Unwatermarked),
            "clean-prefix" => Ok(Classification::CleanPrefix),
            "tampered" => Ok(Classification::Tampered),
            other => Err(Error::parse(0, format!("unknown classification {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyWarning {
    /// Blocks were found but not enough to form one complete link, so the
    /// verdict is vacuous.
    NoCompleteLink,
    /// The last `blocks` detections do not fill a link and were not checked.
    TrailingPartialLink { blocks: usize },
}

impl fmt::Display for VerifyWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyWarning::NoCompleteLink => f.write_str("no-complete-link"),
            VerifyWarning::TrailingPartialLink { blocks } => write!(f, "trailing-partial-link {blocks}"),
        }
    }
}

impl FromStr for VerifyWarning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("no-complete-link"), None) => Ok(VerifyWarning::NoCompleteLink),
            (Some("trailing-partial-link"), Some(n)) => Ok(VerifyWarning::TrailingPartialLink {
                blocks: n.parse().map_err(|_| Error::parse(0, format!("bad block count {n:?}")))?,
            }),
            _ => Err(Error::parse(0, format!("unknown warning {s:?}"))),
        }
    }
}

/// Outcome of checking one complete link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkCheck {
    pub index: usize,
    pub expected: BitString,
    pub recovered: BitString,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub verdict: bool,
    pub per_link: Vec<LinkCheck>,
    pub classification: Classification,
    /// Fraction of payload bits inside detected blocks.
    pub coverage: f64,
    pub warnings: Vec<VerifyWarning>,
}

/// Regroups detections into links of `lambda` blocks and checks each
/// complete link's signals against the hash of its predecessor (the prompt
/// for the first link). Detections must be ordered and disjoint; `Bottom`
/// entries are ignored.
pub fn verify(
    prompt: &BitString,
    detections: &[BlockDetection],
    payload: &BitString,
    lambda: u32,
) -> Result<VerificationReport> {
    if lambda == 0 {
        return Err(Error::InvalidLambda { lambda, min: 1 });
    }
    let blocks: Vec<&BlockDetection> = detections.iter().filter(|d| d.is_detected()).collect();
    let mut next_free = 0usize;
    let mut covered = 0usize;
    for (index, d) in blocks.iter().enumerate() {
        let end = d.end().ok_or(Error::OverlappingDetections { index })?;
        if d.start < next_free {
            return Err(Error::OverlappingDetections { index });
        }
        if end >= payload.len() {
            return Err(Error::DetectionOutOfRange {
                index,
                payload_len: payload.len(),
            });
        }
        next_free = end + 1;
        covered += d.n;
    }

    let lambda_blocks = lambda as usize;
    let mut prev = prompt.clone();
    let mut per_link = Vec::new();
    for (index, link) in blocks.chunks_exact(lambda_blocks).enumerate() {
        let expected = hash_bits(&prev, lambda)?;
        let recovered: BitString = link
            .iter()
            .map(|d| d.signal.bit().expect("bottom filtered"))
            .collect();
        let matched = expected == recovered;
        per_link.push(LinkCheck {
            index,
            expected,
            recovered,
            matched,
        });
        prev = BitString::new();
        for d in link {
            prev.extend_from(&payload.slice(d.start..d.start + d.n));
        }
    }

    let verdict = per_link.iter().all(|c| c.matched);
    let coverage = if payload.is_empty() {
        0.0
    } else {
        covered as f64 / payload.len() as f64
    };
    let classification = if blocks.is_empty() {
        Classification::Unwatermarked
    } else if verdict && covered == payload.len() {
        Classification::CleanPrefix
    } else {
        Classification::Tampered
    };
    let mut warnings = Vec::new();
    if !blocks.is_empty() && per_link.is_empty() {
        warnings.push(VerifyWarning::NoCompleteLink);
    }
    let trailing = blocks.len() % lambda_blocks;
    if trailing != 0 {
        warnings.push(VerifyWarning::TrailingPartialLink { blocks: trailing });
    }
    Ok(VerificationReport {
        verdict,
        per_link,
        classification,
        coverage,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits_from_bytes;
    use crate::key::WatermarkSignal;

    fn det(start: usize, n: usize, bit: u8) -> BlockDetection {
        BlockDetection {
            signal: WatermarkSignal::from_bit(bit),
            start,
            n,
            score: 1.0,
            pvalue_bound: 1e-9,
        }
    }

    /// Detections whose signals spell out a valid two-link chain over
    /// 4-bit blocks.
    fn synthetic(prompt: &BitString, lambda: u32) -> (Vec<BlockDetection>, BitString) {
        let payload: BitString = (0..lambda as usize * 2 * 4).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let h1 = hash_bits(prompt, lambda).unwrap();
        let link1 = payload.slice(0..lambda as usize * 4);
        let h2 = hash_bits(&link1, lambda).unwrap();
        let dets = (0..2 * lambda as usize)
            .map(|j| {
                let bit = if j < lambda as usize { h1.get(j) } else { h2.get(j - lambda as usize) };
                det(j * 4, 4, bit)
            })
            .collect();
        (dets, payload)
    }

    #[test]
    fn accepts_consistent_chain() {
        let prompt = bits_from_bytes(b"z");
        let (dets, payload) = synthetic(&prompt, 8);
        let r = verify(&prompt, &dets, &payload, 8).unwrap();
        assert!(r.verdict);
        assert_eq!(r.per_link.len(), 2);
        assert_eq!(r.classification, Classification::CleanPrefix);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn prompt_swap_fails_first_link() {
        let prompt = bits_from_bytes(b"z");
        let (dets, payload) = synthetic(&prompt, 8);
        let r = verify(&bits_from_bytes(b"y"), &dets, &payload, 8).unwrap();
        assert!(!r.verdict);
        assert!(!r.per_link[0].matched);
        assert!(r.per_link[1].matched);
        assert_eq!(r.classification, Classification::Tampered);
    }

    #[test]
    fn payload_change_fails_successor_link() {
        let prompt = bits_from_bytes(b"z");
        let (dets, mut payload) = synthetic(&prompt, 8);
        payload.flip(3);
        let r = verify(&prompt, &dets, &payload, 8).unwrap();
        assert!(r.per_link[0].matched);
        assert!(!r.per_link[1].matched);
    }

    #[test]
    fn empty_detections_are_unwatermarked() {
        let r = verify(&bits_from_bytes(b"z"), &[], &BitString::zeros(100), 16).unwrap();
        assert!(r.verdict);
        assert_eq!(r.classification, Classification::Unwatermarked);
        assert_eq!(r.coverage, 0.0);
    }

    #[test]
    fn trailing_partial_link_ignored() {
        let prompt = bits_from_bytes(b"z");
        let (mut dets, mut payload) = synthetic(&prompt, 8);
        payload.extend_from(&BitString::zeros(8));
        dets.push(det(64, 4, 1));
        dets.push(det(68, 4, 0));
        let r = verify(&prompt, &dets, &payload, 8).unwrap();
        assert!(r.verdict);
        assert_eq!(r.warnings, vec![VerifyWarning::TrailingPartialLink { blocks: 2 }]);
    }

    #[test]
    fn malformed_detections() {
        let payload = BitString::zeros(20);
        let z = BitString::zeros(1);
        assert_eq!(
            verify(&z, &[det(0, 5, 1), det(4, 5, 1)], &payload, 8).unwrap_err(),
            Error::OverlappingDetections { index: 1 }
        );
        assert!(matches!(
            verify(&z, &[det(18, 5, 1)], &payload, 8),
            Err(Error::DetectionOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn partial_coverage_is_tampered() {
        let prompt = bits_from_bytes(b"z");
        let (dets, mut payload) = synthetic(&prompt, 8);
        payload.push(1);
        let r = verify(&prompt, &dets, &payload, 8).unwrap();
        assert!(r.verdict);
        assert_eq!(r.classification, Classification::Tampered);
    }
}
