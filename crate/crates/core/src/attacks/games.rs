//! Forgery games. The adversary wins exactly when `verify` returns true on
//! the tampered input.

use crate::bits::BitString;
use crate::chain::{udetect, uembed_chain, verify, VerificationReport, WatermarkChain};
use crate::error::{Error, Result};
use crate::key::SecretKey;
use crate::model::Predictor;
use crate::singlebit::{BlockDetection, SchemeConfig};

/// Where a flipped payload bit sits relative to the link structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipRegion {
    /// Inside a complete link that has a complete successor.
    Protected,
    /// Inside the last complete link, whose hash nobody checks.
    LastCompleteLink,
    /// Inside the trailing incomplete link.
    PartialLink,
}

impl FlipRegion {
    pub fn of(chain: &WatermarkChain, position: usize) -> FlipRegion {
        let complete = chain.complete_links();
        if chain.protected_span().contains(&position) {
            FlipRegion::Protected
        } else if complete > 0 && chain.links[complete - 1].span().contains(&position) {
            FlipRegion::LastCompleteLink
        } else {
            FlipRegion::PartialLink
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTranscript {
    pub prompt: BitString,
    /// Prompt handed to the verifier.
    pub claimed_prompt: BitString,
    pub payload: BitString,
    /// Payload handed to the detector.
    pub modified: BitString,
    pub flipped: Vec<usize>,
    pub flip_region: Option<FlipRegion>,
    pub detections: Vec<BlockDetection>,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameOutcome {
    pub adversary_wins: bool,
    pub transcript: GameTranscript,
}

/// Embeds a chain after `prompt`, flips one payload bit and verifies.
pub fn robustness_forgery_game<P: Predictor + ?Sized>(
    sk: &SecretKey,
    prompt: &BitString,
    source: &P,
    flip_position: usize,
    cfg: &SchemeConfig,
) -> Result<GameOutcome> {
    let chain = uembed_chain(sk, prompt, source, cfg)?;
    forge_with_flip(sk, &chain, flip_position, cfg)
}

/// The flip-and-verify half of [`robustness_forgery_game`] on an already
/// embedded chain, so many positions can be tried against one chain.
pub fn forge_with_flip(
    sk: &SecretKey,
    chain: &WatermarkChain,
    flip_position: usize,
    cfg: &SchemeConfig,
) -> Result<GameOutcome> {
    if flip_position >= chain.payload.len() {
        return Err(Error::InvalidAttack(format!(
            "flip position {flip_position} outside payload of {} bits",
            chain.payload.len()
        )));
    }
    let mut modified = chain.payload.clone();
    modified.flip(flip_position);
    let detections = udetect(sk, &modified, cfg)?;
    let report = verify(&chain.prompt, &detections, &modified, cfg.lambda)?;
    Ok(GameOutcome {
        adversary_wins: report.verdict,
        transcript: GameTranscript {
            prompt: chain.prompt.clone(),
            claimed_prompt: chain.prompt.clone(),
            payload: chain.payload.clone(),
            modified,
            flipped: vec![flip_position],
            flip_region: Some(FlipRegion::of(chain, flip_position)),
            detections,
            report,
        },
    })
}

/// Embeds after `z` and claims the output continues `z_prime` instead.
pub fn prompt_misattribution_game<P: Predictor + ?Sized>(
    sk: &SecretKey,
    z: &BitString,
    z_prime: &BitString,
    source: &P,
    cfg: &SchemeConfig,
) -> Result<GameOutcome> {
    if z == z_prime {
        return Err(Error::InvalidAttack("claimed prompt equals the real prompt".into()));
    }
    let chain = uembed_chain(sk, z, source, cfg)?;
    let detections = udetect(sk, &chain.payload, cfg)?;
    let report = verify(z_prime, &detections, &chain.payload, cfg.lambda)?;
    Ok(GameOutcome {
        adversary_wins: report.verdict,
        transcript: GameTranscript {
            prompt: z.clone(),
            claimed_prompt: z_prime.clone(),
            payload: chain.payload.clone(),
            modified: chain.payload,
            flipped: Vec::new(),
            flip_region: None,
            detections,
            report,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits_from_bytes;
    use crate::model::MockSourceConfig;
    use crate::randomness::keygen;

    fn setup() -> (SecretKey, SchemeConfig) {
        (keygen(16, b"games-test-key-material-0000000").unwrap(), SchemeConfig::new(16))
    }

    #[test]
    fn flip_in_first_link_loses() {
        let (sk, cfg) = setup();
        let src = MockSourceConfig::band(0.35, 0.65, 11, 3000).build().unwrap();
        let prompt = bits_from_bytes(b"story");
        let chain = uembed_chain(&sk, &prompt, &src, &cfg).unwrap();
        assert!(chain.complete_links() >= 2);
        for pos in [0, 5, chain.links[0].span().end - 1] {
            let out = forge_with_flip(&sk, &chain, pos, &cfg).unwrap();
            assert!(!out.adversary_wins, "pos {pos}");
            assert_eq!(out.transcript.flip_region, Some(FlipRegion::Protected));
        }
        let replay = robustness_forgery_game(&sk, &prompt, &src, 5, &cfg).unwrap();
        assert_eq!(replay, forge_with_flip(&sk, &chain, 5, &cfg).unwrap());
    }

    #[test]
    fn flip_outside_payload_is_error() {
        let (sk, cfg) = setup();
        let src = MockSourceConfig::band(0.35, 0.65, 1, 500).build().unwrap();
        let chain = uembed_chain(&sk, &bits_from_bytes(b"x"), &src, &cfg).unwrap();
        assert!(forge_with_flip(&sk, &chain, chain.payload.len(), &cfg).is_err());
    }

    #[test]
    fn misattribution() {
        let (sk, cfg) = setup();
        let src = MockSourceConfig::band(0.35, 0.65, 2, 2000).build().unwrap();
        let z = bits_from_bytes(b"real prompt");
        let mut z2 = z.clone();
        z2.flip(3);
        let out = prompt_misattribution_game(&sk, &z, &z2, &src, &cfg).unwrap();
        assert!(!out.adversary_wins);
        assert!(prompt_misattribution_game(&sk, &z, &z, &src, &cfg).is_err());
    }
}
