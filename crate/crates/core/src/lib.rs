//! Keyed, distribution-preserving watermarking for binary autoregressive
//! sources.
//!
//! * [`sampler`]: dual inverse transform sampling and the per-bit detector.
//! * [`singlebit`]: adaptive single-bit blocks with a Hoeffding stopping rule.
//! * [`chain`]: hash-chained multi-bit embedding, scanning detection and
//!   verification.
//! * [`attacks`]: substitution attacks, forgery games and statistical
//!   batteries.

pub mod attacks;
pub mod bits;
pub mod chain;
pub mod error;
pub mod key;
mod kv;
pub mod model;
pub mod randomness;
pub mod sampler;
pub mod singlebit;

pub use attacks::{
    distinguisher_battery, prompt_misattribution_game, robustness_forgery_game, robustness_sweep, substitution_attack,
    AttackKind, AttackSpec, GameOutcome,
};
pub use bits::{bits_from_bytes, bytes_from_bits, hamming_distance, BitString};
pub use chain::{
    hash_bits, udetect, udetect_with, uembed, uembed_chain, verify, ChainReport, Classification, VerificationReport,
    WatermarkChain,
};
pub use error::{Error, Result};
pub use key::{SecretKey, WatermarkSignal};
pub use model::{predict_next, MockSourceConfig, NextBitDistribution, Predictor};
pub use randomness::{keygen, unit_real_at, KeyStream, RandomStream, UnitReal};
pub use sampler::{detect_1bit, plain_sample, wat_sample};
pub use singlebit::{
    detect_block, embed_block, hoeffding_bound, min_block_length, BlockDetection, Detector, Embedder,
    SchemeConfig,
};
