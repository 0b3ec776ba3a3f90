//! End-to-end embedding, scanning and verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ditsmark::chain::{ChainReport, Classification};
use ditsmark::model::{decode_tokens, TokenAdapter, TokenVocab};
use ditsmark::{
    bits_from_bytes, detect_block, keygen, udetect, udetect_with, uembed_chain, verify, BitString, Detector, MockSourceConfig,
    SchemeConfig, SecretKey,
};

fn key(tag: &[u8]) -> SecretKey {
    let mut entropy = b"pipeline-test-".to_vec();
    entropy.extend_from_slice(tag);
    entropy.resize(32, b'.');
    keygen(16, &entropy).unwrap()
}

#[test]
fn uniform_noise_is_mostly_clean() {
    let sk = key(b"noise");
    let mut det = Detector::new(&sk, SchemeConfig::new(16)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let clean = (0..100)
        .filter(|_| {
            let b: BitString = (0..10_000).map(|_| rng.random_range(0..2u8)).collect();
            udetect_with(&mut det, &b).is_empty()
        })
        .count();
    assert!(clean >= 99, "{clean}/100 clean");
}

#[test]
fn splice_resumes_detection_after_foreign_segment() {
    let sk = key(b"splice");
    let cfg = SchemeConfig::new(16);
    let prompt = bits_from_bytes(b"splice me");
    let src = MockSourceConfig::band(0.35, 0.65, 17, prompt.len() + 4000).build().unwrap();
    let chain = uembed_chain(&sk, &prompt, &src, &cfg).unwrap();
    let payload = chain.payload;

    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let foreign: BitString = (0..500).map(|_| rng.random_range(0..2u8)).collect();
    let cut = 1500;
    let spliced = payload.slice(0..cut).concat(&foreign).concat(&payload.slice(cut..payload.len()));

    let dets = udetect(&sk, &spliced, &cfg).unwrap();
    let after = dets.iter().filter(|d| d.start >= cut + 500).count();
    assert!(after > 5, "only {after} detections after the splice");
    let report = verify(&prompt, &dets, &spliced, 16).unwrap();
    assert!(report.coverage < 1.0);
    assert_eq!(report.classification, Classification::Tampered);
}

#[test]
fn token_model_round_trip() {
    let sk = key(b"tokens");
    let cfg = SchemeConfig::new(16);
    let vocab = TokenVocab::parse("000 0.1\n001 0.15\n010 0.1\n011 0.15\n100 0.1\n101 0.15\n110 0.1\n111 0.15\n").unwrap();
    let prompt = bits_from_bytes(b"tok");
    let model = TokenAdapter::new(vocab.clone(), prompt.len(), 1000);
    let chain = uembed_chain(&sk, &prompt, &model, &cfg).unwrap();
    assert!(chain.complete_links() >= 2);

    let dets = udetect(&sk, &chain.payload, &cfg).unwrap();
    let report = verify(&prompt, &dets, &chain.payload, 16).unwrap();
    assert!(report.verdict);
    assert_eq!(report.classification, Classification::CleanPrefix);

    // the dropped partial block may leave a partial token at the end
    let whole = chain.payload.len() / 3 * 3;
    let tokens = decode_tokens(&chain.payload.slice(0..whole), &vocab).unwrap();
    assert_eq!(tokens.len(), whole / 3);
}

#[test]
fn report_survives_text_round_trip() {
    let sk = key(b"report");
    let cfg = SchemeConfig::new(16);
    let prompt = bits_from_bytes(b"report");
    let src = MockSourceConfig::band(0.35, 0.65, 4, prompt.len() + 2000).build().unwrap();
    let chain = uembed_chain(&sk, &prompt, &src, &cfg).unwrap();
    let dets = udetect(&sk, &chain.payload, &cfg).unwrap();
    let report = ChainReport {
        lambda: 16,
        key_fingerprint: sk.fingerprint(),
        payload_len: chain.payload.len(),
        epsilon: cfg.epsilon,
        detections: dets.clone(),
        verification: Some(verify(&prompt, &dets, &chain.payload, 16).unwrap()),
    };
    let parsed = ChainReport::parse(&report.to_text()).unwrap();
    assert_eq!(parsed, report);
    // the parsed detections verify the same way
    assert_eq!(
        verify(&prompt, &parsed.detections, &chain.payload, 16).unwrap(),
        report.verification.unwrap()
    );
}

#[test]
fn robust_threshold_closes_first_block_no_later() {
    let sk = key(b"eps");
    let prompt = bits_from_bytes(b"eps");
    let src = MockSourceConfig::band(0.35, 0.65, 8, prompt.len() + 2000).build().unwrap();
    let chain = uembed_chain(&sk, &prompt, &src, &SchemeConfig::new(16)).unwrap();
    let strict = detect_block(&sk, &chain.payload, &SchemeConfig::new(16)).unwrap();
    let robust = detect_block(&sk, &chain.payload, &SchemeConfig::new(16).robust()).unwrap();
    // same score prefixes, lower bar
    assert!(strict.is_detected() && robust.is_detected());
    assert!(robust.n <= strict.n);
    assert!(robust.pvalue_bound >= strict.pvalue_bound);
}
