//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Every seed below was fixed before the suite was first run.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ditsmark::attacks::{
    battery_against, forge_with_flip, Arm, AttackMode, FlipRegion, GammaSpec, BATTERY_SIGNIFICANCE,
};
use ditsmark::chain::Classification;
use ditsmark::model::MockSource;
use ditsmark::singlebit::EPSILON_ROBUST;
use ditsmark::{
    bits_from_bytes, detect_1bit, detect_block, distinguisher_battery, embed_block, keygen,
    prompt_misattribution_game, robustness_sweep, udetect, udetect_with, uembed_chain, unit_real_at, verify,
    wat_sample, BitString, Detector, KeyStream, MockSourceConfig, NextBitDistribution, SchemeConfig, SecretKey,
    UnitReal, WatermarkSignal,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn key(tag: &str) -> SecretKey {
    keygen(16, format!("acceptance-key-{tag}-0123456789abcdef").as_bytes()).unwrap()
}

fn band(seed: u64, max_steps: usize) -> MockSource {
    MockSourceConfig::band(0.35, 0.65, seed, max_steps).build().unwrap()
}

fn random_prompt(rng: &mut ChaCha8Rng) -> BitString {
    let len = rng.random_range(1..=64);
    let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
    bits_from_bytes(&bytes)
}

/// Marginal of the watermarked sampler at (0.3, 0.7) over 10^6 keyed draws
/// with alternating signals.
fn c1_distribution_preservation() -> Outcome {
    let sk = key("c1");
    let dist = NextBitDistribution::from_p0(0.3).unwrap();
    let n = 1_000_000;
    let mut stream = KeyStream::new(&sk);
    stream.ensure(n);
    let zeros = (0..n)
        .filter(|&i| wat_sample(&dist, (i % 2) as u8, stream.real(i)) == 0)
        .count();
    let freq = zeros as f64 / n as f64;
    Outcome {
        pass: (freq - 0.3).abs() <= 0.0025,
        detail: format!("freq(b=0) = {freq:.5}, want 0.3 +- 0.0025"),
    }
}

/// detect(wat_sample(m, r), r) = m for 10^4 grid points per signal at p = 1/2.
fn c2_exact_detection() -> Outcome {
    let dist = NextBitDistribution::from_p0(0.5).unwrap();
    let mut exceptions = 0;
    for m in 0..2u8 {
        for k in 0..10_000u128 {
            let r = UnitReal(((k << 64) / 10_000) as u64);
            if detect_1bit(wat_sample(&dist, m, r), r) != m {
                exceptions += 1;
            }
        }
    }
    Outcome {
        pass: exceptions == 0,
        detail: format!("{exceptions} exceptions over 20000 points"),
    }
}

fn c3_stopping_rule() -> Outcome {
    let sk = key("c3");
    let src = MockSourceConfig::fixed(0.5, 10_000).build().unwrap();
    let block = embed_block(&sk, WatermarkSignal::One, &src, &BitString::new(), &SchemeConfig::new(16)).unwrap();
    Outcome {
        pass: block.len() == 33,
        detail: format!("block length {}, want 33", block.len()),
    }
}

fn c4_completeness() -> Outcome {
    let sk = key("c4");
    let cfg = SchemeConfig::new(16);
    let mut rng = ChaCha8Rng::seed_from_u64(4004);
    let mut correct = 0;
    for t in 0..1000 {
        let m = WatermarkSignal::from_bit((t % 2) as u8);
        let src = band(rng.random(), 1 << 20);
        let block = embed_block(&sk, m, &src, &BitString::new(), &cfg).unwrap();
        if detect_block(&sk, &block, &cfg).unwrap().signal == m {
            correct += 1;
        }
    }
    Outcome {
        pass: correct == 1000,
        detail: format!("{correct}/1000 recovered"),
    }
}

fn c5_false_positives() -> Outcome {
    let sk = key("c5");
    let mut det = Detector::new(&sk, SchemeConfig::new(16)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5005);
    let mut spurious = 0;
    for _ in 0..10_000 {
        let b: BitString = (0..4096).map(|_| rng.random_range(0..2u8)).collect();
        spurious += udetect_with(&mut det, &b).len();
    }
    Outcome {
        pass: spurious <= 20,
        detail: format!("{spurious} spurious detections, want <= 20"),
    }
}

fn c6_robustness() -> Outcome {
    let sk = key("c6");
    let cfg = SchemeConfig::new(16);
    let gammas = [GammaSpec::Radius(1.0), GammaSpec::Radius(4.0)];
    let rows = robustness_sweep(&sk, |s| band(s, 1 << 20), &cfg, &gammas, AttackMode::Adversarial, 500, 6006).unwrap();
    let robust = |g: usize| {
        rows.iter()
            .find(|r| r.gamma == gammas[g] && r.epsilon == EPSILON_ROBUST)
            .unwrap()
            .recovery
    };
    let (at_radius, at_four) = (robust(0), robust(1));
    Outcome {
        pass: at_radius >= 0.95 && at_four < 0.5,
        detail: format!("recovery at gamma*: {at_radius:.3} (want >= 0.95), at 4 gamma*: {at_four:.3} (want < 0.5)"),
    }
}

fn c7_chain_round_trip() -> Outcome {
    let sk = key("c7");
    let cfg = SchemeConfig::new(16);
    let mut rng = ChaCha8Rng::seed_from_u64(7007);
    let mut ok = 0;
    let mut short = 0;
    for _ in 0..200 {
        let prompt = random_prompt(&mut rng);
        let src = band(rng.random(), prompt.len() + 2400);
        let chain = uembed_chain(&sk, &prompt, &src, &cfg).unwrap();
        if chain.complete_links() < 2 {
            short += 1;
            continue;
        }
        let dets = udetect(&sk, &chain.payload, &cfg).unwrap();
        let report = verify(&prompt, &dets, &chain.payload, 16).unwrap();
        if report.verdict && report.classification == Classification::CleanPrefix {
            ok += 1;
        }
    }
    Outcome {
        pass: ok == 200,
        detail: format!("{ok}/200 clean-prefix ({short} chains under 2 complete links)"),
    }
}

/// Breakdown of forgery wins: how the verifier classified the tampered
/// output, and whether the flipped bit lies inside the prefix of the
/// tampered output itself (complete detected links except the last).
#[derive(Default)]
struct WinAnalysis {
    tampered: usize,
    inside_own_prefix: usize,
}

impl WinAnalysis {
    fn record(&mut self, out: &ditsmark::GameOutcome, pos: usize) {
        if !out.adversary_wins {
            return;
        }
        let t = &out.transcript;
        self.tampered += (t.report.classification == Classification::Tampered) as usize;
        let complete = t.detections.len() / 16;
        if complete >= 2 {
            let prefix_end = t.detections[(complete - 1) * 16 - 1].end().unwrap();
            self.inside_own_prefix += (pos <= prefix_end) as usize;
        }
    }
}

fn c8_prefix_unforgeability() -> Outcome {
    let sk = key("c8");
    let cfg = SchemeConfig::new(16);
    let mut rng = ChaCha8Rng::seed_from_u64(8008);

    let prompt = random_prompt(&mut rng);
    let src = band(rng.random(), prompt.len() + 3000);
    let chain = uembed_chain(&sk, &prompt, &src, &cfg).unwrap();
    let protected = chain.protected_span();
    let mut protected_trials = 0;
    let mut protected_wins = 0;
    let mut residual_trials = 0;
    let mut residual_wins = 0;
    let mut wins = WinAnalysis::default();
    for pos in 0..chain.payload.len() {
        let out = forge_with_flip(&sk, &chain, pos, &cfg).unwrap();
        if out.transcript.flip_region == Some(FlipRegion::Protected) {
            protected_trials += 1;
            protected_wins += out.adversary_wins as usize;
            wins.record(&out, pos);
        } else {
            residual_trials += 1;
            residual_wins += out.adversary_wins as usize;
        }
    }
    let exhaustive = protected_trials;
    let exhaustive_wins = protected_wins;

    let mut sampled = 0;
    while sampled < 200 {
        let prompt = random_prompt(&mut rng);
        let src = band(rng.random(), prompt.len() + 2400);
        let chain = uembed_chain(&sk, &prompt, &src, &cfg).unwrap();
        let span = chain.protected_span();
        if span.is_empty() {
            continue;
        }
        let pos = rng.random_range(span);
        let out = forge_with_flip(&sk, &chain, pos, &cfg).unwrap();
        protected_trials += 1;
        protected_wins += out.adversary_wins as usize;
        wins.record(&out, pos);
        sampled += 1;
    }
    Outcome {
        pass: exhaustive == protected.len() && exhaustive > 0 && protected_wins == 0,
        detail: format!(
            "{protected_wins} wins over {protected_trials} protected flips \
             ({exhaustive_wins}/{exhaustive} exhaustive, {}/200 sampled); \
             of the wins: {} classified tampered, {} with the flip inside the tampered output's own prefix; \
             residual final-link flips: {residual_wins}/{residual_trials} wins",
            protected_wins - exhaustive_wins,
            wins.tampered,
            wins.inside_own_prefix
        ),
    }
}

fn c9_prompt_misattribution() -> Outcome {
    let sk = key("c9");
    let cfg = SchemeConfig::new(16);
    let mut rng = ChaCha8Rng::seed_from_u64(9009);
    let mut wins = 0;
    let mut games = 0;
    while games < 200 {
        let z = random_prompt(&mut rng);
        let z2 = random_prompt(&mut rng);
        if z == z2 {
            continue;
        }
        let src = band(rng.random(), z.len() + 1500);
        let out = prompt_misattribution_game(&sk, &z, &z2, &src, &cfg).unwrap();
        wins += out.adversary_wins as usize;
        games += 1;
    }
    Outcome {
        pass: wins == 0,
        detail: format!("{wins}/200 adversary wins"),
    }
}

fn c10_undetectability() -> Outcome {
    let sk = key("c10");
    let cfg = SchemeConfig::new(16);
    let factory = |s| band(s, 1 << 20);
    let report = distinguisher_battery(&sk, factory, &cfg, 100_000, 1010).unwrap();
    let control = battery_against(&sk, factory, &cfg, 100_000, 1010, Arm::BiasedOnes).unwrap();
    let control_freq = control.test("frequency").unwrap().pvalue;
    let mut detail: Vec<String> = report
        .tests
        .iter()
        .map(|t| format!("{} p={:.3e}", t.name, t.pvalue))
        .collect();
    detail.push(format!("control frequency p={control_freq:.3e}"));
    detail.push(format!("{} bits per arm", report.watermarked_bits));
    Outcome {
        pass: report.passed() && control_freq < BATTERY_SIGNIFICANCE && report.watermarked_bits >= 100_000,
        detail: detail.join(", "),
    }
}

/// Scores recomputed straight from the keyed function, independent of the
/// library's cached stream.
fn c11_score_shift() -> Outcome {
    let sk = key("c11");
    let cfg = SchemeConfig::new(16);
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut violations = 0;
    for t in 0..1000 {
        let m = WatermarkSignal::from_bit((t % 2) as u8);
        let block = embed_block(&sk, m, &band(rng.random(), 1 << 20), &BitString::new(), &cfg).unwrap();
        let n = block.len();
        let gamma = rng.random_range(0..=n);
        let mut attacked = block.clone();
        for i in sample(&mut rng, n, gamma) {
            attacked.flip(i);
        }
        let r: Vec<UnitReal> = (0..n as u64).map(|i| unit_real_at(&sk, i)).collect();
        let score = |b: &BitString| (0..n).filter(|&i| detect_1bit(b.get(i), r[i]) == 1).count();
        let (ones, ones_after) = (score(&block), score(&attacked));
        let (mut down, mut up) = (0usize, 0usize);
        for i in 0..n {
            if block.get(i) != attacked.get(i) {
                match (detect_1bit(block.get(i), r[i]), detect_1bit(attacked.get(i), r[i])) {
                    (1, 0) => down += 1,
                    (0, 1) => up += 1,
                    _ => violations += 1,
                }
            }
        }
        let shift = ones.abs_diff(ones_after);
        if shift != down.abs_diff(up) || shift > gamma || down + up != gamma {
            violations += 1;
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations over 1000 (block, flip-set) pairs"),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 11] = [
        ("1 distribution preservation", c1_distribution_preservation, Duration::from_secs(5)),
        ("2 exact detection at full entropy", c2_exact_detection, Duration::from_secs(1)),
        ("3 stopping-rule closed form", c3_stopping_rule, Duration::from_secs(1)),
        ("4 completeness", c4_completeness, Duration::from_secs(30)),
        ("5 false positives", c5_false_positives, Duration::from_secs(300)),
        ("6 substitution robustness", c6_robustness, Duration::from_secs(120)),
        ("7 chain round trip", c7_chain_round_trip, Duration::from_secs(120)),
        ("8 prefix unforgeability", c8_prefix_unforgeability, Duration::from_secs(180)),
        ("9 prompt misattribution", c9_prompt_misattribution, Duration::from_secs(120)),
        ("10 undetectability battery", c10_undetectability, Duration::from_secs(60)),
        ("11 score-shift exactness", c11_score_shift, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let pass = outcome.pass && elapsed <= budget;
        failed += !pass as usize;
        println!(
            "criterion {name}: {} | {} | {:.2}s (budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
