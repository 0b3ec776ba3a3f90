//! `ditsmark` command-line front end: key generation, embedding, detection,
//! verification, attacks and analysis over plain-text files.
//!
//! Exit status of `verify` (and of `detect` when nothing is found):
//! 0 clean prefix, 2 tampered, 3 unwatermarked, 1 on any error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};

use ditsmark::attacks::{
    battery_against, robustness_sweep, substitution_attack, swap_prompt, Arm, AttackKind, AttackMode, AttackSpec,
    GammaSpec, SweepRow,
};
use ditsmark::chain::{udetect, uembed_chain, verify, ChainReport, Classification};
use ditsmark::model::{MockSource, MockSourceConfig, TokenAdapter, TokenVocab};
use ditsmark::singlebit::{EPSILON_ROBUST, EPSILON_STRICT};
use ditsmark::{bits_from_bytes, keygen, BitString, NextBitDistribution, Predictor, SchemeConfig, SecretKey};

const EXIT_TAMPERED: u8 = 2;
const EXIT_UNWATERMARKED: u8 = 3;

#[derive(Parser)]
#[command(name = "ditsmark", version, about = "Distribution-preserving watermarks for binary sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a secret key file
    Keygen {
        /// Security parameter
        #[arg(long, default_value_t = 16)]
        lambda: u32,
        /// Derive the key from this seed instead of OS entropy
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a watermarked payload after a prompt
    Embed {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        model_config: PathBuf,
        #[command(flatten)]
        prompt: PromptArgs,
        /// Model seed, replaces the seed in the model config
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scan a payload for watermark blocks and write a chain report
    Detect {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Epsilon::Strict)]
        epsilon: Epsilon,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a payload's hash chain against a prompt
    Verify {
        /// Key used to detect when no report is given, and to check the
        /// report's fingerprint otherwise
        #[arg(long)]
        key: Option<PathBuf>,
        /// Report written by `detect`
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        prompt: PromptArgs,
        #[arg(long, value_enum, default_value_t = Epsilon::Strict)]
        epsilon: Epsilon,
        /// Write the report including the verification
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply an attack to a payload (or, for prompt_swap, to a prompt)
    Attack {
        /// Attack spec as `key=value` entries, inline or in a file
        #[arg(long)]
        attack_spec: String,
        /// Attack seed, overrides any seed in the attack description
        #[arg(long)]
        seed: u64,
        #[arg(long = "in")]
        input: PathBuf,
        /// Needed by adversarial_flip
        #[arg(long)]
        key: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Robustness sweeps, distinguisher batteries and sweep tables
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct PromptArgs {
    /// Prompt text, hashed as its UTF-8 bytes
    #[arg(long)]
    prompt: Option<String>,
    /// Prompt file: a bit-string file, or text otherwise
    #[arg(long)]
    prompt_file: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_enum)]
    mode: AnalyzeMode,
    #[arg(long)]
    key: Option<PathBuf>,
    #[arg(long)]
    model_config: Option<PathBuf>,
    /// Blocks per sweep point, or bits per arm for the battery
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated flip budgets: `12`, `4r` (radius multiple), `0.5n`
    #[arg(long, default_value = "0,0.5r,1r,2r,4r")]
    gammas: String,
    #[arg(long, value_enum, default_value_t = SweepAttack::Adversarial)]
    attack: SweepAttack,
    /// Sweep output to tabulate
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyzeMode {
    Sweep,
    Battery,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepAttack {
    Random,
    Adversarial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Epsilon {
    #[value(name = "1")]
    Strict,
    #[value(name = "0.25")]
    Robust,
}

impl Epsilon {
    fn value(self) -> f64 {
        match self {
            Epsilon::Strict => EPSILON_STRICT,
            Epsilon::Robust => EPSILON_ROBUST,
        }
    }
}

/// Model named by a config file: a mock source, or a token vocabulary
/// (`kind=vocab`, `vocab=<path>`, `max_tokens=<n>`).
enum ModelSpec {
    Mock(MockSourceConfig),
    Vocab { vocab: TokenVocab, max_tokens: usize },
}

enum Model {
    Mock(MockSource),
    Vocab(TokenAdapter<TokenVocab>),
}

impl Predictor for Model {
    fn next(&self, context: &BitString) -> NextBitDistribution {
        match self {
            Model::Mock(m) => m.next(context),
            Model::Vocab(v) => v.next(context),
        }
    }

    fn halted(&self, context: &BitString) -> bool {
        match self {
            Model::Mock(m) => m.halted(context),
            Model::Vocab(v) => v.halted(context),
        }
    }
}

impl ModelSpec {
    fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let mut vocab_path = None;
        let mut max_tokens = None;
        let mut is_vocab = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for item in line.split(',') {
                match item.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                    Some(("kind", "vocab")) => is_vocab = true,
                    Some(("vocab", v)) => vocab_path = Some(v.to_string()),
                    Some(("max_tokens", v)) => max_tokens = Some(v.parse::<usize>().context("bad max_tokens")?),
                    _ => {}
                }
            }
        }
        if !is_vocab {
            let cfg = MockSourceConfig::parse(&text).with_context(|| format!("model config {}", path.display()))?;
            return Ok(ModelSpec::Mock(cfg));
        }
        let vocab_path = vocab_path.context("vocab model config needs vocab=<path>")?;
        let vocab_path = path.parent().unwrap_or(Path::new(".")).join(vocab_path);
        let vocab = TokenVocab::parse(&read(&vocab_path)?)
            .with_context(|| format!("vocab file {}", vocab_path.display()))?;
        Ok(ModelSpec::Vocab {
            vocab,
            max_tokens: max_tokens.context("vocab model config needs max_tokens=<n>")?,
        })
    }

    /// Instantiates the model; mock sources take `seed`, vocab models have
    /// no model randomness and ignore it.
    fn build(&self, seed: u64, prompt_bits: usize) -> Result<Model> {
        Ok(match self {
            ModelSpec::Mock(cfg) => {
                // mock sources count the prompt towards max_steps
                let cfg = cfg.with_seed(seed).with_max_steps(cfg.max_steps + prompt_bits);
                Model::Mock(cfg.build()?)
            }
            ModelSpec::Vocab { vocab, max_tokens } => {
                Model::Vocab(TokenAdapter::new(vocab.clone(), prompt_bits, *max_tokens))
            }
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_key(path: &Path) -> Result<SecretKey> {
    SecretKey::parse_file(&read(path)?).with_context(|| format!("key file {}", path.display()))
}

fn load_bits(path: &Path) -> Result<BitString> {
    read(path)?
        .trim()
        .parse::<BitString>()
        .with_context(|| format!("bit file {}", path.display()))
}

fn load_prompt(args: &PromptArgs) -> Result<BitString> {
    let bits = match (&args.prompt, &args.prompt_file) {
        (Some(text), None) => bits_from_bytes(text.as_bytes()),
        (None, Some(path)) => {
            let text = read(path)?;
            match text.trim().parse::<BitString>() {
                Ok(bits) if !bits.is_empty() => bits,
                _ => bits_from_bytes(text.as_bytes()),
            }
        }
        _ => bail!("give exactly one of --prompt and --prompt-file"),
    };
    ensure!(!bits.is_empty(), "prompt is empty");
    Ok(bits)
}

fn bit_file(bits: &BitString) -> String {
    format!("{bits}\n")
}

fn cmd_keygen(lambda: u32, seed: Option<u64>, out: &Path) -> Result<ExitCode> {
    let len = 32.max((lambda as usize).div_ceil(8));
    let mut entropy = vec![0u8; len];
    match seed {
        Some(s) => rand_chacha::ChaCha20Rng::seed_from_u64(s).fill(&mut entropy[..]),
        None => rand::rng().fill(&mut entropy[..]),
    }
    let key = keygen(lambda, &entropy)?;
    write(out, &key.to_file_string())?;
    eprintln!("key {} (lambda {lambda}) written to {}", key.fingerprint(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_embed(key: &Path, model_config: &Path, prompt: &PromptArgs, seed: u64, out: &Path) -> Result<ExitCode> {
    let key = load_key(key)?;
    let spec = ModelSpec::load(model_config)?;
    let prompt = load_prompt(prompt)?;
    let model = spec.build(seed, prompt.len())?;
    let cfg = SchemeConfig::new(key.lambda());
    let chain = uembed_chain(&key, &prompt, &model, &cfg)?;
    write(out, &bit_file(&chain.payload))?;
    eprintln!(
        "{} bits, {} blocks, {} complete links",
        chain.payload.len(),
        chain.block_spans().count(),
        chain.complete_links()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_detect(key: &Path, input: &Path, epsilon: Epsilon, out: &Path) -> Result<ExitCode> {
    let key = load_key(key)?;
    let payload = load_bits(input)?;
    let cfg = SchemeConfig::new(key.lambda()).with_epsilon(epsilon.value());
    let detections = udetect(&key, &payload, &cfg)?;
    let found = detections.len();
    let report = ChainReport {
        lambda: key.lambda(),
        key_fingerprint: key.fingerprint(),
        payload_len: payload.len(),
        epsilon: cfg.epsilon,
        detections,
        verification: None,
    };
    write(out, &report.to_text())?;
    println!("detections {found}");
    Ok(if found == 0 {
        ExitCode::from(EXIT_UNWATERMARKED)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_verify(
    key: Option<&Path>,
    report: Option<&Path>,
    input: &Path,
    prompt: &PromptArgs,
    epsilon: Epsilon,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let payload = load_bits(input)?;
    let prompt = load_prompt(prompt)?;
    let key = key.map(load_key).transpose()?;
    let mut report = match (report, &key) {
        (Some(path), _) => {
            let report = ChainReport::parse(&read(path)?).with_context(|| format!("report {}", path.display()))?;
            if let Some(key) = &key {
                ensure!(
                    key.fingerprint() == report.key_fingerprint,
                    "report was made with key {}, not {}",
                    report.key_fingerprint,
                    key.fingerprint()
                );
            }
            ensure!(
                report.payload_len == payload.len(),
                "report covers {} bits but the payload has {}",
                report.payload_len,
                payload.len()
            );
            report
        }
        (None, Some(key)) => {
            let cfg = SchemeConfig::new(key.lambda()).with_epsilon(epsilon.value());
            ChainReport {
                lambda: key.lambda(),
                key_fingerprint: key.fingerprint(),
                payload_len: payload.len(),
                epsilon: cfg.epsilon,
                detections: udetect(key, &payload, &cfg)?,
                verification: None,
            }
        }
        (None, None) => bail!("verify needs --report or --key"),
    };
    let result = verify(&prompt, &report.detections, &payload, report.lambda)?;
    println!("verdict {}", result.verdict);
    println!("classification {}", result.classification);
    println!("coverage {}", result.coverage);
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let code = match result.classification {
        Classification::CleanPrefix => ExitCode::SUCCESS,
        Classification::Tampered => ExitCode::from(EXIT_TAMPERED),
        Classification::Unwatermarked => ExitCode::from(EXIT_UNWATERMARKED),
    };
    report.verification = Some(result);
    if let Some(out) = out {
        write(out, &report.to_text())?;
    }
    Ok(code)
}

fn cmd_attack(spec_arg: &str, seed: u64, input: &Path, key: Option<&Path>, out: &Path) -> Result<ExitCode> {
    let spec_path = Path::new(spec_arg);
    let spec_text = if spec_path.is_file() {
        read(spec_path)?
    } else {
        spec_arg.to_string()
    };
    // a later seed entry wins
    let spec = AttackSpec::parse(&format!("{spec_text}\nseed={seed}")).context("attack spec")?;
    let key = key.map(load_key).transpose()?;
    let attacked = if spec.kind == AttackKind::PromptSwap {
        let prompt = load_prompt(&PromptArgs {
            prompt: None,
            prompt_file: Some(input.to_path_buf()),
        })?;
        swap_prompt(&prompt, &spec)?
    } else {
        substitution_attack(&load_bits(input)?, &spec, key.as_ref())?
    };
    write(out, &bit_file(&attacked))?;
    eprintln!("applied {spec}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<ExitCode> {
    let text = match args.mode {
        AnalyzeMode::Table => {
            let input = args.input.as_deref().context("table mode needs --in")?;
            sweep_table(&read(input)?)?
        }
        AnalyzeMode::Sweep | AnalyzeMode::Battery => {
            let key = load_key(args.key.as_deref().context("--key is required")?)?;
            let spec = ModelSpec::load(args.model_config.as_deref().context("--model-config is required")?)?;
            let seed = args.seed.context("--seed is required")?;
            let cfg = SchemeConfig::new(key.lambda());
            let factory = |s: u64| spec.build(s, 0).expect("model config validated on load");
            spec.build(0, 0)?;
            if let AnalyzeMode::Sweep = args.mode {
                let gammas = args
                    .gammas
                    .split(',')
                    .map(|g| g.trim().parse::<GammaSpec>())
                    .collect::<ditsmark::Result<Vec<_>>>()?;
                let mode = match args.attack {
                    SweepAttack::Random => AttackMode::Random,
                    SweepAttack::Adversarial => AttackMode::Adversarial,
                };
                let rows = robustness_sweep(&key, factory, &cfg, &gammas, mode, args.trials.unwrap_or(500), seed)?;
                let mut s = String::from("# gamma epsilon trials successes recovery mean_gap\n");
                for row in rows {
                    s.push_str(&format!("{row}\n"));
                }
                s
            } else {
                let samples = args.trials.unwrap_or(100_000);
                let report = battery_against(&key, factory, &cfg, samples, seed, Arm::Plain)?;
                let mut s = format!(
                    "# segments {} watermarked_bits {} reference_bits {}\n# test statistic pvalue result\n",
                    report.segments, report.watermarked_bits, report.reference_bits
                );
                for t in &report.tests {
                    let result = if t.passed() { "pass" } else { "fail" };
                    s.push_str(&format!("{} {} {:e} {result}\n", t.name, t.statistic, t.pvalue));
                }
                s
            }
        }
    };
    match &args.out {
        Some(out) => write(out, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

/// Markdown table of sweep rows, one row per gamma with both thresholds.
fn sweep_table(text: &str) -> Result<String> {
    let rows: Vec<SweepRow> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| l.parse().with_context(|| format!("sweep line {}", i + 1)))
        .collect::<Result<_>>()?;
    let mut out = String::from("| gamma | trials | recovery (eps=1) | recovery (eps=0.25) | mean gap |\n|---|---|---|---|---|\n");
    let mut gammas: Vec<String> = Vec::new();
    for r in &rows {
        let g = r.gamma.to_string();
        if !gammas.contains(&g) {
            gammas.push(g);
        }
    }
    for g in gammas {
        let at = |eps: f64| {
            rows.iter()
                .find(|r| r.gamma.to_string() == g && r.epsilon == eps)
                .map_or("-".to_string(), |r| format!("{:.3}", r.recovery))
        };
        let first = rows.iter().find(|r| r.gamma.to_string() == g).expect("gamma from rows");
        out.push_str(&format!(
            "| {g} | {} | {} | {} | {:.4} |\n",
            first.trials,
            at(EPSILON_STRICT),
            at(EPSILON_ROBUST),
            first.mean_gap
        ));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Keygen { lambda, seed, out } => cmd_keygen(lambda, seed, &out),
        Command::Embed {
            key,
            model_config,
            prompt,
            seed,
            out,
        } => cmd_embed(&key, &model_config, &prompt, seed, &out),
        Command::Detect {
            key,
            input,
            epsilon,
            out,
        } => cmd_detect(&key, &input, epsilon, &out),
        Command::Verify {
            key,
            report,
            input,
            prompt,
            epsilon,
            out,
        } => cmd_verify(key.as_deref(), report.as_deref(), &input, &prompt, epsilon, out.as_deref()),
        Command::Attack {
            attack_spec,
            seed,
            input,
            key,
            out,
        } => cmd_attack(&attack_spec, seed, &input, key.as_deref(), &out),
        Command::Analyze(args) => cmd_analyze(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors must not look like a verification outcome
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
