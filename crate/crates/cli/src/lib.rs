//! `fxmatch` command line: style transfer, benchmarks, preset generation and
//! pretext-dataset export.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use fxmatch::bench::corpus::{synthetic_clip, ClipKind};
use fxmatch::bench::{
    load_corpus, run_classification, run_param_estimation, run_retrieval, synthetic_corpus_of, ClassificationConfig, Corpus, NoiseEmbedder, ParamEstConfig, RetrievalConfig,
};
use fxmatch::chain::parse_chain_spec;
use fxmatch::cmaes::{CmaConfig, StopMode};
use fxmatch::effects::{builtin_effects, descriptor, Curve};
use fxmatch::presets::{
    generate_presets_with, generate_pretext_dataset, presets_from_tsv, presets_to_tsv, PresetStore,
    DEFAULT_CONFIGS, DEFAULT_CROP_LEN,
};
use fxmatch::style::{Handcrafted, StyleEmbedder};
use fxmatch::transfer::{style_transfer, TransferConfig};
use fxmatch::wav::{read_wav, write_atomic, write_wav, WavEncoding};
use fxmatch::{Error, Rng};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fxmatch", version, about = "Audio production style transfer with effect chains")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an effect chain so the input sounds like the reference.
    Transfer(TransferArgs),
    /// Evaluation tasks.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Cluster random effect configurations into presets.
    Presets(PresetsArgs),
    /// Export an (input, processed output) pretext dataset.
    Datagen(DatagenArgs),
    /// List the built-in effects and their parameter ranges.
    Effects(EffectsArgs),
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Zero-shot classification of five fixed styles.
    Classify(ClassifyArgs),
    /// Retrieve the clip processed with the query's exact chain.
    Retrieval(RetrievalArgs),
    /// Estimate one effect parameter across content.
    ParamEst(ParamEstArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopModeArg {
    Consecutive,
    Window,
    Disabled,
}

impl From<StopModeArg> for StopMode {
    fn from(m: StopModeArg) -> Self {
        match m {
            StopModeArg::Consecutive => StopMode::Consecutive,
            StopModeArg::Window => StopMode::Window,
            StopModeArg::Disabled => StopMode::Disabled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    Pcm16,
    Float32,
}

impl From<EncodingArg> for WavEncoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Pcm16 => WavEncoding::Pcm16,
            EncodingArg::Float32 => WavEncoding::Float32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderArg {
    Handcrafted,
    /// Content-hashed random vectors; a chance-level control.
    Noise,
}

/// Optimizer overrides shared by every command that runs a transfer.
#[derive(Debug, Args)]
pub struct CmaArgs {
    /// Candidates per generation.
    #[arg(long, default_value_t = 64)]
    pub population: usize,
    /// Initial step size.
    #[arg(long, default_value_t = 0.3)]
    pub sigma0: f64,
    /// Initial mean for every coordinate.
    #[arg(long, default_value_t = 0.5)]
    pub mean0: f64,
    #[arg(long, default_value_t = 25)]
    pub max_generations: usize,
    /// Generations without sufficient improvement before stopping.
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.1)]
    pub min_improvement: f64,
    #[arg(long, value_enum, default_value_t = StopModeArg::Consecutive)]
    pub stop_mode: StopModeArg,
}

impl CmaArgs {
    fn to_config(&self, dim: usize, seed: u64) -> CmaConfig {
        CmaConfig {
            dim,
            population: self.population,
            sigma0: self.sigma0,
            mean0: Some(vec![self.mean0; dim]),
            max_generations: self.max_generations,
            patience: self.patience,
            min_improvement: self.min_improvement,
            stop_mode: self.stop_mode.into(),
            seed,
        }
    }
}

/// Clip source for the benchmarks.
#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Directory of WAV files; a seeded synthetic corpus is used when absent.
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    /// Synthetic clips to generate.
    #[arg(long, default_value_t = 48)]
    pub clips: usize,
    /// Clip length in seconds (loaded clips are truncated to it).
    #[arg(long, default_value_t = 5.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 48_000)]
    pub sample_rate: u32,
    /// Seed of the synthetic corpus.
    #[arg(long, default_value_t = 0)]
    pub corpus_seed: u64,
}

impl CorpusArgs {
    fn load(&self, kinds: &[ClipKind]) -> fxmatch::Result<Corpus> {
        if !(self.seconds > 0.0) {
            return Err(Error::InvalidConfig("--seconds must be positive".into()));
        }
        match &self.corpus {
            Some(dir) => {
                let mut corpus = load_corpus(dir)?;
                for clip in &mut corpus.clips {
                    let n = (self.seconds * clip.sample_rate() as f64) as usize;
                    if clip.len() > n {
                        *clip = clip.head(n);
                    }
                }
                Ok(corpus)
            }
            None => Ok(synthetic_corpus_of(kinds, self.clips, self.seconds, self.sample_rate, self.corpus_seed)),
        }
    }
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long, value_name = "WAV")]
    pub input: PathBuf,
    #[arg(long, value_name = "WAV")]
    pub reference: PathBuf,
    /// Chain-spec file.
    #[arg(long, value_name = "FILE")]
    pub chain: PathBuf,
    /// Output WAV; the report goes next to it as `<stem>.report.txt`.
    #[arg(long, value_name = "WAV")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Peak-normalize the output to -1 dBFS.
    #[arg(long)]
    pub peak_normalize: bool,
    #[arg(long, value_enum, default_value_t = EncodingArg::Float32)]
    pub encoding: EncodingArg,
    #[command(flatten)]
    pub cma: CmaArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Gain applied to every query before embedding.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub query_gain_db: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = EmbedderArg::Handcrafted)]
    pub embedder: EmbedderArg,
    /// Report file; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
}

#[derive(Debug, Args)]
pub struct RetrievalArgs {
    /// Random effects per query chain.
    #[arg(long, default_value_t = 1)]
    pub effects: usize,
    /// Retrieval set size, the matching clip included.
    #[arg(long, default_value_t = 5)]
    pub set_size: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = EmbedderArg::Handcrafted)]
    pub embedder: EmbedderArg,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
}

#[derive(Debug, Args)]
pub struct ParamEstArgs {
    #[arg(long)]
    pub effect: String,
    #[arg(long)]
    pub param: String,
    /// Comma-separated normalized targets.
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.4, 0.6, 0.8])]
    pub targets: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub trials_per_target: usize,
    /// Use the reference clip itself as input.
    #[arg(long)]
    pub content_matched: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub cma: CmaArgs,
}

#[derive(Debug, Args)]
pub struct PresetsArgs {
    /// Effects to cluster (default: all).
    #[arg(long = "effect", value_name = "ID")]
    pub effects: Vec<String>,
    /// Random configurations per effect.
    #[arg(long, default_value_t = DEFAULT_CONFIGS)]
    pub configs: usize,
    /// Probe WAV; seeded pink noise when absent.
    #[arg(long, value_name = "WAV")]
    pub probe: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    pub probe_seconds: f64,
    #[arg(long, default_value_t = 48_000)]
    pub sample_rate: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Preset table (TSV).
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    /// Source directory of WAV files; repeatable.
    #[arg(long = "audio-dir", value_name = "DIR", required = true)]
    pub audio_dirs: Vec<PathBuf>,
    /// Preset table written by `presets`.
    #[arg(long, value_name = "FILE")]
    pub presets: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub examples: usize,
    /// Crop length in samples.
    #[arg(long, default_value_t = DEFAULT_CROP_LEN)]
    pub crop_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EffectsArgs {
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn execute(cli: &Cli) -> fxmatch::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Transfer(a) => transfer(a),
        Command::Bench(BenchCommand::Classify(a)) => classify(a),
        Command::Bench(BenchCommand::Retrieval(a)) => retrieval(a),
        Command::Bench(BenchCommand::ParamEst(a)) => param_est(a),
        Command::Presets(a) => presets(a),
        Command::Datagen(a) => datagen(a),
        Command::Effects(a) => emit(a.output.as_deref(), &effects_table()),
    })
}

/// `out.wav` -> `out.report.txt`.
pub fn report_path(output: &Path) -> PathBuf {
    output.with_extension("report.txt")
}

fn emit(path: Option<&Path>, text: &str) -> fxmatch::Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io { path: PathBuf::from("<stdout>"), source: e })
        }
    }
}

fn embedder(kind: EmbedderArg, seed: u64) -> Box<dyn StyleEmbedder> {
    match kind {
        EmbedderArg::Handcrafted => Box::new(Handcrafted),
        EmbedderArg::Noise => Box::new(NoiseEmbedder::new(seed)),
    }
}

fn transfer(a: &TransferArgs) -> fxmatch::Result<()> {
    let input = read_wav(&a.input)?;
    let reference = read_wav(&a.reference)?;
    let text = std::fs::read_to_string(&a.chain).map_err(|e| Error::Io { path: a.chain.clone(), source: e })?;
    let chain = parse_chain_spec(&text)?;
    let mut cfg = TransferConfig::new(chain, a.seed);
    cfg.cma = a.cma.to_config(cfg.chain.dim(), a.seed);
    cfg.peak_normalize = a.peak_normalize;
    let (output, report) = style_transfer(&input, &reference, &cfg)?;
    write_wav(&output, &a.output, a.encoding.into())?;
    write_atomic(&report_path(&a.output), report.to_text().as_bytes())
}

fn classify(a: &ClassifyArgs) -> fxmatch::Result<()> {
    let corpus = a.corpus.load(&ClipKind::ALL)?;
    let cfg = ClassificationConfig {
        trials: a.trials,
        query_gain_db: a.query_gain_db,
        seed: a.seed,
    };
    let report = run_classification(embedder(a.embedder, a.seed).as_ref(), &corpus, &cfg)?;
    emit(a.output.as_deref(), &report.to_tsv())
}

fn retrieval(a: &RetrievalArgs) -> fxmatch::Result<()> {
    let corpus = a.corpus.load(&ClipKind::ALL)?;
    let cfg = RetrievalConfig::new(a.effects, a.set_size, a.trials, a.seed);
    let report = run_retrieval(embedder(a.embedder, a.seed).as_ref(), &corpus, &cfg)?;
    emit(a.output.as_deref(), &report.to_tsv())
}

fn param_est(a: &ParamEstArgs) -> fxmatch::Result<()> {
    let corpus = a.corpus.load(&ClipKind::PROGRAM)?;
    let mut cfg = ParamEstConfig::new(&a.effect, &a.param, a.seed);
    cfg.targets = a.targets.clone();
    cfg.trials_per_target = a.trials_per_target;
    cfg.content_matched = a.content_matched;
    cfg.cma = a.cma.to_config(1, 0);
    let report = run_param_estimation(&Handcrafted, &corpus, &cfg)?;
    emit(a.output.as_deref(), &report.to_tsv())
}

fn presets(a: &PresetsArgs) -> fxmatch::Result<()> {
    let ids: Vec<String> = if a.effects.is_empty() {
        builtin_effects().iter().map(|d| d.id.to_string()).collect()
    } else {
        for id in &a.effects {
            descriptor(id)?;
        }
        a.effects.clone()
    };
    let root = Rng::new(a.seed);
    let probe = match &a.probe {
        Some(p) => read_wav(p)?,
        None => synthetic_clip(ClipKind::PinkNoise, a.probe_seconds, a.sample_rate, &mut root.fork(u64::MAX)),
    };
    let mut store = PresetStore::new();
    for (i, id) in ids.iter().enumerate() {
        let mut rng = root.fork(i as u64);
        store.insert(id.clone(), generate_presets_with(id, &probe, a.configs, &mut rng)?);
    }
    write_atomic(&a.output, presets_to_tsv(&store).as_bytes())
}

fn datagen(a: &DatagenArgs) -> fxmatch::Result<()> {
    let text = std::fs::read_to_string(&a.presets).map_err(|e| Error::Io { path: a.presets.clone(), source: e })?;
    let store = presets_from_tsv(&text)?;
    std::fs::create_dir_all(&a.output_dir).map_err(|e| Error::Io { path: a.output_dir.clone(), source: e })?;
    let mut rng = Rng::new(a.seed);
    generate_pretext_dataset(&a.audio_dirs, &store, a.examples, a.crop_len, &a.output_dir, &mut rng)?;
    Ok(())
}

/// Registry as TSV: one row per parameter.
pub fn effects_table() -> String {
    let mut out = String::from("effect\tparam\tmin\tmax\tcurve\tunit\tdefault_normalized\n");
    for d in builtin_effects() {
        for p in d.params {
            let curve = match p.curve {
                Curve::Linear => "linear",
                Curve::Logarithmic => "log",
            };
            let unit = if p.unit.is_empty() { "-" } else { p.unit };
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}", d.id, p.name, p.lo, p.hi, curve, unit, p.default);
        }
    }
    out
}
