//! Style transfer: search a chain's parameters so the processed input's
//! embedding matches the reference's.

use std::fmt::Write as _;
use std::time::Instant;

use crate::audio::AudioBuffer;
use crate::chain::{Chain, ParamValue};
use crate::cmaes::{optimize, CmaConfig, GenerationStats, StopReason};
use crate::error::{Error, Result};
use crate::style::{cosine_similarity, Embedding, Handcrafted, StyleEmbedder};

#[derive(Debug, Clone)]
pub struct TransferConfig {
    pub chain: Chain,
    /// Optimizer settings; `dim` is overwritten with the chain's dimension.
    pub cma: CmaConfig,
    /// Peak-normalize the returned audio to −1 dBFS. The reported
    /// similarities always refer to the un-normalized output.
    pub peak_normalize: bool,
}

impl TransferConfig {
    pub fn new(chain: Chain, seed: u64) -> Self {
        let mut cma = CmaConfig::new(chain.dim());
        cma.seed = seed;
        Self {
            chain,
            cma,
            peak_normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub best_similarity: f64,
    /// Similarity at the initial parameters (all 0.5 by default).
    pub initial_similarity: f64,
    /// Unprocessed input vs reference.
    pub input_similarity: f64,
    pub best_params: Vec<f64>,
    pub params: Vec<ParamValue>,
    pub history: Vec<GenerationStats>,
    pub stop_reason: StopReason,
    pub evaluations: usize,
    pub seed: u64,
    /// Not part of [`to_text`](Self::to_text), which must be reproducible.
    pub wall_clock_secs: f64,
}

impl TransferReport {
    pub fn generations(&self) -> usize {
        self.history.len()
    }

    /// Stable text form: `key<TAB>value` lines, then `[params]` and
    /// `[history]` tables with header rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "best_similarity\t{}", self.best_similarity);
        let _ = writeln!(out, "initial_similarity\t{}", self.initial_similarity);
        let _ = writeln!(out, "input_similarity\t{}", self.input_similarity);
        let _ = writeln!(out, "evaluations\t{}", self.evaluations);
        let _ = writeln!(out, "generations\t{}", self.generations());
        let _ = writeln!(out, "stop_reason\t{}", self.stop_reason.as_str());
        let _ = writeln!(out, "seed\t{}", self.seed);
        out.push_str("[params]\neffect\tparam\tnormalized\tphysical\tunit\tfixed\n");
        for p in &self.params {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                p.effect, p.param, p.normalized, p.physical, p.unit, p.fixed
            );
        }
        out.push_str("[history]\ngeneration\tbest_similarity\tmean_similarity\tsigma\n");
        for h in &self.history {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", h.generation, -h.best, -h.mean, h.sigma);
        }
        out
    }
}

/// Negated similarity between the processed input and a fixed reference embedding.
pub fn objective<E: StyleEmbedder + ?Sized>(
    embedder: &E,
    input: &AudioBuffer,
    reference: &Embedding,
    chain: &Chain,
    phi: &[f64],
) -> Result<f64> {
    let out = chain.process(input, phi)?;
    let z = embedder.embed(&out)?;
    Ok(-cosine_similarity(z.as_slice(), reference.as_slice())?)
}

pub fn style_transfer(
    input: &AudioBuffer,
    reference: &AudioBuffer,
    cfg: &TransferConfig,
) -> Result<(AudioBuffer, TransferReport)> {
    style_transfer_with(&Handcrafted, input, reference, cfg)
}

pub fn style_transfer_with<E: StyleEmbedder + ?Sized>(
    embedder: &E,
    input: &AudioBuffer,
    reference: &AudioBuffer,
    cfg: &TransferConfig,
) -> Result<(AudioBuffer, TransferReport)> {
    input.ensure_same_rate(reference)?;
    let min = crate::style::SpectrogramConfig::default().window_size;
    if input.len() < min {
        return Err(Error::TooShort { len: input.len(), min });
    }
    let started = Instant::now();
    let z_ref = embedder.embed(reference)?;
    let z_in = embedder.embed(input)?;
    let input_similarity = cosine_similarity(z_in.as_slice(), z_ref.as_slice())?;

    // Every effect is causal, so when the embedding only looks at a prefix
    // the candidates are scored on that prefix alone.
    let scored = match embedder.horizon(input.sample_rate()) {
        Some(n) => input.head(n),
        None => input.clone(),
    };
    let mut cma = cfg.cma.clone();
    cma.dim = cfg.chain.dim();
    let result = optimize(|phi| objective(embedder, &scored, &z_ref, &cfg.chain, phi), &cma)?;

    let mut output = cfg.chain.process(input, &result.best_params)?;
    if cfg.peak_normalize {
        output = output.peak_normalize(-1.0);
    }
    let report = TransferReport {
        best_similarity: -result.best_value,
        initial_similarity: -result.initial_value,
        input_similarity,
        params: cfg.chain.describe(&result.best_params)?,
        best_params: result.best_params,
        history: result.history,
        stop_reason: result.stop_reason,
        evaluations: result.evaluations,
        seed: cma.seed,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((output, report))
}
