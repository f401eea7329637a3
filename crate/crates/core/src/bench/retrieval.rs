//! Style retrieval: find the one clip in a set that went through the same
//! random effect chain as the query.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::audio::AudioBuffer;
use crate::bench::corpus::Corpus;
use crate::chain::{Chain, Stage};
use crate::effects::builtin_effects;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::style::{cosine_similarity, StyleEmbedder};

#[derive(Debug, Clone)]
pub struct RetrievalConfig {
    /// Effects per chain (N).
    pub n_effects: usize,
    /// Items in the retrieval set, the match included (M).
    pub set_size: usize,
    pub trials: usize,
    pub seed: u64,
}

impl RetrievalConfig {
    pub fn new(n_effects: usize, set_size: usize, trials: usize, seed: u64) -> Self {
        Self {
            n_effects,
            set_size,
            trials,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalTrial {
    pub query_source: usize,
    pub match_source: usize,
    pub chain: String,
    /// 1-based rank of the matching item.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub seed: u64,
    pub n_effects: usize,
    pub set_size: usize,
    pub trials: Vec<RetrievalTrial>,
}

impl RetrievalReport {
    pub fn accuracy(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().filter(|t| t.rank == 1).count() as f64 / self.trials.len() as f64
    }

    pub fn mean_reciprocal_rank(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().map(|t| 1.0 / t.rank as f64).sum::<f64>() / self.trials.len() as f64
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task\tretrieval\nseed\t{}", self.seed);
        out.push_str("n_effects\tset_size\ttrials\taccuracy\tmrr\n");
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.4}\t{:.4}",
            self.n_effects,
            self.set_size,
            self.trials.len(),
            self.accuracy(),
            self.mean_reciprocal_rank()
        );
        out.push_str("[trials]\ntrial\tquery\tmatch\trank\tchain\n");
        for (i, t) in self.trials.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{}\t{}\t{}\t{}", t.query_source, t.match_source, t.rank, t.chain);
        }
        out
    }
}

/// `n` distinct registry effects in random order with uniform parameters.
pub fn random_chain(n: usize, rng: &mut Rng) -> Result<(Chain, Vec<f64>)> {
    let registry = builtin_effects();
    if n == 0 || n > registry.len() {
        return Err(Error::InvalidConfig(format!(
            "chain length {n} outside 1..={}",
            registry.len()
        )));
    }
    let stages = rng
        .distinct(registry.len(), n)
        .into_iter()
        .map(|i| Stage::new(registry[i].id))
        .collect::<Result<Vec<_>>>()?;
    let chain = Chain::new(stages)?;
    let params = (0..chain.dim()).map(|_| rng.uniform()).collect();
    Ok((chain, params))
}

fn chain_label(chain: &Chain, params: &[f64]) -> String {
    let ids: Vec<&str> = chain.stages().iter().map(|s| s.effect.id).collect();
    let vals: Vec<String> = params.iter().map(|v| format!("{v:.3}")).collect();
    format!("{}:{}", ids.join("+"), vals.join(","))
}

/// Rank (1-based) of `target` when sorting by descending similarity; among
/// equal similarities the lower set position ranks first.
fn rank_of(similarities: &[f64], target: usize) -> usize {
    let s = similarities[target];
    1 + similarities
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > s || (v == s && j < target))
        .count()
}

pub fn run_retrieval<E: StyleEmbedder + ?Sized>(
    embedder: &E,
    corpus: &Corpus,
    cfg: &RetrievalConfig,
) -> Result<RetrievalReport> {
    if cfg.set_size == 0 {
        return Err(Error::InvalidConfig("retrieval set must hold at least the match".into()));
    }
    let need = cfg.set_size + 2;
    if corpus.largest_group() < need {
        return Err(Error::CorpusTooSmall { have: corpus.largest_group(), need });
    }
    let root = Rng::new(cfg.seed);
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.fork(i as u64);
            // query, match, then set_size - 1 distractors
            let picks = corpus.draw_from_group(cfg.set_size + 1, &mut rng)?;
            let (chain, params) = random_chain(cfg.n_effects, &mut rng)?;
            let query = chain.process(&corpus.clips[picks[0]], &params)?;
            let match_pos = rng.below(cfg.set_size);
            let mut set: Vec<AudioBuffer> = Vec::with_capacity(cfg.set_size);
            let mut distractors = picks[2..].iter();
            for pos in 0..cfg.set_size {
                if pos == match_pos {
                    set.push(chain.process(&corpus.clips[picks[1]], &params)?);
                } else {
                    let src = *distractors.next().expect("set_size - 1 distractors");
                    let (c, p) = random_chain(cfg.n_effects, &mut rng)?;
                    set.push(c.process(&corpus.clips[src], &p)?);
                }
            }
            let zq = embedder.embed(&query)?;
            let sims = set
                .iter()
                .map(|x| cosine_similarity(zq.as_slice(), embedder.embed(x)?.as_slice()))
                .collect::<Result<Vec<_>>>()?;
            Ok(RetrievalTrial {
                query_source: picks[0],
                match_source: picks[1],
                chain: chain_label(&chain, &params),
                rank: rank_of(&sims, match_pos),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RetrievalReport {
        seed: cfg.seed,
        n_effects: cfg.n_effects,
        set_size: cfg.set_size,
        trials,
    })
}
