//! Parameter estimation: render a reference with one parameter at a known
//! value, then let style transfer recover it from a different input clip.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bench::corpus::Corpus;
use crate::bench::stats::{mse, pearson_rho};
use crate::chain::{Chain, Stage};
use crate::cmaes::CmaConfig;
use crate::effects::descriptor;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::style::StyleEmbedder;
use crate::transfer::{style_transfer_with, TransferConfig};

pub const DEFAULT_TARGETS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

#[derive(Debug, Clone)]
pub struct ParamEstConfig {
    pub effect: String,
    pub param: String,
    pub targets: Vec<f64>,
    pub trials_per_target: usize,
    /// Use the reference clip itself as input instead of a different clip.
    pub content_matched: bool,
    /// Optimizer settings; `dim` and `seed` are set per run.
    pub cma: CmaConfig,
    pub seed: u64,
}

impl ParamEstConfig {
    pub fn new(effect: &str, param: &str, seed: u64) -> Self {
        Self {
            effect: effect.to_string(),
            param: param.to_string(),
            targets: DEFAULT_TARGETS.to_vec(),
            trials_per_target: 3,
            content_matched: false,
            cma: CmaConfig::new(1),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEstRun {
    pub target: f64,
    pub estimate: f64,
    pub similarity: f64,
    pub reference_source: usize,
    pub input_source: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEstReport {
    pub seed: u64,
    pub effect: String,
    pub param: String,
    pub runs: Vec<ParamEstRun>,
}

impl ParamEstReport {
    pub fn targets(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.target).collect()
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.estimate).collect()
    }

    pub fn mse(&self) -> f64 {
        mse(&self.targets(), &self.estimates()).expect("equal lengths")
    }

    /// Errors when targets or estimates are constant.
    pub fn rho(&self) -> Result<f64> {
        pearson_rho(&self.targets(), &self.estimates())
    }

    /// Summary row (effect, param, MSE, ρ), then one row per run.
    pub fn to_tsv(&self) -> String {
        let rho = match self.rho() {
            Ok(r) => format!("{r:.4}"),
            Err(_) => "undefined".to_string(),
        };
        let mut out = String::new();
        let _ = writeln!(out, "task\tparam_estimation\nseed\t{}\nruns\t{}", self.seed, self.runs.len());
        out.push_str("effect\tparam\tmse\trho\n");
        let _ = writeln!(out, "{}\t{}\t{:.4}\t{rho}", self.effect, self.param, self.mse());
        out.push_str("[runs]\nrun\ttarget\testimate\tsimilarity\treference\tinput\n");
        for (i, r) in self.runs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i}\t{}\t{}\t{}\t{}\t{}",
                r.target, r.estimate, r.similarity, r.reference_source, r.input_source
            );
        }
        out
    }
}

/// Single-stage chain with every parameter but `param` pinned to its default.
pub fn single_param_chain(effect: &str, param: &str) -> Result<Chain> {
    let d = descriptor(effect)?;
    let idx = d.param_index(param).ok_or_else(|| Error::UnknownParam {
        effect: effect.to_string(),
        param: param.to_string(),
    })?;
    let mut stage = Stage::new(effect)?;
    for (i, p) in d.params.iter().enumerate() {
        if i != idx {
            stage = stage.fix(p.name, p.default)?;
        }
    }
    Chain::new(vec![stage])
}

/// One run per (target, trial). Run `r` draws a reference clip and, unless
/// content-matched, a different input clip from the same corpus group.
pub fn run_param_estimation<E: StyleEmbedder + ?Sized>(
    embedder: &E,
    corpus: &Corpus,
    cfg: &ParamEstConfig,
) -> Result<ParamEstReport> {
    let chain = single_param_chain(&cfg.effect, &cfg.param)?;
    if corpus.is_empty() {
        return Err(Error::CorpusTooSmall { have: 0, need: 2 });
    }
    if let Some(t) = cfg.targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidConfig(format!("target {t} outside [0, 1]")));
    }
    let root = Rng::new(cfg.seed);
    let jobs: Vec<(usize, f64)> = cfg
        .targets
        .iter()
        .flat_map(|&t| std::iter::repeat_n(t, cfg.trials_per_target))
        .enumerate()
        .collect();
    let runs = jobs
        .into_par_iter()
        .map(|(r, target)| {
            let mut rng = root.fork(r as u64);
            let reference_source = rng.below(corpus.len());
            let input_source = if cfg.content_matched {
                reference_source
            } else {
                let mates = corpus.group_mates(reference_source);
                if mates.is_empty() {
                    return Err(Error::CorpusTooSmall { have: 1, need: 2 });
                }
                mates[rng.below(mates.len())]
            };
            let reference = chain.process(&corpus.clips[reference_source], &[target])?;
            let mut tc = TransferConfig::new(chain.clone(), rng.next_u64());
            tc.cma = CmaConfig {
                dim: 1,
                seed: tc.cma.seed,
                ..cfg.cma.clone()
            };
            let (_, report) = style_transfer_with(embedder, &corpus.clips[input_source], &reference, &tc)?;
            Ok(ParamEstRun {
                target,
                estimate: report.best_params[0],
                similarity: report.best_similarity,
                reference_source,
                input_source,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParamEstReport {
        seed: cfg.seed,
        effect: cfg.effect.clone(),
        param: cfg.param.clone(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::corpus::synthetic_corpus;
    use crate::style::Handcrafted;

    #[test]
    fn single_param_chain_frees_one_parameter() {
        let c = single_param_chain("reverb", "size").unwrap();
        assert_eq!(c.dim(), 1);
        let d = c.describe(&[0.3]).unwrap();
        assert_eq!(d.iter().filter(|v| !v.fixed).count(), 1);
        assert!(single_param_chain("reverb", "room").is_err());
        assert!(single_param_chain("chorus", "rate").is_err());
    }

    #[test]
    fn report_aggregates_recompute() {
        let report = ParamEstReport {
            seed: 0,
            effect: "gain".into(),
            param: "level".into(),
            runs: [(0.2, 0.25), (0.4, 0.35), (0.6, 0.6), (0.8, 0.9)]
                .iter()
                .map(|&(target, estimate)| ParamEstRun {
                    target,
                    estimate,
                    similarity: 1.0,
                    reference_source: 0,
                    input_source: 1,
                })
                .collect(),
        };
        let expected_mse = (0.05f64.powi(2) * 2.0 + 0.1f64.powi(2)) / 4.0;
        assert!((report.mse() - expected_mse).abs() < 1e-12);
        assert!(report.rho().unwrap() > 0.9);
        assert!(report.to_tsv().contains(&format!("gain\tlevel\t{:.4}\t", report.mse())));
    }

    #[test]
    fn short_budget_run_is_seeded() {
        let corpus = synthetic_corpus(8, 0.25, 48_000, 1);
        let mut cfg = ParamEstConfig::new("gain", "level", 4);
        cfg.targets = vec![0.3, 0.7];
        cfg.trials_per_target = 1;
        cfg.cma.population = 8;
        cfg.cma.max_generations = 3;
        let a = run_param_estimation(&Handcrafted, &corpus, &cfg).unwrap();
        assert_eq!(a, run_param_estimation(&Handcrafted, &corpus, &cfg).unwrap());
        assert_eq!(a.runs.len(), 2);
        for r in &a.runs {
            assert_ne!(r.reference_source, r.input_source);
            assert_eq!(corpus.groups[r.reference_source], corpus.groups[r.input_source]);
        }
    }
}
