//! Zero-shot style classification: a styled query is labelled with the
//! style of its most similar prototype, each prototype being a different
//! source clip rendered in one of the five styles.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::audio::{apply_gain_db, AudioBuffer};
use crate::bench::corpus::Corpus;
use crate::bench::styles::{apply_style, StyleId};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::style::{cosine_similarity, StyleEmbedder};

/// Style of the most similar prototype. Equal similarities resolve to the
/// earlier style in TL, BR, WM, BC, NT order.
pub fn zero_shot_classify<E: StyleEmbedder + ?Sized>(
    embedder: &E,
    query: &AudioBuffer,
    prototypes: &[(StyleId, AudioBuffer)],
) -> Result<StyleId> {
    if prototypes.len() < 2 {
        return Err(Error::InvalidConfig("classification needs at least two prototypes".into()));
    }
    for (_, p) in prototypes {
        query.ensure_same_rate(p)?;
    }
    let zq = embedder.embed(query)?;
    let mut scored = prototypes
        .iter()
        .map(|(id, p)| Ok((*id, cosine_similarity(zq.as_slice(), embedder.embed(p)?.as_slice())?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by_key(|(id, _)| *id);
    let mut best = scored[0];
    for &(id, s) in &scored[1..] {
        if s > best.1 {
            best = (id, s);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone)]
pub struct ClassificationConfig {
    pub trials: usize,
    /// Each trial applies a uniform gain in ±`query_gain_db` to the query.
    pub query_gain_db: f64,
    pub seed: u64,
}

impl ClassificationConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            trials: 200,
            query_gain_db: 0.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationTrial {
    pub query_source: usize,
    pub prototype_sources: [usize; 5],
    pub truth: StyleId,
    pub predicted: StyleId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub seed: u64,
    pub trials: Vec<ClassificationTrial>,
}

impl ClassificationReport {
    /// (correct, total) for each style in TL..NT order.
    pub fn counts(&self) -> [(usize, usize); 5] {
        let mut c = [(0, 0); 5];
        for t in &self.trials {
            let slot = &mut c[t.truth.index()];
            slot.1 += 1;
            slot.0 += usize::from(t.truth == t.predicted);
        }
        c
    }

    /// Accuracy for one style (0 when it never came up).
    pub fn accuracy(&self, style: StyleId) -> f64 {
        let (ok, n) = self.counts()[style.index()];
        if n == 0 {
            0.0
        } else {
            ok as f64 / n as f64
        }
    }

    /// Mean of the per-style accuracies over styles that were queried.
    pub fn average_accuracy(&self) -> f64 {
        let counts = self.counts();
        let present: Vec<f64> = counts.iter().filter(|c| c.1 > 0).map(|c| c.0 as f64 / c.1 as f64).collect();
        if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        }
    }

    pub fn correct(&self) -> usize {
        self.trials.iter().filter(|t| t.truth == t.predicted).count()
    }

    /// Per-style table with an AVG row, then one row per trial.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task\tclassification\nseed\t{}\ntrials\t{}", self.seed, self.trials.len());
        out.push_str("style\tcorrect\ttotal\taccuracy\n");
        for (id, (ok, n)) in StyleId::ALL.iter().zip(self.counts()) {
            let _ = writeln!(out, "{id}\t{ok}\t{n}\t{:.4}", self.accuracy(*id));
        }
        let _ = writeln!(out, "AVG\t{}\t{}\t{:.4}", self.correct(), self.trials.len(), self.average_accuracy());
        out.push_str("[trials]\ntrial\tquery\tprototypes\ttruth\tpredicted\n");
        for (i, t) in self.trials.iter().enumerate() {
            let protos: Vec<String> = t.prototype_sources.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(out, "{i}\t{}\t{}\t{}\t{}", t.query_source, protos.join(","), t.truth, t.predicted);
        }
        out
    }
}

/// `cfg.trials` zero-shot trials. Trial `i` queries style `i mod 5` on one
/// source clip against prototypes made from five other clips of the same
/// content group (prototype `j` carries style `j`).
pub fn run_classification<E: StyleEmbedder + ?Sized>(
    embedder: &E,
    corpus: &Corpus,
    cfg: &ClassificationConfig,
) -> Result<ClassificationReport> {
    if corpus.largest_group() < 6 {
        return Err(Error::CorpusTooSmall { have: corpus.largest_group(), need: 6 });
    }
    let root = Rng::new(cfg.seed);
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.fork(i as u64);
            let picks = corpus.draw_from_group(6, &mut rng)?;
            let truth = StyleId::ALL[i % 5];
            let gain = if cfg.query_gain_db > 0.0 {
                rng.uniform_range(-cfg.query_gain_db, cfg.query_gain_db)
            } else {
                0.0
            };
            let query = apply_gain_db(&apply_style(truth, &corpus.clips[picks[0]])?, gain);
            let prototypes = StyleId::ALL
                .iter()
                .zip(&picks[1..])
                .map(|(&id, &src)| Ok((id, apply_style(id, &corpus.clips[src])?)))
                .collect::<Result<Vec<_>>>()?;
            let predicted = zero_shot_classify(embedder, &query, &prototypes)?;
            Ok(ClassificationTrial {
                query_source: picks[0],
                prototype_sources: [picks[1], picks[2], picks[3], picks[4], picks[5]],
                truth,
                predicted,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassificationReport { seed: cfg.seed, trials })
}
