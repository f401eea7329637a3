//! Evaluation tasks: zero-shot style classification, style retrieval,
//! parameter estimation, and the rule-based transfer baseline.

pub mod classify;
pub mod corpus;
pub mod param_est;
pub mod retrieval;
pub mod rule_based;
pub mod stats;
pub mod styles;

use crate::audio::AudioBuffer;
use crate::error::Result;
use crate::rng::{mix64, Rng};
use crate::style::{Embedding, StyleEmbedder, EMBEDDING_DIM, HALF_DIM};

pub use classify::{run_classification, zero_shot_classify, ClassificationConfig, ClassificationReport};
pub use corpus::{load_corpus, synthetic_corpus, synthetic_corpus_of, ClipKind, Corpus};
pub use param_est::{run_param_estimation, ParamEstConfig, ParamEstReport};
pub use retrieval::{run_retrieval, RetrievalConfig, RetrievalReport};
pub use rule_based::rule_based_transfer;
pub use stats::{binomial_test, mse, pearson_rho};
pub use styles::{apply_style, style_preset, StyleId, StylePreset};

/// Control embedder: a seeded Gaussian vector keyed by a hash of the
/// samples. Equal audio embeds equally; anything else is unrelated noise.
#[derive(Debug, Clone, Copy)]
pub struct NoiseEmbedder {
    seed: u64,
}

impl NoiseEmbedder {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl StyleEmbedder for NoiseEmbedder {
    fn embed(&self, buffer: &AudioBuffer) -> Result<Embedding> {
        let mut h = mix64(self.seed ^ buffer.sample_rate() as u64);
        for c in buffer.channels() {
            for x in c {
                h = mix64(h ^ x.to_bits());
            }
        }
        let mut rng = Rng::new(h);
        let mut v: Vec<f64> = (0..EMBEDDING_DIM).map(|_| rng.normal()).collect();
        for half in v.chunks_mut(HALF_DIM) {
            let n = half.iter().map(|x| x * x).sum::<f64>().sqrt();
            half.iter_mut().for_each(|x| *x /= n);
        }
        Ok(Embedding::from_vec(v))
    }
}
