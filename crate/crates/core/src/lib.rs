//! Audio production style transfer by inference-time optimization.
//!
//! An input recording is pushed through a chain of built-in effects whose
//! normalized controls are searched with CMA-ES so that the output's
//! production-style embedding is as close as possible (cosine similarity) to
//! that of a reference recording.

pub mod audio;
pub mod bench;
pub mod chain;
pub mod cmaes;
pub mod effects;
pub mod error;
pub mod presets;
pub mod rng;
pub mod style;
pub mod transfer;
pub mod wav;

pub use audio::AudioBuffer;
pub use error::{Error, Result};
pub use rng::Rng;
