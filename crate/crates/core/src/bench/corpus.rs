//! Clip corpora for the benchmarks: seeded synthetic signals, or WAV files
//! from a directory.

use std::f64::consts::PI;
use std::path::Path;

use crate::audio::{db_to_amp, AudioBuffer};
use crate::effects::biquad::{compute_biquad, FilterKind};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::wav::read_wav;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipKind {
    PinkNoise,
    SpeechShaped,
    ToneComplex,
    Percussive,
}

impl ClipKind {
    /// Non-stationary kinds, the ones with onsets and gaps.
    pub const PROGRAM: [ClipKind; 3] = [ClipKind::SpeechShaped, ClipKind::ToneComplex, ClipKind::Percussive];

    pub const ALL: [ClipKind; 4] = [
        ClipKind::PinkNoise,
        ClipKind::SpeechShaped,
        ClipKind::ToneComplex,
        ClipKind::Percussive,
    ];
}

/// Scale to the given RMS level in dBFS.
fn set_rms(x: &mut [f64], dbfs: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if rms > 0.0 {
        let g = db_to_amp(dbfs) / rms;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Pink (1/f) noise via Paul Kellet's refined filter on white noise.
pub fn pink_noise(len: usize, rng: &mut Rng) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    (0..len)
        .map(|_| {
            let w = rng.uniform_range(-1.0, 1.0);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let out = b.iter().sum::<f64>() + w * 0.5362;
            b[6] = w * 0.115926;
            out
        })
        .collect()
}

/// Syllables of noise through two formant resonances redrawn per
/// syllable, separated by short gaps and the occasional pause.
fn speech_shaped(len: usize, fs: f64, rng: &mut Rng) -> Vec<f64> {
    let lp = compute_biquad(FilterKind::Lowpass, 8000.0, 0.0, 0.7, fs).expect("valid lowpass");
    let mut out = vec![0.0; len];
    let mut pos = 0usize;
    while pos < len {
        let syl = ((rng.uniform_range(0.12, 0.25) * fs) as usize).min(len - pos);
        let white: Vec<f64> = (0..syl).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let mut voiced = vec![0.0; syl];
        for (center, q) in [(rng.uniform_range(300.0, 900.0), 4.0), (rng.uniform_range(1000.0, 2600.0), 5.0)] {
            let bp = compute_biquad(FilterKind::Peaking, center, 24.0, q, fs).expect("formant below Nyquist");
            let mut y = bp.process(&white);
            lp.process_in_place(&mut y);
            voiced.iter_mut().zip(&y).for_each(|(v, s)| *v += s);
        }
        for (n, v) in voiced.iter().enumerate() {
            out[pos + n] += v * (PI * n as f64 / syl as f64).sin().powf(1.5);
        }
        let mut gap = rng.uniform_range(0.03, 0.12);
        if rng.below(5) == 0 {
            gap += 0.3;
        }
        pos += syl + (gap * fs) as usize;
    }
    out
}

/// Harmonic notes with decaying partials and a short noise attack, one new
/// note every 0.25–0.6 s.
fn tone_complex(len: usize, fs: f64, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let mut start = 0usize;
    while start < len {
        let dur = (rng.uniform_range(0.25, 0.6) * fs) as usize;
        let f0 = 110.0 * 2f64.powf(rng.uniform_range(0.0, 3.0));
        let tilt = rng.uniform_range(0.6, 1.2);
        let decay = rng.uniform_range(6.0, 12.0);
        let end = (start + dur).min(len);
        for k in 1..=40 {
            let fk = f0 * k as f64;
            if fk > 0.45 * fs {
                break;
            }
            let a = 1.0 / (k as f64).powf(tilt);
            for (n, slot) in out[start..end].iter_mut().enumerate() {
                let t = n as f64 / fs;
                *slot += a * (2.0 * PI * fk * t).sin() * (-decay * t).exp();
            }
        }
        let attack = 0.005 * fs;
        for (n, slot) in out[start..end].iter_mut().enumerate().take((5.0 * attack) as usize) {
            *slot += 0.3 * rng.uniform_range(-1.0, 1.0) * (-(n as f64) / attack).exp();
        }
        start = end;
    }
    out
}

/// Exponentially decaying filtered-noise hits at irregular intervals.
fn percussive(len: usize, fs: f64, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let mut pos = 0usize;
    while pos < len {
        let bright = rng.uniform_range(800.0, 9000.0);
        let lp = compute_biquad(FilterKind::Lowpass, bright, 0.0, 0.8, fs).expect("valid lowpass");
        let decay_s = rng.uniform_range(0.02, 0.06);
        let hit_len = ((decay_s * 5.0 * fs) as usize).min(len - pos);
        let amp = rng.uniform_range(0.4, 1.0);
        let mut hit: Vec<f64> = (0..hit_len)
            .map(|n| amp * rng.uniform_range(-1.0, 1.0) * (-(n as f64) / (decay_s * fs)).exp())
            .collect();
        lp.process_in_place(&mut hit);
        out[pos..pos + hit_len].iter_mut().zip(&hit).for_each(|(o, h)| *o += h);
        pos += (rng.uniform_range(0.12, 0.5) * fs) as usize;
    }
    out
}

/// RMS level of every synthetic clip.
pub const CORPUS_LEVEL_DBFS: f64 = -26.0;

pub fn synthetic_clip(kind: ClipKind, seconds: f64, sample_rate: u32, rng: &mut Rng) -> AudioBuffer {
    let fs = sample_rate as f64;
    let len = (seconds * fs) as usize;
    let mut x = match kind {
        ClipKind::PinkNoise => pink_noise(len, rng),
        ClipKind::SpeechShaped => speech_shaped(len, fs, rng),
        ClipKind::ToneComplex => tone_complex(len, fs, rng),
        ClipKind::Percussive => percussive(len, fs, rng),
    };
    set_rms(&mut x, CORPUS_LEVEL_DBFS);
    AudioBuffer::mono(sample_rate, x).expect("mono buffer")
}

/// Clips with a content group label. Tasks that pair two different clips
/// "of the same kind of content" draw both from one group.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub clips: Vec<AudioBuffer>,
    pub groups: Vec<usize>,
}

impl Corpus {
    /// All clips in one group.
    pub fn ungrouped(clips: Vec<AudioBuffer>) -> Self {
        let groups = vec![0; clips.len()];
        Self { clips, groups }
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// Indices of the other clips in `index`'s group.
    pub fn group_mates(&self, index: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| j != index && self.groups[j] == self.groups[index])
            .collect()
    }

    /// Size of the largest group.
    pub fn largest_group(&self) -> usize {
        let mut sizes = std::collections::BTreeMap::new();
        for g in &self.groups {
            *sizes.entry(*g).or_insert(0usize) += 1;
        }
        sizes.values().copied().max().unwrap_or(0)
    }

    /// `k` distinct clips from one group: an anchor drawn uniformly from the
    /// clips whose group holds at least `k`, then `k - 1` of its mates.
    pub fn draw_from_group(&self, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        let eligible: Vec<usize> = (0..self.len())
            .filter(|&i| self.group_mates(i).len() + 1 >= k)
            .collect();
        if eligible.is_empty() {
            return Err(Error::CorpusTooSmall { have: self.largest_group(), need: k });
        }
        let anchor = eligible[rng.below(eligible.len())];
        let mates = self.group_mates(anchor);
        let mut picks = vec![anchor];
        picks.extend(rng.distinct(mates.len(), k - 1).into_iter().map(|j| mates[j]));
        Ok(picks)
    }
}

/// `n` clips cycling through `kinds`, grouped by kind. Clip `i` depends
/// only on (seed, i, kinds).
pub fn synthetic_corpus_of(kinds: &[ClipKind], n: usize, seconds: f64, sample_rate: u32, seed: u64) -> Corpus {
    assert!(!kinds.is_empty(), "at least one clip kind");
    let root = Rng::new(seed);
    let (clips, groups) = (0..n)
        .map(|i| {
            let mut rng = root.fork(i as u64);
            let kind = kinds[i % kinds.len()];
            (synthetic_clip(kind, seconds, sample_rate, &mut rng), kind as usize)
        })
        .unzip();
    Corpus { clips, groups }
}

/// `n` clips cycling through all four kinds.
pub fn synthetic_corpus(n: usize, seconds: f64, sample_rate: u32, seed: u64) -> Corpus {
    synthetic_corpus_of(&ClipKind::ALL, n, seconds, sample_rate, seed)
}

/// Every `.wav` file in `dir`, sorted by file name, as one group.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyDirectory(dir.to_path_buf()));
    }
    Ok(Corpus::ungrouped(paths.iter().map(read_wav).collect::<Result<_>>()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_leveled() {
        let a = synthetic_corpus(8, 0.5, 48_000, 3);
        let b = synthetic_corpus(8, 0.5, 48_000, 3);
        assert_eq!(a, b);
        assert_eq!(a.groups, vec![0, 1, 2, 3, 0, 1, 2, 3]);
        assert_eq!(a.group_mates(1), vec![5]);
        assert_eq!(a.largest_group(), 2);
        let mut rng = Rng::new(0);
        let picks = a.draw_from_group(2, &mut rng).unwrap();
        assert_eq!(a.groups[picks[0]], a.groups[picks[1]]);
        assert_ne!(picks[0], picks[1]);
        assert!(matches!(a.draw_from_group(3, &mut rng), Err(Error::CorpusTooSmall { have: 2, need: 3 })));
        for clip in &a.clips {
            assert_eq!(clip.len(), 24_000);
            let x = clip.channel(0);
            let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
            let db = 20.0 * rms.log10();
            assert!((db - CORPUS_LEVEL_DBFS).abs() < 1e-9, "{db}");
            assert!(x.iter().all(|v| v.is_finite() && v.abs() < 1.0));
        }
    }

    #[test]
    fn pink_noise_spectrum_falls() {
        let mut rng = Rng::new(1);
        let x = pink_noise(1 << 16, &mut rng);
        let cfg = crate::style::SpectrogramConfig::default();
        let mag = crate::style::stft_mag(&x, &cfg);
        let band = |lo: usize, hi: usize| -> f64 {
            (0..mag.frames)
                .map(|f| mag.row(f)[lo..hi].iter().map(|m| m * m).sum::<f64>() / (hi - lo) as f64)
                .sum()
        };
        // roughly −3 dB/octave: bins 40–80 vs 320–640 are three octaves apart
        let drop = 10.0 * (band(40, 80) / band(320, 640)).log10();
        assert!((6.0..12.0).contains(&drop), "{drop} dB");
    }
}
