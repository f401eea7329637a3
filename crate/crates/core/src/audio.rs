//! Multichannel sample storage and simple channel transforms.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Planar mono or stereo audio. Samples are stored as `f64` so that chained
/// gain stages and filter round trips stay within 1e-9 of their exact values.
///
/// Channel data sits behind an `Arc`, so clones are cheap and buffers can be
/// shared across worker threads.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    sample_rate: u32,
    channels: Arc<[Vec<f64>]>,
}

impl AudioBuffer {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidBuffer("sample rate must be positive".into()));
        }
        if channels.is_empty() || channels.len() > 2 {
            return Err(Error::InvalidBuffer(format!(
                "{} channels (expected 1 or 2)",
                channels.len()
            )));
        }
        if channels.iter().any(|c| c.len() != channels[0].len()) {
            return Err(Error::InvalidBuffer("channel lengths differ".into()));
        }
        Ok(Self {
            sample_rate,
            channels: channels.into(),
        })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![samples])
    }

    pub fn stereo(sample_rate: u32, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![left, right])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f64]> {
        self.channels.iter().map(Vec::as_slice)
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// New buffer with the same rate and channel count, each channel mapped
    /// through `f`. `f` must preserve length.
    pub fn map_channels<F>(&self, mut f: F) -> AudioBuffer
    where
        F: FnMut(usize, &[f64]) -> Vec<f64>,
    {
        let channels: Vec<Vec<f64>> = self
            .channels
            .iter()
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
        debug_assert!(channels.iter().all(|c| c.len() == self.len()));
        self.with_channels(channels)
    }

    fn with_channels(&self, channels: Vec<Vec<f64>>) -> AudioBuffer {
        AudioBuffer {
            sample_rate: self.sample_rate,
            channels: channels.into(),
        }
    }

    pub fn peak(&self) -> f64 {
        self.channels()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// First `len` samples of each channel (or the whole buffer if shorter).
    pub fn head(&self, len: usize) -> AudioBuffer {
        let len = len.min(self.len());
        if len == self.len() {
            return self.clone();
        }
        self.with_channels(self.channels().map(|c| c[..len].to_vec()).collect())
    }

    /// Round every sample to the nearest `f32`. Used where data must survive a
    /// float32 file round trip bit for bit.
    pub fn quantize_f32(&self) -> AudioBuffer {
        self.map_channels(|_, c| c.iter().map(|&x| x as f32 as f64).collect())
    }

    /// Scale so the absolute peak sits at `target_dbfs`. Silent buffers are
    /// returned unchanged.
    pub fn peak_normalize(&self, target_dbfs: f64) -> AudioBuffer {
        let peak = self.peak();
        if peak == 0.0 {
            return self.clone();
        }
        let scale = db_to_amp(target_dbfs) / peak;
        self.map_channels(|_, c| c.iter().map(|x| x * scale).collect())
    }

    /// Convert to two channels, duplicating a mono signal.
    pub fn to_stereo(&self) -> AudioBuffer {
        if self.num_channels() == 2 {
            return self.clone();
        }
        AudioBuffer {
            sample_rate: self.sample_rate,
            channels: vec![self.channels[0].clone(), self.channels[0].clone()].into(),
        }
    }

    pub fn ensure_same_rate(&self, other: &AudioBuffer) -> Result<()> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::SampleRateMismatch(self.sample_rate, other.sample_rate));
        }
        Ok(())
    }
}

pub fn db_to_amp(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn amp_to_db(amp: f64) -> f64 {
    20.0 * amp.log10()
}

/// Mid = (L+R)/2, side = (L−R)/2. A mono buffer yields its own signal as mid
/// and silence as side.
pub fn mid_side_split(buffer: &AudioBuffer) -> (Vec<f64>, Vec<f64>) {
    if buffer.num_channels() == 1 {
        return (buffer.channel(0).to_vec(), vec![0.0; buffer.len()]);
    }
    let (l, r) = (buffer.channel(0), buffer.channel(1));
    let mid = l.iter().zip(r).map(|(a, b)| (a + b) / 2.0).collect();
    let side = l.iter().zip(r).map(|(a, b)| (a - b) / 2.0).collect();
    (mid, side)
}

/// Inverse of [`mid_side_split`]: L = mid + side, R = mid − side.
pub fn mid_side_merge(sample_rate: u32, mid: &[f64], side: &[f64]) -> Result<AudioBuffer> {
    if mid.len() != side.len() {
        return Err(Error::DimensionMismatch(mid.len(), side.len()));
    }
    let left = mid.iter().zip(side).map(|(m, s)| m + s).collect();
    let right = mid.iter().zip(side).map(|(m, s)| m - s).collect();
    AudioBuffer::stereo(sample_rate, left, right)
}

pub fn apply_gain_db(buffer: &AudioBuffer, gain_db: f64) -> AudioBuffer {
    let g = db_to_amp(gain_db);
    buffer.map_channels(|_, c| c.iter().map(|x| x * g).collect())
}

/// Contiguous `length`-sample segment with a uniformly drawn start offset.
pub fn random_crop(buffer: &AudioBuffer, length: usize, rng: &mut Rng) -> Result<AudioBuffer> {
    if length > buffer.len() {
        return Err(Error::CropTooLong {
            requested: length,
            available: buffer.len(),
        });
    }
    let offset = rng.below(buffer.len() - length + 1);
    Ok(buffer.with_channels(
        buffer.channels().map(|c| c[offset..offset + length].to_vec()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn stereo(l: Vec<f64>, r: Vec<f64>) -> AudioBuffer {
        AudioBuffer::stereo(48_000, l, r).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(AudioBuffer::new(0, vec![vec![0.0]]).is_err());
        assert!(AudioBuffer::new(48_000, vec![]).is_err());
        assert!(AudioBuffer::new(48_000, vec![vec![0.0]; 3]).is_err());
        assert!(AudioBuffer::stereo(48_000, vec![0.0; 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn mid_side_cases() {
        let (m, s) = mid_side_split(&stereo(vec![1.0], vec![1.0]));
        assert_eq!((m[0], s[0]), (1.0, 0.0));
        let (m, s) = mid_side_split(&stereo(vec![1.0], vec![-1.0]));
        assert_eq!((m[0], s[0]), (0.0, 1.0));
        let (m, s) = mid_side_split(&AudioBuffer::mono(48_000, vec![0.3, -0.2]).unwrap());
        assert_eq!(m, vec![0.3, -0.2]);
        assert_eq!(s, vec![0.0, 0.0]);
    }

    #[test]
    fn gain_examples() {
        let b = AudioBuffer::mono(48_000, vec![1.0, -0.5]).unwrap();
        assert_eq!(apply_gain_db(&b, 0.0), b);
        let half = apply_gain_db(&b, -20.0 * 2f64.log10());
        assert!((half.channel(0)[0] - 0.5).abs() < 1e-9);
        let low = apply_gain_db(&b, -32.0);
        assert!((low.channel(0)[0] - 10f64.powf(-1.6)).abs() < 1e-12);
        assert!((low.channel(0)[0] - 0.02512).abs() < 1e-5);
    }

    #[test]
    fn crop_cases() {
        let b = AudioBuffer::mono(48_000, (0..100).map(f64::from).collect()).unwrap();
        let mut rng = Rng::new(3);
        assert_eq!(random_crop(&b, 100, &mut rng).unwrap(), b);
        let a = random_crop(&b, 10, &mut Rng::new(9)).unwrap();
        let c = random_crop(&b, 10, &mut Rng::new(9)).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.len(), 10);
        assert!(matches!(
            random_crop(&b, 101, &mut rng),
            Err(Error::CropTooLong { .. })
        ));
    }

    proptest! {
        #[test]
        fn mid_side_roundtrip_exact(pairs in prop::collection::vec((-1.0f32..1.0, -1.0f32..1.0), 1..64)) {
            // f32-valued samples (anything read from disk) sum exactly in f64,
            // so split and merge must reproduce them bit for bit.
            let (l, r): (Vec<f64>, Vec<f64>) =
                pairs.into_iter().map(|(a, b)| (a as f64, b as f64)).unzip();
            let b = stereo(l, r);
            let (m, s) = mid_side_split(&b);
            prop_assert_eq!(mid_side_merge(48_000, &m, &s).unwrap(), b);
        }

        #[test]
        fn gain_inverse(xs in prop::collection::vec(-1.0f64..1.0, 1..64), g in -60.0f64..60.0) {
            let b = AudioBuffer::mono(44_100, xs).unwrap();
            let back = apply_gain_db(&apply_gain_db(&b, g), -g);
            for (a, c) in b.channel(0).iter().zip(back.channel(0)) {
                prop_assert!((a - c).abs() <= 1e-9);
            }
        }
    }
}
