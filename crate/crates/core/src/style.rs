//! Production-style embedding and similarity.
//!
//! The embedding summarizes the mid and side signals separately. Each half
//! holds MFCC statistics (from a clipped, rescaled log-mel spectrogram) plus
//! waveform level, crest factor and spectral shape descriptors, and is
//! L2-normalized on its own. Halves are laid out mid first:
//!
//! | range   | content                                   |
//! |---------|-------------------------------------------|
//! | 0..20   | MFCC means                                |
//! | 20..40  | MFCC standard deviations                  |
//! | 40      | log10(RMS + 1e-8)                         |
//! | 41      | crest factor, dB                          |
//! | 42      | mean spectral centroid / (fs/2)           |
//! | 43      | mean spectral bandwidth / (fs/2)          |
//!
//! and the same 44 entries again for the side signal at 44..88.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use realfft::{RealFftPlanner, RealToComplex};

use crate::audio::{mid_side_split, AudioBuffer};
use crate::error::{Error, Result};

pub const N_MFCC: usize = 20;
pub const HALF_DIM: usize = 2 * N_MFCC + 4;
pub const EMBEDDING_DIM: usize = 2 * HALF_DIM;
/// Guard in the cosine denominator.
pub const COSINE_EPS: f64 = 1e-8;
/// Longest stretch of audio the embedder looks at.
pub const MAX_EMBED_SECONDS: f64 = 10.0;
/// Peak amplitude at or below which a channel counts as silent.
const SILENCE_PEAK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrogramConfig {
    pub window_size: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub clip_lo_db: f64,
    pub clip_hi_db: f64,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self {
            window_size: 2048,
            hop: 512,
            n_mels: 128,
            clip_lo_db: -80.0,
            clip_hi_db: 40.0,
        }
    }
}

impl SpectrogramConfig {
    pub fn bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    /// Frames for a signal of `len` samples; shorter signals are padded to one window.
    pub fn frames(&self, len: usize) -> usize {
        if len <= self.window_size {
            1
        } else {
            (len - self.window_size) / self.hop + 1
        }
    }
}

/// Row-major frames × columns matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub frames: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FrameMatrix {
    pub fn zeros(frames: usize, cols: usize) -> Self {
        Self {
            frames,
            cols,
            data: vec![0.0; frames * cols],
        }
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.cols..(frame + 1) * self.cols]
    }

    pub fn row_mut(&mut self, frame: usize) -> &mut [f64] {
        &mut self.data[frame * self.cols..(frame + 1) * self.cols]
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn fft_plan(n: usize) -> Arc<dyn RealToComplex<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<usize, Arc<dyn RealToComplex<f64>>>>> = OnceLock::new();
    let mut plans = PLANS.get_or_init(Default::default).lock().expect("fft plan cache poisoned");
    plans
        .entry(n)
        .or_insert_with(|| RealFftPlanner::<f64>::new().plan_fft_forward(n))
        .clone()
}

/// Triangular HTK-mel filters, stored sparsely as (first bin, weights).
#[derive(Debug)]
pub struct MelBank {
    filters: Vec<(usize, Vec<f64>)>,
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

impl MelBank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: f64) -> Self {
        let top = hz_to_mel(sample_rate / 2.0);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bins = n_fft / 2 + 1;
        let bin_hz = sample_rate / n_fft as f64;
        let filters = (0..n_mels)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let weights: Vec<(usize, f64)> = (0..bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = ((f - lo) / (mid - lo)).min((hi - f) / (hi - mid));
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                let start = weights.first().map_or(0, |(k, _)| *k);
                (start, weights.into_iter().map(|(_, w)| w).collect())
            })
            .collect();
        Self { filters }
    }

    fn cached(n_mels: usize, n_fft: usize, sample_rate: u32) -> Arc<MelBank> {
        type Key = (usize, usize, u32);
        static BANKS: OnceLock<Mutex<HashMap<Key, Arc<MelBank>>>> = OnceLock::new();
        let mut banks = BANKS.get_or_init(Default::default).lock().expect("mel cache poisoned");
        banks
            .entry((n_mels, n_fft, sample_rate))
            .or_insert_with(|| Arc::new(MelBank::new(n_mels, n_fft, sample_rate as f64)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for ((start, w), o) in self.filters.iter().zip(out.iter_mut()) {
            *o = w.iter().zip(&power[*start..]).map(|(a, b)| a * b).sum();
        }
    }
}

/// Orthonormal DCT-II basis: `rows` × `n`, row k = s_k cos(πk(2i+1)/2n).
pub fn dct_matrix(rows: usize, n: usize) -> Vec<f64> {
    let mut m = Vec::with_capacity(rows * n);
    for k in 0..rows {
        let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            m.push(s * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos());
        }
    }
    m
}

fn cached_dct(rows: usize, n: usize) -> Arc<Vec<f64>> {
    static DCTS: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<f64>>>>> = OnceLock::new();
    let mut dcts = DCTS.get_or_init(Default::default).lock().expect("dct cache poisoned");
    dcts.entry((rows, n)).or_insert_with(|| Arc::new(dct_matrix(rows, n))).clone()
}

/// Reusable per-signal STFT state.
struct Stft {
    cfg: SpectrogramConfig,
    plan: Arc<dyn RealToComplex<f64>>,
    window: Vec<f64>,
    input: Vec<f64>,
    spectrum: Vec<realfft::num_complex::Complex<f64>>,
    scratch: Vec<realfft::num_complex::Complex<f64>>,
}

impl Stft {
    fn new(cfg: SpectrogramConfig) -> Self {
        let plan = fft_plan(cfg.window_size);
        Self {
            window: hann(cfg.window_size),
            input: plan.make_input_vec(),
            spectrum: plan.make_output_vec(),
            scratch: plan.make_scratch_vec(),
            plan,
            cfg,
        }
    }

    /// Power spectrum of frame `index` of `signal` into `power`.
    fn frame(&mut self, signal: &[f64], index: usize, power: &mut [f64]) {
        let start = index * self.cfg.hop;
        let end = (start + self.cfg.window_size).min(signal.len());
        let avail = end.saturating_sub(start);
        for ((slot, x), w) in self.input.iter_mut().zip(&signal[start.min(end)..end]).zip(&self.window) {
            *slot = x * w;
        }
        self.input[avail..].iter_mut().for_each(|v| *v = 0.0);
        self.plan
            .process_with_scratch(&mut self.input, &mut self.spectrum, &mut self.scratch)
            .expect("buffer sizes come from the plan");
        for (p, c) in power.iter_mut().zip(&self.spectrum) {
            *p = c.norm_sqr();
        }
    }
}

/// |STFT| of a mono signal: Hann window, no centering, one row per frame.
pub fn stft_mag(signal: &[f64], cfg: &SpectrogramConfig) -> FrameMatrix {
    let frames = cfg.frames(signal.len());
    let mut out = FrameMatrix::zeros(frames, cfg.bins());
    let mut stft = Stft::new(*cfg);
    for f in 0..frames {
        let row = out.row_mut(f);
        stft.frame(signal, f, row);
        row.iter_mut().for_each(|p| *p = p.sqrt());
    }
    out
}

/// dB value → clipped and affinely rescaled to [-1, 1].
pub fn scale_db(db: f64, cfg: &SpectrogramConfig) -> f64 {
    let c = db.clamp(cfg.clip_lo_db, cfg.clip_hi_db);
    (c - cfg.clip_lo_db) / (cfg.clip_hi_db - cfg.clip_lo_db) * 2.0 - 1.0
}

fn log_mel_row(power: &[f64], bank: &MelBank, cfg: &SpectrogramConfig, out: &mut [f64]) {
    bank.apply(power, out);
    for v in out.iter_mut() {
        *v = scale_db(10.0 * (*v + 1e-10).log10(), cfg);
    }
}

pub fn log_mel(mag: &FrameMatrix, cfg: &SpectrogramConfig, sample_rate: u32) -> FrameMatrix {
    let bank = MelBank::cached(cfg.n_mels, cfg.window_size, sample_rate);
    let mut out = FrameMatrix::zeros(mag.frames, cfg.n_mels);
    let mut power = vec![0.0; mag.cols];
    for f in 0..mag.frames {
        power.iter_mut().zip(mag.row(f)).for_each(|(p, m)| *p = m * m);
        log_mel_row(&power, &bank, cfg, out.row_mut(f));
    }
    out
}

fn dct_row(dct: &[f64], n: usize, input: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        *o = dct[k * n..(k + 1) * n].iter().zip(input).map(|(a, b)| a * b).sum();
    }
}

/// Orthonormal DCT-II along the mel axis, first `n_coeffs` coefficients.
pub fn mfcc(log_mel: &FrameMatrix, n_coeffs: usize) -> Result<FrameMatrix> {
    if n_coeffs > log_mel.cols {
        return Err(Error::InvalidConfig(format!(
            "{n_coeffs} coefficients requested from {} mel bands",
            log_mel.cols
        )));
    }
    let dct = cached_dct(n_coeffs, log_mel.cols);
    let mut out = FrameMatrix::zeros(log_mel.frames, n_coeffs);
    for f in 0..log_mel.frames {
        dct_row(&dct, log_mel.cols, log_mel.row(f), out.row_mut(f));
    }
    Ok(out)
}

/// Fixed-length style embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mid(&self) -> &[f64] {
        &self.0[..HALF_DIM]
    }

    pub fn side(&self) -> &[f64] {
        &self.0[HALF_DIM..]
    }
}

/// Pooled frame statistics for one mono signal.
struct ChannelFeatures {
    mfcc_mean: Vec<f64>,
    mfcc_std: Vec<f64>,
    centroid: f64,
    bandwidth: f64,
}

fn analyze_channel(signal: &[f64], sample_rate: u32, cfg: &SpectrogramConfig) -> ChannelFeatures {
    let bank = MelBank::cached(cfg.n_mels, cfg.window_size, sample_rate);
    let dct = cached_dct(N_MFCC, cfg.n_mels);
    let mut stft = Stft::new(*cfg);
    let bin_hz = sample_rate as f64 / cfg.window_size as f64;

    let frames = cfg.frames(signal.len());
    let mut power = vec![0.0; cfg.bins()];
    let mut mel = vec![0.0; cfg.n_mels];
    let mut coeffs = vec![0.0; N_MFCC];
    let mut sum = vec![0.0; N_MFCC];
    let mut sum_sq = vec![0.0; N_MFCC];
    let (mut centroid_sum, mut bandwidth_sum, mut voiced) = (0.0, 0.0, 0usize);

    for f in 0..frames {
        stft.frame(signal, f, &mut power);

        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (k, p) in power.iter().enumerate() {
            let m = p.sqrt();
            let hz = k as f64 * bin_hz;
            s0 += m;
            s1 += hz * m;
            s2 += hz * hz * m;
        }
        if s0 > 0.0 {
            let c = s1 / s0;
            centroid_sum += c;
            bandwidth_sum += (s2 / s0 - c * c).max(0.0).sqrt();
            voiced += 1;
        }

        log_mel_row(&power, &bank, cfg, &mut mel);
        dct_row(&dct, cfg.n_mels, &mel, &mut coeffs);
        for ((c, s), q) in coeffs.iter().zip(&mut sum).zip(&mut sum_sq) {
            *s += c;
            *q += c * c;
        }
    }

    let n = frames as f64;
    let mfcc_mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let mfcc_std = sum_sq
        .iter()
        .zip(&mfcc_mean)
        .map(|(q, m)| (q / n - m * m).max(0.0).sqrt())
        .collect();
    let nyquist = sample_rate as f64 / 2.0;
    let per_frame = |total: f64| if voiced > 0 { total / voiced as f64 / nyquist } else { 0.0 };
    ChannelFeatures {
        mfcc_mean,
        mfcc_std,
        centroid: per_frame(centroid_sum),
        bandwidth: per_frame(bandwidth_sum),
    }
}

fn rms_and_peak(signal: &[f64]) -> (f64, f64) {
    let (sq, peak) = signal
        .iter()
        .fold((0.0, 0.0f64), |(s, p), &x| (s + x * x, p.max(x.abs())));
    ((sq / signal.len().max(1) as f64).sqrt(), peak)
}

/// Crest factor in dB (0 for silence).
pub fn crest_factor_db(signal: &[f64]) -> f64 {
    let (rms, peak) = rms_and_peak(signal);
    if rms > 0.0 {
        20.0 * (peak / rms).log10()
    } else {
        0.0
    }
}

fn embed_half(signal: &[f64], sample_rate: u32, cfg: &SpectrogramConfig) -> Vec<f64> {
    let (rms, peak) = rms_and_peak(signal);
    if peak <= SILENCE_PEAK {
        return vec![0.0; HALF_DIM];
    }
    let feats = analyze_channel(signal, sample_rate, cfg);
    let mut half = Vec::with_capacity(HALF_DIM);
    half.extend_from_slice(&feats.mfcc_mean);
    half.extend_from_slice(&feats.mfcc_std);
    half.push((rms + 1e-8).log10());
    half.push(20.0 * (peak / rms).log10());
    half.push(feats.centroid);
    half.push(feats.bandwidth);
    let norm = half.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        half.iter_mut().for_each(|v| *v /= norm);
    }
    half
}

fn embed_window(buffer: &AudioBuffer) -> Result<AudioBuffer> {
    let min = SpectrogramConfig::default().window_size;
    if buffer.len() < min {
        return Err(Error::TooShort { len: buffer.len(), min });
    }
    let max = (MAX_EMBED_SECONDS * buffer.sample_rate() as f64) as usize;
    Ok(buffer.head(max))
}

/// Production-style embedding of up to the first 10 s of `buffer`.
pub fn embed(buffer: &AudioBuffer) -> Result<Embedding> {
    let buffer = embed_window(buffer)?;
    let cfg = SpectrogramConfig::default();
    let (mid, side) = mid_side_split(&buffer);
    let sr = buffer.sample_rate();
    let (mid_half, side_half) = if buffer.num_channels() == 1 {
        (embed_half(&mid, sr, &cfg), vec![0.0; HALF_DIM])
    } else {
        rayon::join(|| embed_half(&mid, sr, &cfg), || embed_half(&side, sr, &cfg))
    };
    let mut v = mid_half;
    v.extend(side_half);
    Ok(Embedding(v))
}

/// Mean MFCC vector of the mid signal (used for preset clustering).
pub fn mfcc_means(buffer: &AudioBuffer) -> Result<Vec<f64>> {
    let buffer = embed_window(buffer)?;
    let (mid, _) = mid_side_split(&buffer);
    Ok(analyze_channel(&mid, buffer.sample_rate(), &SpectrogramConfig::default()).mfcc_mean)
}

/// (a·b) / max(‖a‖‖b‖, ε).
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((dot / (na * nb).max(COSINE_EPS)).clamp(-1.0, 1.0))
}

/// Something that maps audio to a comparable embedding.
pub trait StyleEmbedder: Sync {
    fn embed(&self, buffer: &AudioBuffer) -> Result<Embedding>;

    fn similarity(&self, x: &AudioBuffer, y: &AudioBuffer) -> Result<f64> {
        x.ensure_same_rate(y)?;
        cosine_similarity(self.embed(x)?.as_slice(), self.embed(y)?.as_slice())
    }

    /// Number of leading samples the embedding depends on, if bounded.
    fn horizon(&self, _sample_rate: u32) -> Option<usize> {
        None
    }
}

/// The handcrafted mid/side embedder described in the module docs.
#[derive(Debug, Clone, Copy, Default)]
pub struct Handcrafted;

impl StyleEmbedder for Handcrafted {
    fn embed(&self, buffer: &AudioBuffer) -> Result<Embedding> {
        embed(buffer)
    }

    fn horizon(&self, sample_rate: u32) -> Option<usize> {
        Some((MAX_EMBED_SECONDS * sample_rate as f64) as usize)
    }
}

pub fn style_similarity(x: &AudioBuffer, y: &AudioBuffer) -> Result<f64> {
    Handcrafted.similarity(x, y)
}
