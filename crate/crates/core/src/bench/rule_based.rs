//! Rule-based transfer baseline: a linear-phase matching EQ followed by a
//! compressor whose threshold and ratio are hill-climbed to match the
//! reference's crest factor.

use realfft::RealFftPlanner;

use crate::audio::AudioBuffer;
use crate::effects::compressor::{compress, CompressorSettings};
use crate::error::Result;
use crate::style::hann;

pub const WELCH_SIZE: usize = 2048;
pub const FIR_TAPS: usize = 1023;
pub const MAX_EQ_DB: f64 = 12.0;

/// Average power spectrum over all channels: Hann-windowed 2048-point
/// segments with 50% overlap. Signals shorter than one segment are
/// zero-padded.
pub fn welch_psd(buffer: &AudioBuffer) -> Vec<f64> {
    let n = WELCH_SIZE;
    let hop = n / 2;
    let window = hann(n);
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(n);
    let mut input = fft.make_input_vec();
    let mut spectrum = fft.make_output_vec();
    let mut psd = vec![0.0; n / 2 + 1];
    let mut segments = 0usize;
    for c in buffer.channels() {
        let count = if c.len() <= n { 1 } else { (c.len() - n) / hop + 1 };
        for s in 0..count {
            let start = s * hop;
            for (i, slot) in input.iter_mut().enumerate() {
                *slot = c.get(start + i).copied().unwrap_or(0.0) * window[i];
            }
            fft.process(&mut input, &mut spectrum).expect("fft sizes match");
            for (p, z) in psd.iter_mut().zip(&spectrum) {
                *p += z.norm_sqr();
            }
            segments += 1;
        }
    }
    psd.iter_mut().for_each(|p| *p /= segments.max(1) as f64);
    psd
}

/// Third-octave centre frequencies from 20 Hz up to the last band whose
/// upper edge fits below Nyquist.
pub fn third_octave_centers(sample_rate: u32) -> Vec<f64> {
    let nyquist = sample_rate as f64 / 2.0;
    (-17..)
        .map(|k| 1000.0 * 2f64.powf(k as f64 / 3.0))
        .take_while(|fc| fc * 2f64.powf(1.0 / 6.0) <= nyquist)
        .collect()
}

/// Mean PSD within each band; bands narrower than a bin take the bin
/// nearest their centre.
pub fn band_levels(psd: &[f64], sample_rate: u32, centers: &[f64]) -> Vec<f64> {
    let bin_hz = sample_rate as f64 / (2 * (psd.len() - 1)) as f64;
    centers
        .iter()
        .map(|&fc| {
            let lo = fc * 2f64.powf(-1.0 / 6.0);
            let hi = fc * 2f64.powf(1.0 / 6.0);
            let bins: Vec<f64> = psd
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let f = *k as f64 * bin_hz;
                    f >= lo && f < hi
                })
                .map(|(_, p)| *p)
                .collect();
            if bins.is_empty() {
                psd[((fc / bin_hz).round() as usize).min(psd.len() - 1)]
            } else {
                bins.iter().sum::<f64>() / bins.len() as f64
            }
        })
        .collect()
}

/// Third-octave band levels in dB (10·log10 of the mean band power).
pub fn third_octave_db(buffer: &AudioBuffer) -> Vec<f64> {
    let centers = third_octave_centers(buffer.sample_rate());
    band_levels(&welch_psd(buffer), buffer.sample_rate(), &centers)
        .iter()
        .map(|p| 10.0 * (p + 1e-20).log10())
        .collect()
}

/// Per-band matching gain in dB, reference over input, clipped to ±12 dB.
pub fn matching_gains_db(input: &AudioBuffer, reference: &AudioBuffer) -> Vec<f64> {
    third_octave_db(reference)
        .iter()
        .zip(third_octave_db(input))
        .map(|(r, i)| (r - i).clamp(-MAX_EQ_DB, MAX_EQ_DB))
        .collect()
}

/// Gain in dB at `f`, interpolated linearly in log-frequency between band
/// centres and held constant past the outermost bands.
fn gain_at(f: f64, centers: &[f64], gains_db: &[f64]) -> f64 {
    if f <= centers[0] {
        return gains_db[0];
    }
    let last = centers.len() - 1;
    if f >= centers[last] {
        return gains_db[last];
    }
    let j = centers.partition_point(|&c| c <= f);
    let (c0, c1) = (centers[j - 1].log2(), centers[j].log2());
    let t = (f.log2() - c0) / (c1 - c0);
    gains_db[j - 1] + t * (gains_db[j] - gains_db[j - 1])
}

/// Linear-phase FIR by frequency sampling the interpolated gain curve on
/// the taps' DFT grid, then tapering with a Hann window.
pub fn design_fir(centers: &[f64], gains_db: &[f64], sample_rate: u32) -> Vec<f64> {
    let n = FIR_TAPS;
    let half = (n - 1) / 2;
    let fs = sample_rate as f64;
    let amp: Vec<f64> = (0..=half)
        .map(|k| 10f64.powf(gain_at(k as f64 * fs / n as f64, centers, gains_db) / 20.0))
        .collect();
    (0..n)
        .map(|i| {
            let m = i as f64 - half as f64;
            let mut acc = amp[0];
            for (k, a) in amp.iter().enumerate().skip(1) {
                acc += 2.0 * a * (2.0 * std::f64::consts::PI * k as f64 * m / n as f64).cos();
            }
            let taper = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).cos();
            taper * acc / n as f64
        })
        .collect()
}

/// Magnitude response of `taps` at `f` in dB.
pub fn fir_response_db(taps: &[f64], f: f64, sample_rate: u32) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f / sample_rate as f64;
    let (re, im) = taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, h)| {
        (re + h * (w * i as f64).cos(), im - h * (w * i as f64).sin())
    });
    20.0 * (re * re + im * im).sqrt().log10()
}

/// FFT convolution with the FIR's group delay removed, truncated to the
/// input length.
fn convolve_centered(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let full = x.len() + taps.len() - 1;
    let size = full.next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut a = fwd.make_input_vec();
    a[..x.len()].copy_from_slice(x);
    let mut b = fwd.make_input_vec();
    b[..taps.len()].copy_from_slice(taps);
    let mut fa = fwd.make_output_vec();
    let mut fb = fwd.make_output_vec();
    fwd.process(&mut a, &mut fa).expect("fft sizes match");
    fwd.process(&mut b, &mut fb).expect("fft sizes match");
    fa.iter_mut().zip(&fb).for_each(|(p, q)| *p *= q);
    let mut y = inv.make_output_vec();
    inv.process(&mut fa, &mut y).expect("fft sizes match");
    let delay = (taps.len() - 1) / 2;
    y[delay..delay + x.len()].iter().map(|v| v / size as f64).collect()
}

pub fn apply_fir(buffer: &AudioBuffer, taps: &[f64]) -> AudioBuffer {
    buffer.map_channels(|_, c| convolve_centered(c, taps))
}

/// Stage one: EQ `input` towards `reference`'s third-octave spectrum.
pub fn match_eq(input: &AudioBuffer, reference: &AudioBuffer) -> Result<AudioBuffer> {
    input.ensure_same_rate(reference)?;
    let centers = third_octave_centers(input.sample_rate());
    let taps = design_fir(&centers, &matching_gains_db(input, reference), input.sample_rate());
    Ok(apply_fir(input, &taps))
}

/// Crest factor over all channels jointly, in dB (0 for silence).
pub fn crest_db(buffer: &AudioBuffer) -> f64 {
    let (mut sq, mut peak, mut n) = (0.0, 0.0f64, 0usize);
    for c in buffer.channels() {
        for x in c {
            sq += x * x;
            peak = peak.max(x.abs());
        }
        n += c.len();
    }
    let rms = (sq / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        20.0 * (peak / rms).log10()
    } else {
        0.0
    }
}

/// Instant attack so the compressor catches every peak; any lag lets onsets
/// through and raises the crest factor instead of lowering it.
pub const ATTACK_MS: f64 = 0.0;
pub const RELEASE_MS: f64 = 100.0;

fn compressor_settings(threshold_db: f64, ratio: f64) -> CompressorSettings {
    CompressorSettings {
        threshold_db,
        ratio,
        attack_ms: ATTACK_MS,
        release_ms: RELEASE_MS,
        makeup_db: 0.0,
    }
}

pub fn apply_compressor(buffer: &AudioBuffer, threshold_db: f64, ratio: f64) -> AudioBuffer {
    let chans: Vec<&[f64]> = buffer.channels().collect();
    let out = compress(&chans, &compressor_settings(threshold_db, ratio), buffer.sample_rate() as f64);
    AudioBuffer::new(buffer.sample_rate(), out).expect("compressor preserves shape")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillClimb {
    pub threshold_db: f64,
    pub ratio: f64,
    /// |crest(output) − crest(reference)| at the final point, in dB.
    pub cost: f64,
    pub evaluations: usize,
}

/// Coordinate hill climb over (threshold, ratio) on a lattice starting at
/// (−20 dB, 2:1) with steps (8 dB, 4). Moves to the best improving
/// neighbour; halves both steps when none improves; stops once the steps
/// fall below (0.5 dB, 0.25).
pub fn fit_compressor(input: &AudioBuffer, target_crest_db: f64) -> HillClimb {
    const THRESHOLD: (f64, f64) = (-60.0, 0.0);
    const RATIO: (f64, f64) = (1.0, 20.0);
    let cost = |t: f64, r: f64| (crest_db(&apply_compressor(input, t, r)) - target_crest_db).abs();
    let (mut t, mut r) = (-20.0, 2.0);
    let (mut dt, mut dr) = (8.0, 4.0);
    let mut best = cost(t, r);
    let mut evaluations = 1;
    while dt >= 0.5 || dr >= 0.25 {
        let neighbours = [
            ((t - dt).max(THRESHOLD.0), r),
            ((t + dt).min(THRESHOLD.1), r),
            (t, (r - dr).max(RATIO.0)),
            (t, (r + dr).min(RATIO.1)),
        ];
        let mut moved = false;
        let mut cand = (t, r, best);
        for (nt, nr) in neighbours {
            if (nt, nr) == (t, r) {
                continue;
            }
            let c = cost(nt, nr);
            evaluations += 1;
            if c < cand.2 {
                cand = (nt, nr, c);
                moved = true;
            }
        }
        if moved {
            (t, r, best) = cand;
        } else {
            dt /= 2.0;
            dr /= 2.0;
        }
    }
    HillClimb {
        threshold_db: t,
        ratio: r,
        cost: best,
        evaluations,
    }
}

/// Matching EQ, then a compressor fitted to the reference's crest factor.
pub fn rule_based_transfer(input: &AudioBuffer, reference: &AudioBuffer) -> Result<AudioBuffer> {
    let eq = match_eq(input, reference)?;
    let fit = fit_compressor(&eq, crest_db(reference));
    Ok(apply_compressor(&eq, fit.threshold_db, fit.ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::corpus::pink_noise;
    use crate::rng::Rng;

    fn noise(seed: u64, len: usize) -> AudioBuffer {
        AudioBuffer::mono(48_000, pink_noise(len, &mut Rng::new(seed))).unwrap()
    }

    #[test]
    fn band_layout() {
        let c = third_octave_centers(48_000);
        assert!((c[0] - 19.686).abs() < 1e-2);
        assert!((c[17] - 1000.0).abs() < 1e-9);
        assert!(c.last().unwrap() * 2f64.powf(1.0 / 6.0) <= 24_000.0);
        assert_eq!(c.len(), 31);
    }

    #[test]
    fn welch_of_sine_peaks_at_its_bin() {
        let f = 40.0 * 48_000.0 / 2048.0;
        let x: Vec<f64> = (0..20_000).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / 48_000.0).sin()).collect();
        let psd = welch_psd(&AudioBuffer::mono(48_000, x).unwrap());
        let argmax = psd.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax, 40);
    }

    #[test]
    fn flat_gains_give_a_flat_filter() {
        let centers = third_octave_centers(48_000);
        let taps = design_fir(&centers, &vec![0.0; centers.len()], 48_000);
        for f in [20.0, 100.0, 1_000.0, 5_000.0, 15_000.0, 23_000.0] {
            assert!(fir_response_db(&taps, f, 48_000).abs() < 0.5, "{f}");
        }
    }

    #[test]
    fn fir_follows_a_constant_boost() {
        let centers = third_octave_centers(48_000);
        let taps = design_fir(&centers, &vec![6.0; centers.len()], 48_000);
        for f in [200.0, 2_000.0, 12_000.0] {
            assert!((fir_response_db(&taps, f, 48_000) - 6.0).abs() < 0.5, "{f}");
        }
    }

    #[test]
    fn identical_reference_gives_zero_gains() {
        let x = noise(1, 48_000);
        assert!(matching_gains_db(&x, &x).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn gains_are_clipped() {
        let x = noise(2, 48_000);
        let loud = crate::audio::apply_gain_db(&x, 30.0);
        assert!(matching_gains_db(&x, &loud).iter().all(|g| (*g - 12.0).abs() < 1e-9));
    }

    #[test]
    fn centered_convolution_with_delta_is_identity() {
        let x = noise(3, 5_000);
        let mut taps = vec![0.0; FIR_TAPS];
        taps[FIR_TAPS / 2] = 1.0;
        let y = apply_fir(&x, &taps);
        for (a, b) in x.channel(0).iter().zip(y.channel(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// 440 Hz tone that is loud for the first 50 ms of every 500 ms.
    pub(crate) fn bursty_tone(seconds: f64) -> AudioBuffer {
        let fs = 48_000.0;
        let x = (0..(seconds * fs) as usize)
            .map(|i| {
                let t = i as f64 / fs;
                let amp = if t % 0.5 < 0.05 { 0.5 } else { 0.03 };
                amp * (2.0 * std::f64::consts::PI * 440.0 * t).sin()
            })
            .collect();
        AudioBuffer::mono(48_000, x).unwrap()
    }

    #[test]
    fn hill_climb_matches_a_compressed_reference() {
        let x = bursty_tone(2.0);
        let reference = apply_compressor(&x, -36.0, 10.0);
        let target = crest_db(&reference);
        assert!(crest_db(&x) - target >= 6.0, "{} vs {target}", crest_db(&x));
        let fit = fit_compressor(&x, target);
        assert!((-60.0..=0.0).contains(&fit.threshold_db));
        assert!((1.0..=20.0).contains(&fit.ratio));
        assert!(fit.cost < 1.5, "{fit:?}");
    }

    #[test]
    fn hill_climb_leaves_matching_crest_alone() {
        let x = bursty_tone(1.0);
        let fit = fit_compressor(&x, crest_db(&x));
        assert!(fit.cost < 0.5, "{fit:?}");
    }
}
