//! Built-in parametric effects.
//!
//! Every effect is driven by a vector of normalized controls in [0, 1]; the
//! [`ParamSpec`] of each control maps it onto a physical range. Effects are
//! length preserving: delay and reverb tails past the end of the input are
//! dropped.

pub mod biquad;
pub mod compressor;
pub mod delay;
pub mod distortion;
pub mod reverb;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub use biquad::{compute_biquad, Biquad, FilterKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curve {
    Linear,
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub curve: Curve,
    pub unit: &'static str,
    /// Normalized value used when the parameter is not being searched.
    pub default: f64,
}

impl ParamSpec {
    const fn lin(name: &'static str, lo: f64, hi: f64, unit: &'static str, default: f64) -> Self {
        Self { name, lo, hi, curve: Curve::Linear, unit, default }
    }

    const fn log(name: &'static str, lo: f64, hi: f64, unit: &'static str, default: f64) -> Self {
        Self { name, lo, hi, curve: Curve::Logarithmic, unit, default }
    }

    pub fn is_valid(&self) -> bool {
        self.lo < self.hi && (self.curve == Curve::Linear || self.lo > 0.0)
    }

    pub fn map(&self, norm: f64) -> f64 {
        map_param(norm, self)
    }

    /// Inverse of [`map_param`], clamped to [0, 1].
    pub fn unmap(&self, value: f64) -> f64 {
        let t = match self.curve {
            Curve::Linear => (value - self.lo) / (self.hi - self.lo),
            Curve::Logarithmic => (value / self.lo).ln() / (self.hi / self.lo).ln(),
        };
        t.clamp(0.0, 1.0)
    }
}

/// Normalized control → physical value. Inputs outside [0, 1] (and NaN) are
/// clamped.
pub fn map_param(norm: f64, spec: &ParamSpec) -> f64 {
    let t = if norm.is_nan() { 0.0 } else { norm.clamp(0.0, 1.0) };
    match spec.curve {
        Curve::Linear => spec.lo + t * (spec.hi - spec.lo),
        Curve::Logarithmic => spec.lo * (spec.hi / spec.lo).powf(t),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectDescriptor {
    pub id: &'static str,
    pub params: &'static [ParamSpec],
}

impl EffectDescriptor {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn defaults(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.default).collect()
    }

    pub fn to_physical(&self, norm: &[f64]) -> Vec<f64> {
        self.params.iter().zip(norm).map(|(p, &v)| p.map(v)).collect()
    }
}

// q = 1/√2 on the [0.3, 4] log axis
const BUTTERWORTH_Q: f64 = 0.331_008_023;

const GAIN: &[ParamSpec] = &[ParamSpec::lin("level", -24.0, 24.0, "dB", 0.5)];

const LOWPASS: &[ParamSpec] = &[
    ParamSpec::log("cutoff", 200.0, 20_000.0, "Hz", 0.5),
    ParamSpec::log("q", 0.3, 4.0, "", BUTTERWORTH_Q),
];

const HIGHPASS: &[ParamSpec] = &[
    ParamSpec::log("cutoff", 20.0, 2_000.0, "Hz", 0.5),
    ParamSpec::log("q", 0.3, 4.0, "", BUTTERWORTH_Q),
];

const PARAMETRIC_EQ: &[ParamSpec] = &[
    ParamSpec::log("low_shelf_freq", 30.0, 450.0, "Hz", 0.5),
    ParamSpec::lin("low_shelf_gain", -18.0, 18.0, "dB", 0.5),
    ParamSpec::log("peak1_freq", 200.0, 2_500.0, "Hz", 0.5),
    ParamSpec::lin("peak1_gain", -18.0, 18.0, "dB", 0.5),
    ParamSpec::log("peak1_q", 0.3, 8.0, "", 0.5),
    ParamSpec::log("peak2_freq", 600.0, 7_000.0, "Hz", 0.5),
    ParamSpec::lin("peak2_gain", -18.0, 18.0, "dB", 0.5),
    ParamSpec::log("peak2_q", 0.3, 8.0, "", 0.5),
    ParamSpec::log("high_shelf_freq", 1_500.0, 16_000.0, "Hz", 0.5),
    ParamSpec::lin("high_shelf_gain", -18.0, 18.0, "dB", 0.5),
];

const COMPRESSOR: &[ParamSpec] = &[
    ParamSpec::lin("threshold", -60.0, 0.0, "dB", 0.5),
    ParamSpec::log("ratio", 1.0, 20.0, ":1", 0.5),
    ParamSpec::log("attack", 1.0, 100.0, "ms", 0.5),
    ParamSpec::log("release", 10.0, 1_000.0, "ms", 0.5),
    ParamSpec::lin("makeup", 0.0, 12.0, "dB", 0.0),
];

const DISTORTION: &[ParamSpec] = &[
    ParamSpec::lin("drive", 0.0, 24.0, "dB", 0.5),
    ParamSpec::log("tone", 500.0, 10_000.0, "Hz", 1.0),
    ParamSpec::lin("mix", 0.0, 1.0, "", 1.0),
];

const DELAY: &[ParamSpec] = &[
    ParamSpec::log("time", 50.0, 1_000.0, "ms", 0.5),
    ParamSpec::lin("feedback", 0.0, 0.9, "", 0.3),
    ParamSpec::lin("mix", 0.0, 1.0, "", 0.5),
];

const REVERB: &[ParamSpec] = &[
    ParamSpec::lin("size", 0.0, 1.0, "", 0.5),
    ParamSpec::lin("damping", 0.0, 1.0, "", 0.5),
    ParamSpec::lin("mix", 0.0, 1.0, "", 0.5),
];

const REGISTRY: &[EffectDescriptor] = &[
    EffectDescriptor { id: "gain", params: GAIN },
    EffectDescriptor { id: "lowpass", params: LOWPASS },
    EffectDescriptor { id: "highpass", params: HIGHPASS },
    EffectDescriptor { id: "parametric_eq", params: PARAMETRIC_EQ },
    EffectDescriptor { id: "compressor", params: COMPRESSOR },
    EffectDescriptor { id: "distortion", params: DISTORTION },
    EffectDescriptor { id: "delay", params: DELAY },
    EffectDescriptor { id: "reverb", params: REVERB },
];

pub fn builtin_effects() -> &'static [EffectDescriptor] {
    REGISTRY
}

pub fn descriptor(effect_id: &str) -> Result<&'static EffectDescriptor> {
    REGISTRY
        .iter()
        .find(|d| d.id == effect_id)
        .ok_or_else(|| Error::UnknownEffect(effect_id.to_string()))
}

/// Normalized parameters at which the effect leaves its input unchanged (or,
/// for the filters, as close to unchanged as the range allows).
pub fn identity_params(effect_id: &str) -> Result<Vec<f64>> {
    let d = descriptor(effect_id)?;
    let mut p = d.defaults();
    match effect_id {
        "gain" | "parametric_eq" => {} // 0 dB defaults
        "lowpass" => p[0] = 1.0,
        "highpass" => p[0] = 0.0,
        "compressor" => {
            p[1] = 0.0;
            p[4] = 0.0;
        }
        "distortion" | "delay" | "reverb" => p[2] = 0.0,
        _ => unreachable!("registry and identity table out of sync"),
    }
    Ok(p)
}

/// Highest filter frequency used at a given sample rate; parameter ranges
/// that reach past it are clamped so low sample rates stay valid.
fn clamp_freq(f: f64, fs: f64) -> f64 {
    f.min(0.49 * fs)
}

fn filter_each(buffer: &AudioBuffer, stages: &[Biquad]) -> AudioBuffer {
    buffer.map_channels(|_, c| {
        let mut out = c.to_vec();
        Biquad::process_cascade(stages, &mut out);
        out
    })
}

/// Apply one effect to `buffer`. All channels share the same parameters.
pub fn process_effect(effect_id: &str, buffer: &AudioBuffer, params_norm: &[f64]) -> Result<AudioBuffer> {
    let d = descriptor(effect_id)?;
    if params_norm.len() != d.params.len() {
        return Err(Error::ParamCount {
            expected: d.params.len(),
            got: params_norm.len(),
        });
    }
    let p = d.to_physical(params_norm);
    let fs = buffer.sample_rate() as f64;

    let out = match effect_id {
        "gain" => {
            let g = crate::audio::db_to_amp(p[0]);
            buffer.map_channels(|_, c| c.iter().map(|x| x * g).collect())
        }
        "lowpass" | "highpass" => {
            let kind = if effect_id == "lowpass" { FilterKind::Lowpass } else { FilterKind::Highpass };
            let bq = compute_biquad(kind, clamp_freq(p[0], fs), 0.0, p[1], fs)?;
            filter_each(buffer, &[bq])
        }
        "parametric_eq" => {
            let stages = [
                compute_biquad(FilterKind::LowShelf, clamp_freq(p[0], fs), p[1], biquad::SHELF_Q, fs)?,
                compute_biquad(FilterKind::Peaking, clamp_freq(p[2], fs), p[3], p[4], fs)?,
                compute_biquad(FilterKind::Peaking, clamp_freq(p[5], fs), p[6], p[7], fs)?,
                compute_biquad(FilterKind::HighShelf, clamp_freq(p[8], fs), p[9], biquad::SHELF_Q, fs)?,
            ];
            filter_each(buffer, &stages)
        }
        "compressor" => {
            let settings = compressor::CompressorSettings {
                threshold_db: p[0],
                ratio: p[1],
                attack_ms: p[2],
                release_ms: p[3],
                makeup_db: p[4],
            };
            let chans: Vec<&[f64]> = buffer.channels().collect();
            let mut out = compressor::compress(&chans, &settings, fs).into_iter();
            buffer.map_channels(|_, _| out.next().expect("one output per channel"))
        }
        "distortion" => buffer.map_channels(|_, c| distortion::distort(c, p[0], clamp_freq(p[1], fs), p[2], fs)),
        "delay" => buffer.map_channels(|_, c| delay::delay(c, p[0], p[1], p[2], fs)),
        "reverb" => buffer.map_channels(|ch, c| reverb::reverb(c, p[0], p[1], p[2], fs, ch)),
        _ => unreachable!("registry and dispatch table out of sync"),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn noise(seed: u64, len: usize, channels: usize) -> AudioBuffer {
        let mut rng = Rng::new(seed);
        let chans = (0..channels)
            .map(|_| (0..len).map(|_| rng.uniform_range(-0.8, 0.8)).collect())
            .collect();
        AudioBuffer::new(48_000, chans).unwrap()
    }

    fn max_abs_diff(a: &AudioBuffer, b: &AudioBuffer) -> f64 {
        a.channels()
            .zip(b.channels())
            .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn map_param_examples() {
        let lin = ParamSpec::lin("x", 0.0, 10.0, "", 0.5);
        assert_eq!(map_param(0.5, &lin), 5.0);
        let log = ParamSpec::log("f", 20.0, 20_000.0, "Hz", 0.5);
        assert!((map_param(0.5, &log) - 632.455_532).abs() < 1e-5);
        assert_eq!(map_param(1.2, &log), 20_000.0);
        assert_eq!(map_param(-0.1, &lin), 0.0);
        assert!((log.unmap(map_param(0.3, &log)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn registry_shape() {
        let effects = builtin_effects();
        assert_eq!(effects.len(), 8);
        assert_eq!(descriptor("parametric_eq").unwrap().params.len(), 10);
        for d in effects {
            for (i, p) in d.params.iter().enumerate() {
                assert!(p.is_valid(), "{}.{}", d.id, p.name);
                assert!((0.0..=1.0).contains(&p.default));
                assert!(d.params[..i].iter().all(|q| q.name != p.name));
            }
        }
        let q = descriptor("lowpass").unwrap().params[1].map(BUTTERWORTH_Q);
        assert!((q - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5);
    }

    #[test]
    fn process_errors() {
        let b = noise(1, 64, 1);
        assert!(matches!(process_effect("nope", &b, &[]), Err(Error::UnknownEffect(_))));
        assert!(matches!(
            process_effect("gain", &b, &[0.5, 0.5]),
            Err(Error::ParamCount { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn identity_parameters() {
        let b = noise(2, 48_000, 2);
        for d in builtin_effects() {
            let out = process_effect(d.id, &b, &identity_params(d.id).unwrap()).unwrap();
            assert_eq!(out.len(), b.len());
            let err = max_abs_diff(&out, &b);
            match d.id {
                "lowpass" | "highpass" => {}
                "delay" | "distortion" | "reverb" | "gain" | "compressor" => {
                    assert_eq!(err, 0.0, "{}", d.id)
                }
                _ => assert!(err <= 1e-6, "{}: {err}", d.id),
            }
        }
    }

    #[test]
    fn open_lowpass_passes_low_sine() {
        let fs = 48_000.0;
        let x: Vec<f64> = (0..48_000).map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / fs).sin()).collect();
        let b = AudioBuffer::mono(48_000, x).unwrap();
        let out = process_effect("lowpass", &b, &identity_params("lowpass").unwrap()).unwrap();
        let peak = out.channel(0)[4_800..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 0.01);
    }

    #[test]
    fn deterministic_and_length_preserving() {
        let b = noise(3, 10_000, 2);
        let mut rng = Rng::new(4);
        for d in builtin_effects() {
            let p: Vec<f64> = d.params.iter().map(|_| rng.uniform()).collect();
            let a = process_effect(d.id, &b, &p).unwrap();
            let c = process_effect(d.id, &b, &p).unwrap();
            assert_eq!(a, c);
            assert_eq!(a.len(), b.len());
        }
    }

    #[test]
    fn identical_channels_get_identical_processing() {
        let m = noise(5, 8_000, 1);
        let st = m.to_stereo();
        let mut rng = Rng::new(6);
        for d in builtin_effects().iter().filter(|d| d.id != "reverb") {
            let p: Vec<f64> = d.params.iter().map(|_| rng.uniform()).collect();
            let out = process_effect(d.id, &st, &p).unwrap();
            assert_eq!(out.channel(0), out.channel(1), "{}", d.id);
        }
    }
}
