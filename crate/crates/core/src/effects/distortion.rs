//! tanh waveshaper followed by a tone lowpass, with wet/dry mix.

use super::biquad::{compute_biquad, FilterKind};

/// tanh through a single `exp`; absolute error stays near 1e-16.
fn fast_tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

pub fn distort(input: &[f64], drive_db: f64, tone_hz: f64, mix: f64, fs: f64) -> Vec<f64> {
    if mix == 0.0 {
        return input.to_vec();
    }
    let g = 10f64.powf(drive_db / 20.0);
    let mut wet: Vec<f64> = input.iter().map(|x| fast_tanh(g * x)).collect();
    let tone = tone_hz.min(0.45 * fs);
    compute_biquad(FilterKind::Lowpass, tone, 0.0, std::f64::consts::FRAC_1_SQRT_2, fs)
        .expect("tone cutoff clamped below Nyquist")
        .process_in_place(&mut wet);
    input
        .iter()
        .zip(&wet)
        .map(|(dry, w)| (1.0 - mix) * dry + mix * w)
        .collect()
}
