//! Schroeder reverberator: four parallel damped combs into two series
//! allpasses.

const COMB_BASE_MS: [f64; 4] = [25.0, 31.0, 37.5, 45.0];
const COMB_FEEDBACK: f64 = 0.84;
const ALLPASS_MS: [f64; 2] = [5.0, 1.7];
const ALLPASS_GAIN: f64 = 0.5;
/// Extra comb length (samples) for the second channel.
pub const STEREO_SPREAD: usize = 23;

fn next_prime(mut n: usize) -> usize {
    n = n.max(2);
    loop {
        if (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d)) {
            return n;
        }
        n += 1;
    }
}

/// Comb lengths in samples for a given size; distinct primes, so mutually prime.
pub fn comb_lengths(size: f64, fs: f64) -> [usize; 4] {
    let scale = 0.5 + size;
    COMB_BASE_MS.map(|ms| next_prime((ms * scale * 1e-3 * fs).round() as usize))
}

fn comb(input: &[f64], len: usize, damping: f64, out: &mut [f64]) {
    let mut buf = vec![0.0; len];
    let mut idx = 0;
    let mut store = 0.0;
    for (x, acc) in input.iter().zip(out.iter_mut()) {
        let y = buf[idx];
        store = y * (1.0 - damping) + store * damping;
        buf[idx] = x + store * COMB_FEEDBACK;
        idx += 1;
        if idx == len {
            idx = 0;
        }
        *acc += y;
    }
}

fn allpass(data: &mut [f64], len: usize) {
    let mut buf = vec![0.0; len];
    let mut idx = 0;
    for x in data.iter_mut() {
        let delayed = buf[idx];
        let v = *x + ALLPASS_GAIN * delayed;
        buf[idx] = v;
        *x = delayed - ALLPASS_GAIN * v;
        idx += 1;
        if idx == len {
            idx = 0;
        }
    }
}

/// `channel` selects the comb spread (channel 1 gets +[`STEREO_SPREAD`]).
pub fn reverb(input: &[f64], size: f64, damping: f64, mix: f64, fs: f64, channel: usize) -> Vec<f64> {
    if mix == 0.0 {
        return input.to_vec();
    }
    // Unit-power comb bank for white input: each comb has power gain
    // 1/(1−g²), four uncorrelated combs add power.
    let comb_gain = (1.0 - COMB_FEEDBACK * COMB_FEEDBACK).sqrt() / 2.0;
    let scaled: Vec<f64> = input.iter().map(|x| x * comb_gain).collect();
    let damp = 0.4 * damping;
    let spread = if channel == 1 { STEREO_SPREAD } else { 0 };

    let mut wet = vec![0.0; input.len()];
    for len in comb_lengths(size, fs) {
        comb(&scaled, len + spread, damp, &mut wet);
    }
    for ms in ALLPASS_MS {
        allpass(&mut wet, ((ms * 1e-3 * fs).round() as usize).max(1));
    }
    input
        .iter()
        .zip(&wet)
        .map(|(dry, w)| (1.0 - mix) * dry + mix * w)
        .collect()
}
