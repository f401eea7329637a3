//! Feed-forward hard-knee compressor with linked stereo detection.

#[derive(Debug, Clone, Copy)]
pub struct CompressorSettings {
    pub threshold_db: f64,
    pub ratio: f64,
    pub attack_ms: f64,
    pub release_ms: f64,
    pub makeup_db: f64,
}

/// 20 / ln 10: converts a natural log of amplitude to dB.
const DB_PER_NEPER: f64 = 20.0 / std::f64::consts::LN_10;

fn one_pole_coeff(time_ms: f64, fs: f64) -> f64 {
    (-1.0 / (time_ms * 1e-3 * fs)).exp()
}

/// Static curve: gain change in dB (≤ 0) for a detector level in dB.
pub fn static_gain_db(level_db: f64, threshold_db: f64, ratio: f64) -> f64 {
    let over = level_db - threshold_db;
    if over > 0.0 {
        -over * (1.0 - 1.0 / ratio)
    } else {
        0.0
    }
}

/// Gain-reduction trajectory in dB for planar `channels`.
///
/// The detector level is the loudest channel's absolute value in dB. The
/// static curve's target gain is smoothed in the dB domain with attack
/// ballistics while reduction deepens and release ballistics while it
/// recovers.
fn gain_trajectory_db(channels: &[&[f64]], s: &CompressorSettings, fs: f64) -> Vec<f64> {
    let len = channels.first().map_or(0, |c| c.len());
    let attack = one_pole_coeff(s.attack_ms, fs);
    let release = one_pole_coeff(s.release_ms, fs);
    let slope = 1.0 - 1.0 / s.ratio;
    // |x| above this amplitude exceeds the threshold
    let knee_amp = 10f64.powf(s.threshold_db / 20.0);

    let mut smoothed = 0.0f64;
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let peak = channels.iter().fold(0.0f64, |m, c| m.max(c[i].abs()));
        let target = if peak > knee_amp && slope > 0.0 {
            -(DB_PER_NEPER * peak.ln() - s.threshold_db) * slope
        } else {
            0.0
        };
        let coeff = if target < smoothed { attack } else { release };
        smoothed = coeff * smoothed + (1.0 - coeff) * target;
        out.push(smoothed);
    }
    out
}

pub fn compress(channels: &[&[f64]], s: &CompressorSettings, fs: f64) -> Vec<Vec<f64>> {
    let gain_db = gain_trajectory_db(channels, s, fs);
    // Cache the last dB→linear conversion; the trajectory is flat while the
    // signal sits below threshold.
    let mut last_db = f64::NAN;
    let mut last_lin = 1.0;
    let gains: Vec<f64> = gain_db
        .iter()
        .map(|&g| {
            let total = g + s.makeup_db;
            if total != last_db {
                last_db = total;
                last_lin = if total == 0.0 { 1.0 } else { (total / DB_PER_NEPER).exp() };
            }
            last_lin
        })
        .collect();
    channels
        .iter()
        .map(|c| c.iter().zip(&gains).map(|(x, g)| x * g).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_curve() {
        assert_eq!(static_gain_db(-30.0, -20.0, 4.0), 0.0);
        assert!((static_gain_db(-10.0, -20.0, 4.0) + 7.5).abs() < 1e-12);
        assert_eq!(static_gain_db(0.0, -20.0, 1.0), 0.0);
    }

    #[test]
    fn steady_state_reaches_static_curve() {
        let fs = 48_000.0;
        let x = vec![0.5; 48_000];
        let s = CompressorSettings {
            threshold_db: -20.0,
            ratio: 4.0,
            attack_ms: 1.0,
            release_ms: 100.0,
            makeup_db: 0.0,
        };
        let y = compress(&[&x], &s, fs);
        let expected = 0.5 * 10f64.powf(static_gain_db(20.0 * 0.5f64.log10(), -20.0, 4.0) / 20.0);
        assert!((y[0][47_999] - expected).abs() < 1e-9);
    }

    #[test]
    fn channels_share_gain() {
        let fs = 48_000.0;
        let l = vec![0.9; 1000];
        let r = vec![0.1; 1000];
        let s = CompressorSettings {
            threshold_db: -30.0,
            ratio: 8.0,
            attack_ms: 1.0,
            release_ms: 50.0,
            makeup_db: 3.0,
        };
        let y = compress(&[&l, &r], &s, fs);
        for i in 0..1000 {
            assert!((y[0][i] / 0.9 - y[1][i] / 0.1).abs() < 1e-12);
        }
    }
}
