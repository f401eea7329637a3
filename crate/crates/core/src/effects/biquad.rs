//! Second-order sections from the RBJ audio-EQ cookbook.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Lowpass,
    Highpass,
    LowShelf,
    HighShelf,
    Peaking,
}

/// Normalized coefficients (a0 = 1). Transfer function
/// H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

pub const SHELF_Q: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn compute_biquad(kind: FilterKind, f0: f64, gain_db: f64, q: f64, fs: f64) -> Result<Biquad> {
    let nyquist = fs / 2.0;
    if !(f0 > 0.0 && f0 < nyquist) {
        return Err(Error::FrequencyOutOfRange { f0, nyquist });
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidQ(q));
    }
    let a = 10f64.powf(gain_db / 40.0);
    let w0 = 2.0 * PI * f0 / fs;
    let (sin, cos) = w0.sin_cos();
    let alpha = sin / (2.0 * q);
    let sqrt_a2 = 2.0 * a.sqrt() * alpha;

    let (b0, b1, b2, a0, a1, a2) = match kind {
        FilterKind::Lowpass => (
            (1.0 - cos) / 2.0,
            1.0 - cos,
            (1.0 - cos) / 2.0,
            1.0 + alpha,
            -2.0 * cos,
            1.0 - alpha,
        ),
        FilterKind::Highpass => (
            (1.0 + cos) / 2.0,
            -(1.0 + cos),
            (1.0 + cos) / 2.0,
            1.0 + alpha,
            -2.0 * cos,
            1.0 - alpha,
        ),
        FilterKind::Peaking => (
            1.0 + alpha * a,
            -2.0 * cos,
            1.0 - alpha * a,
            1.0 + alpha / a,
            -2.0 * cos,
            1.0 - alpha / a,
        ),
        FilterKind::LowShelf => (
            a * ((a + 1.0) - (a - 1.0) * cos + sqrt_a2),
            2.0 * a * ((a - 1.0) - (a + 1.0) * cos),
            a * ((a + 1.0) - (a - 1.0) * cos - sqrt_a2),
            (a + 1.0) + (a - 1.0) * cos + sqrt_a2,
            -2.0 * ((a - 1.0) + (a + 1.0) * cos),
            (a + 1.0) + (a - 1.0) * cos - sqrt_a2,
        ),
        FilterKind::HighShelf => (
            a * ((a + 1.0) + (a - 1.0) * cos + sqrt_a2),
            -2.0 * a * ((a - 1.0) + (a + 1.0) * cos),
            a * ((a + 1.0) + (a - 1.0) * cos - sqrt_a2),
            (a + 1.0) - (a - 1.0) * cos + sqrt_a2,
            2.0 * ((a - 1.0) - (a + 1.0) * cos),
            (a + 1.0) - (a - 1.0) * cos - sqrt_a2,
        ),
    };
    Ok(Biquad {
        b0: b0 / a0,
        b1: b1 / a0,
        b2: b2 / a0,
        a1: a1 / a0,
        a2: a2 / a0,
    })
}

impl Biquad {
    /// Magnitude of H(e^{jω}) at frequency `f`.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (s1, c1) = w.sin_cos();
        let (s2, c2) = (2.0 * w).sin_cos();
        let num_re = self.b0 + self.b1 * c1 + self.b2 * c2;
        let num_im = -(self.b1 * s1 + self.b2 * s2);
        let den_re = 1.0 + self.a1 * c1 + self.a2 * c2;
        let den_im = -(self.a1 * s1 + self.a2 * s2);
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }

    /// Filter a whole signal (transposed direct form II, zero initial state).
    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        self.process_in_place(&mut out);
        out
    }

    /// Run `data` through `stages` in series, one sample at a time through
    /// the whole cascade.
    pub fn process_cascade(stages: &[Biquad], data: &mut [f64]) {
        let mut state = vec![(0.0f64, 0.0f64); stages.len()];
        for x in data.iter_mut() {
            let mut v = *x;
            for (bq, (s1, s2)) in stages.iter().zip(state.iter_mut()) {
                let y = bq.b0 * v + *s1;
                *s1 = bq.b1 * v - bq.a1 * y + *s2;
                *s2 = bq.b2 * v - bq.a2 * y;
                v = y;
            }
            *x = v;
        }
    }

    pub fn process_in_place(&self, data: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for x in data.iter_mut() {
            let input = *x;
            let y = self.b0 * input + s1;
            s1 = self.b1 * input - self.a1 * y + s2;
            s2 = self.b2 * input - self.a2 * y;
            *x = y;
        }
    }
}
