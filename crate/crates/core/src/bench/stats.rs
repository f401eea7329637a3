//! Small statistics helpers for benchmark aggregates.

use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};

/// Sample Pearson correlation. Errors on unequal lengths, fewer than two
/// points, or a constant sequence.
pub fn pearson_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidConfig("correlation needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantSequence);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn mse(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(xs.len(), ys.len()));
    }
    if xs.is_empty() {
        return Ok(0.0);
    }
    Ok(xs.iter().zip(ys).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / xs.len() as f64)
}

/// Two-sided exact binomial test: total probability of outcomes no more
/// likely than `successes` under Binomial(n, p).
pub fn binomial_test(successes: u64, n: u64, p: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let dist = Binomial::new(p, n).expect("p in [0, 1]");
    let observed = dist.pmf(successes);
    let total: f64 = (0..=n).map(|k| dist.pmf(k)).filter(|&q| q <= observed * (1.0 + 1e-7)).sum();
    total.min(1.0)
}
