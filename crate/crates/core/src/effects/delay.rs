//! Feedback delay line with linear-interpolated fractional delay.

pub fn delay(input: &[f64], time_ms: f64, feedback: f64, mix: f64, fs: f64) -> Vec<f64> {
    if mix == 0.0 {
        return input.to_vec();
    }
    let d = (time_ms * 1e-3 * fs).max(1.0);
    let whole = d.floor() as usize;
    let frac = d - whole as f64;

    // line[n] = x[n] + feedback · tap[n]; tap[n] = line(n − d)
    let mut line = vec![0.0; input.len()];
    let mut out = Vec::with_capacity(input.len());
    for (n, &x) in input.iter().enumerate() {
        let tap = if n > whole {
            let a = line[n - whole];
            let b = line[n - whole - 1];
            a + frac * (b - a)
        } else if n >= whole {
            (1.0 - frac) * line[n - whole]
        } else {
            0.0
        };
        line[n] = x + feedback * tap;
        out.push((1.0 - mix) * x + mix * tap);
    }
    out
}
