//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed. Pass substrings as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- retrieval`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fxmatch::bench::corpus::{synthetic_clip, ClipKind};
use fxmatch::bench::param_est::single_param_chain;
use fxmatch::bench::rule_based::{apply_compressor, crest_db, third_octave_db};
use fxmatch::bench::{
    binomial_test, run_classification, run_param_estimation, run_retrieval, rule_based_transfer, synthetic_corpus,
    synthetic_corpus_of, ClassificationConfig, NoiseEmbedder, ParamEstConfig, RetrievalConfig, StyleId,
};
use fxmatch::chain::Chain;
use fxmatch::cmaes::{optimize, CmaConfig, StopMode};
use fxmatch::effects::{builtin_effects, identity_params, process_effect};
use fxmatch::style::{embed, Handcrafted};
use fxmatch::transfer::{objective, style_transfer, TransferConfig};
use fxmatch::wav::{write_wav, WavEncoding};
use fxmatch::{AudioBuffer, Rng};

const FS: u32 = 48_000;

/// Ok(detail) on pass, Err(detail) on fail.
type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn clip(kind: ClipKind, seconds: f64, seed: u64) -> AudioBuffer {
    synthetic_clip(kind, seconds, FS, &mut Rng::new(seed))
}

fn stereo(kind: ClipKind, seconds: f64, seed: u64) -> AudioBuffer {
    let l = clip(kind, seconds, seed);
    let r = clip(kind, seconds, seed + 1_000);
    AudioBuffer::stereo(FS, l.channel(0).to_vec(), r.channel(0).to_vec()).unwrap()
}

fn optimizer_correctness() -> Outcome {
    let run = |f: &(dyn Fn(&[f64]) -> f64 + Sync), dim: usize, gens: usize| {
        let mut cfg = CmaConfig::new(dim);
        cfg.max_generations = gens;
        cfg.stop_mode = StopMode::Disabled;
        cfg.seed = 17;
        let t = Instant::now();
        let a = optimize(|x| Ok(f(x)), &cfg).unwrap();
        let elapsed = t.elapsed();
        let b = optimize(|x| Ok(f(x)), &cfg).unwrap();
        (a.best_value, a.best_params == b.best_params && a.best_value == b.best_value, elapsed)
    };
    let sphere = |x: &[f64]| x.iter().map(|v| (v - 0.7).powi(2)).sum::<f64>();
    let rosen = |x: &[f64]| {
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v - 2.0).collect();
        y.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum::<f64>()
    };
    let (s, s_det, s_t) = run(&sphere, 10, 200);
    let (r, r_det, r_t) = run(&rosen, 5, 500);
    check(
        s < 1e-6 && r < 1e-3 && s_det && r_det && within(s_t, 10.0) && within(r_t, 10.0),
        format!(
            "sphere {s:.2e} ({:.1}s, deterministic {s_det}); rosenbrock {r:.2e} ({:.1}s, deterministic {r_det})",
            s_t.as_secs_f64(),
            r_t.as_secs_f64()
        ),
    )
}

fn self_recovery() -> Outcome {
    let started = Instant::now();
    let input = clip(ClipKind::SpeechShaped, 5.0, 11);
    let mut ok = true;
    let mut lines = Vec::new();
    for (effect, param) in [("lowpass", "cutoff"), ("gain", "level"), ("distortion", "drive"), ("reverb", "size")] {
        let chain = single_param_chain(effect, param).unwrap();
        for t in [0.2, 0.5, 0.8] {
            let reference = chain.process(&input, &[t]).unwrap();
            let z_ref = embed(&reference).unwrap();
            let grid: Vec<f64> = (0..=100)
                .map(|k| objective(&Handcrafted, &input, &z_ref, &chain, &[k as f64 / 100.0]).unwrap())
                .collect();
            let best_k = (0..grid.len()).min_by(|&a, &b| grid[a].total_cmp(&grid[b])).unwrap();
            let grid_opt = best_k as f64 / 100.0;
            let (_, report) = style_transfer(&input, &reference, &TransferConfig::new(chain.clone(), 5)).unwrap();
            let est = report.best_params[0];
            let pass = (grid_opt - t).abs() <= 0.05 + 1e-12
                && (est - t).abs() <= 0.05
                && report.best_similarity >= 0.99;
            ok &= pass;
            lines.push(format!(
                "{effect}.{param}@{t}: grid {grid_opt:.2} est {est:.3} sim {:.4}{}",
                report.best_similarity,
                if pass { "" } else { " MISS" }
            ));
        }
    }
    let elapsed = started.elapsed();
    ok &= within(elapsed, 180.0);
    check(ok, format!("{}; {:.0}s", lines.join("; "), elapsed.as_secs_f64()))
}

fn param_estimation() -> Outcome {
    let started = Instant::now();
    let corpus = synthetic_corpus_of(&ClipKind::PROGRAM, 24, 5.0, FS, 0);
    let mut ok = true;
    let mut lines = Vec::new();
    for (effect, param) in [("distortion", "drive"), ("reverb", "size"), ("parametric_eq", "high_shelf_gain")] {
        let report = run_param_estimation(&Handcrafted, &corpus, &ParamEstConfig::new(effect, param, 0)).unwrap();
        let mse = report.mse();
        let rho = report.rho().unwrap_or(f64::NAN);
        ok &= rho >= 0.6 && mse <= 0.10;
        lines.push(format!("{effect}.{param}: rho {rho:.3} mse {mse:.4}"));
    }
    let elapsed = started.elapsed();
    ok &= within(elapsed, 1_200.0);
    check(ok, format!("{}; {:.0}s", lines.join("; "), elapsed.as_secs_f64()))
}

fn classification() -> Outcome {
    let started = Instant::now();
    let corpus = synthetic_corpus(48, 5.0, FS, 0);
    let cfg = ClassificationConfig::new(0);
    let r = run_classification(&Handcrafted, &corpus, &cfg).unwrap();
    let noise = run_classification(&NoiseEmbedder::new(0), &corpus, &cfg).unwrap();
    let n = noise.trials.len() as u64;
    let p = binomial_test(noise.correct() as u64, n, 0.2);
    let elapsed = started.elapsed();
    let (avg, tl) = (r.average_accuracy(), r.accuracy(StyleId::TL));
    check(
        r.trials.len() == 200 && avg >= 0.60 && tl >= 0.90 && p >= 0.01 && within(elapsed, 300.0),
        format!(
            "avg {avg:.3} TL {tl:.3}; noise {}/{n} (p = {p:.3}); {:.0}s",
            noise.correct(),
            elapsed.as_secs_f64()
        ),
    )
}

fn retrieval() -> Outcome {
    let started = Instant::now();
    let corpus = synthetic_corpus(48, 5.0, FS, 0);
    let acc: Vec<f64> = [3, 5, 9]
        .iter()
        .map(|&m| run_retrieval(&Handcrafted, &corpus, &RetrievalConfig::new(1, m, 200, 0)).unwrap().accuracy())
        .collect();
    let elapsed = started.elapsed();
    let monotone = acc.windows(2).all(|w| w[1] <= w[0] + 0.05);
    check(
        monotone && acc[1] >= 0.40 && within(elapsed, 600.0),
        format!(
            "M=3 {:.3}, M=5 {:.3}, M=9 {:.3}; {:.0}s",
            acc[0],
            acc[1],
            acc[2],
            elapsed.as_secs_f64()
        ),
    )
}

fn dsp_invariants() -> Outcome {
    let mut rng = Rng::new(6);
    let x = AudioBuffer::stereo(
        FS,
        (0..9_600).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
        (0..9_600).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
    )
    .unwrap();
    let mut worst: Vec<String> = Vec::new();
    let mut ok = true;
    for id in ["gain", "parametric_eq", "compressor", "distortion", "delay", "reverb"] {
        let y = process_effect(id, &x, &identity_params(id).unwrap()).unwrap();
        let err = x
            .channels()
            .zip(y.channels())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max);
        ok &= y.len() == x.len() && err <= 1e-6;
        worst.push(format!("{id} {err:.1e}"));
    }
    // lowpass at its top cutoff on a 100 Hz sine
    let sine: Vec<f64> = (0..FS as usize).map(|n| (2.0 * std::f64::consts::PI * 100.0 * n as f64 / FS as f64).sin()).collect();
    let s = AudioBuffer::mono(FS, sine).unwrap();
    let y = process_effect("lowpass", &s, &identity_params("lowpass").unwrap()).unwrap();
    let amp = y.channel(0)[FS as usize / 2..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ok &= (amp - 1.0).abs() <= 0.01;
    worst.push(format!("lowpass sine amplitude {amp:.4}"));

    let mut bad = 0;
    for _ in 0..10_000 {
        let d = &builtin_effects()[rng.below(builtin_effects().len())];
        let params: Vec<f64> = d.params.iter().map(|_| rng.uniform()).collect();
        let len = 64 + rng.below(1_024);
        let chans = 1 + rng.below(2);
        let data: Vec<Vec<f64>> = (0..chans).map(|_| (0..len).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).collect();
        let buf = AudioBuffer::new(FS, data).unwrap();
        let y = process_effect(d.id, &buf, &params).unwrap();
        if y.channels().any(|c| c.iter().any(|v| !v.is_finite())) {
            bad += 1;
        }
    }
    ok &= bad == 0;
    check(ok, format!("{}; fuzz non-finite outputs {bad}/10000", worst.join(", ")))
}

fn rule_based() -> Outcome {
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let input = clip(ClipKind::PinkNoise, 5.0, 21);
    let other = clip(ClipKind::PinkNoise, 5.0, 22);
    let eq = [0.5, 0.8, 0.5, 0.3, 0.5, 0.6, 0.75, 0.5, 0.5, 0.15];
    let reference = process_effect("parametric_eq", &other, &eq).unwrap();
    let out = rule_based_transfer(&input, &reference).unwrap();
    let bands_ref = third_octave_db(&reference);
    let before = l1(&third_octave_db(&input), &bands_ref);
    let after = l1(&third_octave_db(&out), &bands_ref);

    let n = 3 * FS as usize;
    let burst = (0.05 * FS as f64) as usize;
    let period = (0.5 * FS as f64) as usize;
    let tone: Vec<f64> = (0..n)
        .map(|i| {
            let a = if i % period < burst { 0.5 } else { 0.03 };
            a * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / FS as f64).sin()
        })
        .collect();
    let dry = AudioBuffer::mono(FS, tone).unwrap();
    let squashed = apply_compressor(&dry, -36.0, 10.0);
    let out = rule_based_transfer(&dry, &squashed).unwrap();
    let (c_in, c_ref, c_out) = (crest_db(&dry), crest_db(&squashed), crest_db(&out));
    check(
        after <= 0.5 * before && (c_out - c_ref).abs() <= 1.5,
        format!(
            "band L1 {before:.1} -> {after:.1} dB; crest input {c_in:.2} reference {c_ref:.2} output {c_out:.2} dB"
        ),
    )
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fxmatch")
}

fn fxmatch(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("fxmatch {} -> {}: {}", args.join(" "), out.status, String::from_utf8_lossy(&out.stderr)))
    }
}

fn report_field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .and_then(|v| v.parse().ok())
        .unwrap_or(f64::NAN)
}

const FULL_CHAIN: &str = "effect parametric_eq\neffect compressor\neffect distortion\neffect delay\neffect reverb\n";

fn end_to_end_budget() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let input = stereo(ClipKind::SpeechShaped, 10.0, 31);
    let chain = Chain::from_ids(&["parametric_eq", "compressor", "distortion", "delay", "reverb"]).unwrap();
    let mut rng = Rng::new(32);
    let phi: Vec<f64> = (0..chain.dim()).map(|_| rng.uniform()).collect();
    let reference = chain.process(&stereo(ClipKind::SpeechShaped, 10.0, 33), &phi).unwrap();
    write_wav(&input, p("in.wav"), WavEncoding::Float32).unwrap();
    write_wav(&reference, p("ref.wav"), WavEncoding::Float32).unwrap();
    std::fs::write(p("chain.cfg"), FULL_CHAIN).unwrap();

    let started = Instant::now();
    fxmatch(&[
        "transfer", "--input", &p("in.wav"), "--reference", &p("ref.wav"), "--chain", &p("chain.cfg"), "--output",
        &p("out.wav"), "--seed", "1",
    ])?;
    let elapsed = started.elapsed();
    let report = std::fs::read_to_string(p("out.report.txt")).map_err(|e| e.to_string())?;
    let (best, initial) = (report_field(&report, "best_similarity"), report_field(&report, "initial_similarity"));
    let (evals, gens) = (report_field(&report, "evaluations"), report_field(&report, "generations"));
    check(
        chain.dim() == 24 && within(elapsed, 120.0) && evals <= 1_600.0 && gens <= 25.0 && best >= initial,
        format!(
            "P = {}; {:.1}s; {evals} evaluations over {gens} generations; similarity {initial:.4} -> {best:.4}",
            chain.dim(),
            elapsed.as_secs_f64()
        ),
    )
}

/// Every regular file under `dir`, sorted, with its bytes.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let fixtures = tempfile::tempdir().unwrap();
    let f = |n: &str| fixtures.path().join(n).to_string_lossy().into_owned();
    std::fs::create_dir(f("audio")).unwrap();
    for i in 0..3 {
        write_wav(&stereo(ClipKind::ToneComplex, 1.0, 40 + i), f(&format!("audio/c{i}.wav")), WavEncoding::Float32).unwrap();
    }
    write_wav(&clip(ClipKind::SpeechShaped, 1.0, 50), f("in.wav"), WavEncoding::Float32).unwrap();
    write_wav(&clip(ClipKind::Percussive, 1.0, 51), f("ref.wav"), WavEncoding::Float32).unwrap();
    std::fs::write(f("chain.cfg"), "effect parametric_eq\neffect compressor\n").unwrap();
    std::fs::write(
        f("presets.tsv"),
        "effect\tpreset_index\tvalues\ngain\t0\t0.3\ndelay\t0\t0.2 0.5 0.5\n",
    )
    .unwrap();

    let small = ["--clips", "24", "--seconds", "1"];
    let cma = ["--population", "8", "--max-generations", "3"];
    let cases: Vec<(&str, Vec<String>)> = vec![
        ("transfer", {
            let mut v: Vec<String> = ["transfer", "--input", &f("in.wav"), "--reference", &f("ref.wav"), "--chain", &f("chain.cfg"), "--output", "{out}/o.wav", "--seed", "7"]
                .map(String::from)
                .to_vec();
            v.extend(cma.map(String::from));
            v
        }),
        ("bench classify", {
            let mut v: Vec<String> = ["bench", "classify", "--trials", "10", "--seed", "3", "--output", "{out}/r.tsv"].map(String::from).to_vec();
            v.extend(small.map(String::from));
            v
        }),
        ("bench retrieval", {
            let mut v: Vec<String> = ["bench", "retrieval", "--set-size", "3", "--trials", "10", "--seed", "3", "--output", "{out}/r.tsv"].map(String::from).to_vec();
            v.extend(small.map(String::from));
            v
        }),
        ("bench param-est", {
            let mut v: Vec<String> = ["bench", "param-est", "--effect", "lowpass", "--param", "cutoff", "--targets", "0.3,0.7", "--trials-per-target", "1", "--seed", "3", "--output", "{out}/r.tsv"].map(String::from).to_vec();
            v.extend(small.map(String::from));
            v.extend(cma.map(String::from));
            v
        }),
        ("presets", ["presets", "--effect", "gain", "--effect", "delay", "--configs", "30", "--probe-seconds", "1", "--seed", "3", "--output", "{out}/p.tsv"].map(String::from).to_vec()),
        ("datagen", ["datagen", "--audio-dir", &f("audio"), "--presets", &f("presets.tsv"), "--examples", "4", "--crop-len", "8192", "--seed", "3", "--output-dir", "{out}/data"].map(String::from).to_vec()),
        ("effects", ["effects", "--output", "{out}/e.tsv"].map(String::from).to_vec()),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, args) in cases {
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let out = tempfile::tempdir().unwrap();
                let out_s = out.path().to_string_lossy().into_owned();
                let a: Vec<String> = args.iter().map(|s| s.replace("{out}", &out_s)).collect();
                let a: Vec<&str> = a.iter().map(String::as_str).collect();
                fxmatch(&a).map(|_| snapshot(out.path()))
            })
            .collect::<Result<_, _>>()?;
        let same = runs[0] == runs[1] && !runs[0].is_empty();
        ok &= same;
        lines.push(format!("{name} {} file(s) {}", runs[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    check(ok, lines.join("; "))
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "optimizer_correctness", optimizer_correctness),
        (2, "self_recovery", self_recovery),
        (3, "param_estimation", param_estimation),
        (4, "classification", classification),
        (5, "retrieval", retrieval),
        (6, "dsp_invariants", dsp_invariants),
        (7, "rule_based", rule_based),
        (8, "end_to_end_budget", end_to_end_budget),
        (9, "determinism", determinism),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (n, name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|s| name.contains(s.as_str())) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("criterion {n} {name}: {tag} [{:.1}s] {detail}", t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
