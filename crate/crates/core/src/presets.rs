//! Effect presets from clustered random configurations, and export of
//! (input, processed output) example pairs labelled with effect and preset.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio::{apply_gain_db, random_crop, AudioBuffer};
use crate::effects::{descriptor, process_effect};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::style::mfcc_means;
use crate::wav::{read_wav, write_atomic, write_wav, WavEncoding};

pub const DEFAULT_CONFIGS: usize = 1000;
pub const PRESETS_PER_EFFECT: usize = 10;
pub const DEFAULT_CROP_LEN: usize = 524_288;
/// Input gain augmentation range in dB.
pub const GAIN_RANGE_DB: (f64, f64) = (-32.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub effect: String,
    pub index: usize,
    pub values: Vec<f64>,
}

/// `n` uniform draws from the effect's normalized parameter cube.
pub fn sample_random_configs(effect_id: &str, n: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    let d = descriptor(effect_id)?.params.len();
    Ok((0..n).map(|_| (0..d).map(|_| rng.uniform()).collect()).collect())
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid (lowest index on ties).
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.below(points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.uniform() * total;
            let mut idx = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.below(points.len())
        };
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn update_centroids(points: &[Vec<f64>], assignments: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        sums[a].iter_mut().zip(p).for_each(|(s, x)| *s += x);
    }
    for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
        if n > 0 {
            *c = s.into_iter().map(|v| v / n as f64).collect();
        }
    }
}

/// Lloyd's algorithm with k-means++ seeding. A cluster left empty after
/// assignment takes over the point farthest from its own centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, max_iters: usize, rng: &mut Rng) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::InvalidConfig("k-means needs k >= 1".into()));
    }
    if k > points.len() {
        return Err(Error::TooFewPoints { k, points: points.len() });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch(dim, p.len()));
    }
    let mut centroids = plus_plus_seeds(points, k, rng);
    let mut assignments: Vec<usize> = vec![usize::MAX; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters.max(1) {
        iterations += 1;
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();

        let mut counts = vec![0usize; k];
        next.iter().for_each(|&a| counts[a] += 1);
        let mut taken = vec![false; points.len()];
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            // Farthest point whose cluster can spare it.
            let mut far = None;
            let mut far_d = -1.0;
            for (i, p) in points.iter().enumerate() {
                if taken[i] || counts[next[i]] < 2 {
                    continue;
                }
                let d = sq_dist(p, &centroids[next[i]]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
            let i = far.expect("k <= points leaves a cluster with two members");
            counts[next[i]] -= 1;
            counts[j] += 1;
            next[i] = j;
            taken[i] = true;
            centroids[j] = points[i].clone();
        }

        update_centroids(points, &next, &mut centroids);
        let inertia: f64 = points.iter().zip(&next).map(|(p, &a)| sq_dist(p, &centroids[a])).sum();
        history.push(inertia);
        let stable = next == assignments;
        assignments = next;
        if stable {
            break;
        }
    }
    Ok(KMeans {
        inertia: *history.last().expect("at least one iteration"),
        assignments,
        centroids,
        inertia_history: history,
        iterations,
    })
}

/// One uniformly drawn member of each cluster of `features`, ordered by
/// cluster index. `configs[i]` is the parameter vector behind `features[i]`.
pub fn cluster_presets(
    effect_id: &str,
    configs: &[Vec<f64>],
    features: &[Vec<f64>],
    k: usize,
    rng: &mut Rng,
) -> Result<Vec<Preset>> {
    if configs.len() != features.len() {
        return Err(Error::DimensionMismatch(configs.len(), features.len()));
    }
    let km = kmeans(features, k, 100, rng)?;
    let mut members = vec![Vec::new(); k];
    for (i, &a) in km.assignments.iter().enumerate() {
        members[a].push(i);
    }
    Ok(members
        .iter()
        .enumerate()
        .map(|(index, m)| Preset {
            effect: effect_id.to_string(),
            index,
            values: configs[m[rng.below(m.len())]].clone(),
        })
        .collect())
}

/// Ten presets for `effect_id`: 1000 random configurations are applied to
/// `probe`, clustered on the mid channel's mean MFCCs, and one member is
/// drawn from each cluster.
pub fn generate_presets(effect_id: &str, probe: &AudioBuffer, rng: &mut Rng) -> Result<Vec<Preset>> {
    generate_presets_with(effect_id, probe, DEFAULT_CONFIGS, rng)
}

/// [`generate_presets`] with `n_configs` random configurations.
pub fn generate_presets_with(
    effect_id: &str,
    probe: &AudioBuffer,
    n_configs: usize,
    rng: &mut Rng,
) -> Result<Vec<Preset>> {
    let min = probe.sample_rate() as usize;
    if probe.len() < min {
        return Err(Error::TooShort { len: probe.len(), min });
    }
    let configs = sample_random_configs(effect_id, n_configs, rng)?;
    let features = configs
        .par_iter()
        .map(|c| mfcc_means(&process_effect(effect_id, probe, c)?))
        .collect::<Result<Vec<_>>>()?;
    cluster_presets(effect_id, &configs, &features, PRESETS_PER_EFFECT, rng)
}

/// Presets keyed by effect id.
pub type PresetStore = BTreeMap<String, Vec<Preset>>;

pub fn presets_to_tsv(store: &PresetStore) -> String {
    let mut out = String::from("effect\tpreset_index\tvalues\n");
    for presets in store.values() {
        for p in presets {
            let vals: Vec<String> = p.values.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}\t{}\t{}", p.effect, p.index, vals.join(" "));
        }
    }
    out
}

pub fn presets_from_tsv(text: &str) -> Result<PresetStore> {
    let mut store = PresetStore::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("preset line {}: {what}", n + 1));
        let mut cols = line.split('\t');
        let (Some(effect), Some(index), Some(values), None) = (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(bad("expected 3 tab-separated columns"));
        };
        let d = descriptor(effect)?.params.len();
        let index = index.parse().map_err(|_| bad("bad preset index"))?;
        let values = values
            .split(' ')
            .map(|v| v.parse::<f64>().map_err(|_| bad("bad value")))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != d {
            return Err(Error::ParamCount { expected: d, got: values.len() });
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(bad("value outside [0, 1]"));
        }
        store.entry(effect.to_string()).or_default().push(Preset {
            effect: effect.to_string(),
            index,
            values,
        });
    }
    Ok(store)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretextExample {
    /// Paths relative to the dataset directory.
    pub input: String,
    pub output: String,
    pub effect: String,
    pub preset: usize,
}

pub fn manifest_to_tsv(rows: &[PretextExample]) -> String {
    let mut out = String::from("input\toutput\teffect\tpreset\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.input, r.output, r.effect, r.preset);
    }
    out
}

pub fn manifest_from_tsv(text: &str) -> Result<Vec<PretextExample>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split('\t').collect();
            match cols.as_slice() {
                [input, output, effect, preset] => Ok(PretextExample {
                    input: input.to_string(),
                    output: output.to_string(),
                    effect: effect.to_string(),
                    preset: preset.parse().map_err(|_| Error::Parse(format!("bad preset index '{preset}'")))?,
                }),
                _ => Err(Error::Parse(format!("manifest row has {} columns", cols.len()))),
            }
        })
        .collect()
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyDirectory(dir.to_path_buf()));
    }
    Ok(files)
}

/// Writes `n_examples` input/output pairs as float32 WAV plus
/// `manifest.tsv` into `out_dir`. Each example draws a directory, a file, a
/// crop, an effect, a preset and an input gain from its own forked stream.
pub fn generate_pretext_dataset(
    audio_dirs: &[PathBuf],
    presets: &PresetStore,
    n_examples: usize,
    crop_len: usize,
    out_dir: &Path,
    rng: &mut Rng,
) -> Result<Vec<PretextExample>> {
    if audio_dirs.is_empty() {
        return Err(Error::InvalidConfig("no audio directories given".into()));
    }
    let effects: Vec<(&String, &Vec<Preset>)> = presets.iter().filter(|(_, p)| !p.is_empty()).collect();
    if effects.is_empty() {
        return Err(Error::InvalidConfig("preset store is empty".into()));
    }
    let files = audio_dirs.iter().map(|d| wav_files(d)).collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let base = Rng::new(rng.next_u64());
    let rows = (0..n_examples)
        .into_par_iter()
        .map(|i| {
            let mut r = base.fork(i as u64);
            let dir = &files[r.below(files.len())];
            let path = &dir[r.below(dir.len())];
            let clip = random_crop(&read_wav(path)?, crop_len, &mut r)?;
            let (effect, effect_presets) = effects[r.below(effects.len())];
            let preset = &effect_presets[r.below(effect_presets.len())];
            let gain = r.uniform_range(GAIN_RANGE_DB.0, GAIN_RANGE_DB.1);
            // Process exactly what gets stored so the pair replays.
            let input = apply_gain_db(&clip, gain).quantize_f32();
            let output = process_effect(effect, &input, &preset.values)?;
            let row = PretextExample {
                input: format!("{i:06}_input.wav"),
                output: format!("{i:06}_output.wav"),
                effect: effect.clone(),
                preset: preset.index,
            };
            write_wav(&input, out_dir.join(&row.input), WavEncoding::Float32)?;
            write_wav(&output, out_dir.join(&row.output), WavEncoding::Float32)?;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    write_atomic(&out_dir.join("manifest.tsv"), manifest_to_tsv(&rows).as_bytes())?;
    Ok(rows)
}
