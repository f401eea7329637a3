//! The five production styles used for zero-shot classification: telephone,
//! bright, warm, broadcast and neutral.

use std::fmt;
use std::str::FromStr;

use crate::audio::AudioBuffer;
use crate::chain::{Chain, Stage};
use crate::effects::descriptor;
use crate::error::{Error, Result};

/// Declaration order is the tie-break order for classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StyleId {
    TL,
    BR,
    WM,
    BC,
    NT,
}

impl StyleId {
    pub const ALL: [StyleId; 5] = [StyleId::TL, StyleId::BR, StyleId::WM, StyleId::BC, StyleId::NT];

    pub fn as_str(self) -> &'static str {
        match self {
            StyleId::TL => "TL",
            StyleId::BR => "BR",
            StyleId::WM => "WM",
            StyleId::BC => "BC",
            StyleId::NT => "NT",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for StyleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StyleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StyleId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown style '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct StylePreset {
    pub id: StyleId,
    pub chain: Chain,
    pub params: Vec<f64>,
}

impl StylePreset {
    pub fn apply(&self, input: &AudioBuffer) -> Result<AudioBuffer> {
        self.chain.process(input, &self.params)
    }
}

/// Registry defaults with the named parameters set in physical units.
fn stage(effect: &str, settings: &[(&str, f64)]) -> Result<(Stage, Vec<f64>)> {
    let d = descriptor(effect)?;
    let mut values = d.defaults();
    for &(name, physical) in settings {
        let i = d.param_index(name).ok_or_else(|| Error::UnknownParam {
            effect: effect.to_string(),
            param: name.to_string(),
        })?;
        values[i] = d.params[i].unmap(physical);
    }
    Ok((Stage::new(effect)?, values))
}

fn build(stages: Vec<(Stage, Vec<f64>)>) -> Result<(Chain, Vec<f64>)> {
    let params = stages.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    Ok((Chain::new(stages.into_iter().map(|(s, _)| s).collect())?, params))
}

pub fn style_preset(id: StyleId) -> StylePreset {
    let built = match id {
        StyleId::TL => build(vec![
            stage("highpass", &[("cutoff", 300.0)]),
            stage("lowpass", &[("cutoff", 3_400.0)]),
            stage("compressor", &[("threshold", -30.0), ("ratio", 4.0)]),
        ]
        .into_iter()
        .collect::<Result<_>>()
        .expect("valid TL stages")),
        StyleId::BR => build(vec![stage(
            "parametric_eq",
            &[
                ("low_shelf_freq", 150.0),
                ("low_shelf_gain", -3.0),
                ("high_shelf_freq", 6_000.0),
                ("high_shelf_gain", 9.0),
            ],
        )
        .expect("valid BR stage")]),
        StyleId::WM => build(vec![stage(
            "parametric_eq",
            &[
                ("low_shelf_freq", 200.0),
                ("low_shelf_gain", 6.0),
                ("high_shelf_freq", 6_000.0),
                ("high_shelf_gain", -6.0),
            ],
        )
        .expect("valid WM stage")]),
        StyleId::BC => build(vec![
            stage("compressor", &[("threshold", -35.0), ("ratio", 8.0), ("makeup", 6.0)]).expect("valid BC stage"),
            stage("parametric_eq", &[("peak2_freq", 3_000.0), ("peak2_gain", 3.0), ("peak2_q", 1.0)])
                .expect("valid BC stage"),
        ]),
        StyleId::NT => build(vec![stage("gain", &[("level", 0.0)]).expect("valid NT stage")]),
    }
    .expect("style chains are non-empty");
    StylePreset {
        id,
        chain: built.0,
        params: built.1,
    }
}

pub fn apply_style(id: StyleId, input: &AudioBuffer) -> Result<AudioBuffer> {
    style_preset(id).apply(input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::corpus::pink_noise;
    use crate::rng::Rng;

    #[test]
    fn ids_round_trip_in_order() {
        for (i, id) in StyleId::ALL.into_iter().enumerate() {
            assert_eq!(id.index(), i);
            assert_eq!(id.as_str().parse::<StyleId>().unwrap(), id);
        }
        assert!(StyleId::TL < StyleId::NT);
        assert!("XX".parse::<StyleId>().is_err());
    }

    #[test]
    fn presets_hold_their_physical_settings() {
        let tl = style_preset(StyleId::TL);
        let desc = tl.chain.describe(&tl.params).unwrap();
        let get = |e: &str, p: &str| desc.iter().find(|v| v.effect == e && v.param == p).unwrap().physical;
        assert!((get("highpass", "cutoff") - 300.0).abs() < 1e-9);
        assert!((get("lowpass", "cutoff") - 3_400.0).abs() < 1e-9);
        assert!((get("compressor", "threshold") + 30.0).abs() < 1e-9);
        assert!((get("compressor", "ratio") - 4.0).abs() < 1e-9);
    }

    #[test]
    fn neutral_is_identity() {
        let x = AudioBuffer::mono(48_000, pink_noise(4_800, &mut Rng::new(0))).unwrap();
        let y = apply_style(StyleId::NT, &x).unwrap();
        for (a, b) in x.channel(0).iter().zip(y.channel(0)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn styles_are_deterministic_and_distinct() {
        let x = AudioBuffer::mono(48_000, pink_noise(24_000, &mut Rng::new(1))).unwrap();
        let outs: Vec<AudioBuffer> = StyleId::ALL.iter().map(|&s| apply_style(s, &x).unwrap()).collect();
        for (s, o) in StyleId::ALL.iter().zip(&outs) {
            assert_eq!(o, &apply_style(*s, &x).unwrap());
        }
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(outs[i], outs[j]);
            }
        }
    }
}
