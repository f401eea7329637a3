//! Series effect chains with a flat normalized parameter vector.
//!
//! Chain-spec text format, one directive per line, `#` starts a comment:
//!
//! ```text
//! effect parametric_eq
//! effect delay
//! fix time 0.25        # pins delay.time; applies to the latest effect
//! ```

use std::fmt::Write as _;

use crate::audio::AudioBuffer;
use crate::effects::{self, EffectDescriptor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub effect: &'static EffectDescriptor,
    /// (parameter index, normalized value) pairs held constant.
    pub fixed: Vec<(usize, f64)>,
}

impl Stage {
    pub fn new(effect_id: &str) -> Result<Self> {
        Ok(Self {
            effect: effects::descriptor(effect_id)?,
            fixed: Vec::new(),
        })
    }

    pub fn fix(mut self, param: &str, value: f64) -> Result<Self> {
        let idx = self.effect.param_index(param).ok_or_else(|| Error::UnknownParam {
            effect: self.effect.id.to_string(),
            param: param.to_string(),
        })?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidConfig(format!(
                "fixed value {value} for {}.{param} outside [0, 1]",
                self.effect.id
            )));
        }
        self.fixed.retain(|(i, _)| *i != idx);
        self.fixed.push((idx, value));
        Ok(self)
    }

    fn fixed_value(&self, idx: usize) -> Option<f64> {
        self.fixed.iter().find(|(i, _)| *i == idx).map(|(_, v)| *v)
    }

    /// Indices (into the descriptor's parameter list) of the searched parameters.
    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.effect.params.len()).filter(|i| self.fixed_value(*i).is_none())
    }

    pub fn free_count(&self) -> usize {
        self.effect.params.len() - self.fixed.len()
    }

    /// Full parameter vector for this stage given its free values.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut free = free.iter();
        (0..self.effect.params.len())
            .map(|i| match self.fixed_value(i) {
                Some(v) => v,
                None => *free.next().expect("free slice sized by free_count"),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    stages: Vec<Stage>,
}

/// One row of a human-readable parameter listing.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamValue {
    pub effect: &'static str,
    pub param: &'static str,
    pub normalized: f64,
    pub physical: f64,
    pub unit: &'static str,
    pub fixed: bool,
}

impl Chain {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidConfig("chain needs at least one effect".into()));
        }
        Ok(Self { stages })
    }

    /// Chain of the given effects with nothing fixed.
    pub fn from_ids(ids: &[&str]) -> Result<Self> {
        Self::new(ids.iter().map(|id| Stage::new(id)).collect::<Result<_>>()?)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Total number of free parameters, P.
    pub fn dim(&self) -> usize {
        self.stages.iter().map(Stage::free_count).sum()
    }

    fn check_dim(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch(phi.len(), self.dim()));
        }
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("parameter {i} is not finite")));
        }
        Ok(())
    }

    /// Per-stage slices of the free parameter vector, in stage order.
    pub fn split_params<'a>(&self, phi: &'a [f64]) -> Result<Vec<&'a [f64]>> {
        self.check_dim(phi)?;
        let mut rest = phi;
        Ok(self
            .stages
            .iter()
            .map(|s| {
                let (head, tail) = rest.split_at(s.free_count());
                rest = tail;
                head
            })
            .collect())
    }

    /// Full per-stage parameter vectors with fixed values injected.
    pub fn stage_params(&self, phi: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .split_params(phi)?
            .into_iter()
            .zip(&self.stages)
            .map(|(free, s)| s.expand(free))
            .collect())
    }

    /// x_o = f_K(…f_1(x; φ_1)…; φ_K). No clipping between stages.
    pub fn process(&self, input: &AudioBuffer, phi: &[f64]) -> Result<AudioBuffer> {
        let params = self.stage_params(phi)?;
        let mut x = input.clone();
        for (stage, p) in self.stages.iter().zip(&params) {
            x = effects::process_effect(stage.effect.id, &x, p)?;
        }
        Ok(x)
    }

    /// Free-parameter vector with every searched parameter at its default.
    pub fn default_params(&self) -> Vec<f64> {
        self.stages
            .iter()
            .flat_map(|s| s.free_indices().map(|i| s.effect.params[i].default))
            .collect()
    }

    /// Every parameter (free and fixed) with its physical value.
    pub fn describe(&self, phi: &[f64]) -> Result<Vec<ParamValue>> {
        let params = self.stage_params(phi)?;
        let mut rows = Vec::new();
        for (stage, values) in self.stages.iter().zip(params) {
            for (i, (spec, v)) in stage.effect.params.iter().zip(values).enumerate() {
                rows.push(ParamValue {
                    effect: stage.effect.id,
                    param: spec.name,
                    normalized: v,
                    physical: spec.map(v),
                    unit: spec.unit,
                    fixed: stage.fixed_value(i).is_some(),
                });
            }
        }
        Ok(rows)
    }

    /// Render back to chain-spec text.
    pub fn to_spec(&self) -> String {
        let mut out = String::new();
        for s in &self.stages {
            let _ = writeln!(out, "effect {}", s.effect.id);
            for (i, v) in &s.fixed {
                let _ = writeln!(out, "fix {} {}", s.effect.params[*i].name, v);
            }
        }
        out
    }
}

pub fn process_chain(chain: &Chain, input: &AudioBuffer, phi: &[f64]) -> Result<AudioBuffer> {
    chain.process(input, phi)
}

pub fn split_params<'a>(chain: &Chain, phi: &'a [f64]) -> Result<Vec<&'a [f64]>> {
    chain.split_params(phi)
}

pub fn parse_chain_spec(text: &str) -> Result<Chain> {
    let mut stages: Vec<Stage> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let err = |message: String| Error::ChainSpec { line: line_no, message };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["effect", id] => stages.push(Stage::new(id).map_err(|e| err(e.to_string()))?),
            ["fix", name, value] => {
                let value: f64 = value
                    .parse()
                    .map_err(|_| err(format!("'{value}' is not a number")))?;
                let stage = stages
                    .pop()
                    .ok_or_else(|| err("'fix' before any 'effect' line".into()))?;
                stages.push(stage.fix(name, value).map_err(|e| err(e.to_string()))?);
            }
            _ => return Err(err(format!("cannot parse '{line}'"))),
        }
    }
    if stages.is_empty() {
        return Err(Error::ChainSpec {
            line: text.lines().count().max(1),
            message: "no effect lines".into(),
        });
    }
    Chain::new(stages)
}
