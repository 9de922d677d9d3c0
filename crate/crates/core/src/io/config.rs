//! Configuration files for [`SyntheticSpec`].
//!
//! Either a JSON object
//!
//! ```json
//! {"ambient_dim": 6, "eta1": [1.0, 0.5], "eta2": [0.8],
//!  "overlap": [[0.6], [0.2]], "noise_level": 0.1, "seed": 7}
//! ```
//!
//! or `key = value` lines, where vectors are comma-separated and matrix rows
//! are separated by `;`:
//!
//! ```text
//! # two left modes, one right mode
//! ambient_dim = 6
//! eta1 = 1.0, 0.5
//! eta2 = 0.8
//! overlap = 0.6; 0.2
//! ```
//!
//! `noise_level` and `seed` default to 0.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{AlignError, Result};
use crate::synth::SyntheticSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub ambient_dim: usize,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub overlap: Vec<Vec<f64>>,
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn into_spec(self) -> Result<SyntheticSpec> {
        let (d1, d2) = (self.eta1.len(), self.eta2.len());
        if self.overlap.len() != d1 || self.overlap.iter().any(|r| r.len() != d2) {
            return Err(AlignError::DimensionMismatch(format!(
                "overlap must be {d1}x{d2} to match eta1 and eta2"
            )));
        }
        let flat: Vec<f64> = self.overlap.concat();
        Ok(SyntheticSpec {
            ambient_dim: self.ambient_dim,
            eta1: self.eta1,
            eta2: self.eta2,
            overlap: DMatrix::from_row_slice(d1, d2, &flat),
            noise_level: self.noise_level,
            seed: self.seed,
        })
    }

    pub fn from_spec(spec: &SyntheticSpec) -> Self {
        SyntheticConfig {
            ambient_dim: spec.ambient_dim,
            eta1: spec.eta1.clone(),
            eta2: spec.eta2.clone(),
            overlap: spec
                .overlap
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            noise_level: spec.noise_level,
            seed: spec.seed,
        }
    }
}

fn number(s: &str, line: usize) -> Result<Value> {
    let s = s.trim();
    if let Ok(u) = s.parse::<u64>() {
        return Ok(Value::from(u));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| AlignError::ParseError(format!("line {line}: '{s}' is not a number")))?;
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .ok_or_else(|| AlignError::ParseError(format!("line {line}: non-finite value")))
}

fn vector(s: &str, line: usize) -> Result<Value> {
    s.split(',')
        .map(|x| number(x, line))
        .collect::<Result<Vec<_>>>()
        .map(Value::Array)
}

fn key_values(text: &str) -> Result<Value> {
    let mut map = Map::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| AlignError::ParseError(format!("line {line}: expected key = value")))?;
        let key = key.trim();
        let value = match key {
            "overlap" => value
                .split(';')
                .map(|row| vector(row, line))
                .collect::<Result<Vec<_>>>()
                .map(Value::Array)?,
            "eta1" | "eta2" => vector(value, line)?,
            _ => number(value, line)?,
        };
        if map.insert(key.to_string(), value).is_some() {
            return Err(AlignError::ParseError(format!(
                "line {line}: duplicate key '{key}'"
            )));
        }
    }
    Ok(Value::Object(map))
}

/// Parses either format; text whose first non-blank character is `{` is JSON.
pub fn parse_synthetic_config(text: &str) -> Result<SyntheticSpec> {
    let value = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| AlignError::ParseError(e.to_string()))?
    } else {
        key_values(text)?
    };
    let cfg: SyntheticConfig =
        serde_json::from_value(value).map_err(|e| AlignError::ParseError(e.to_string()))?;
    cfg.into_spec()
}

pub fn read_synthetic_config(path: impl AsRef<Path>) -> Result<SyntheticSpec> {
    parse_synthetic_config(&fs::read_to_string(path)?)
}
