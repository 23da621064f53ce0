use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::tensor::CalibrationSet;
use crate::rng;
use crate::sim::{make_task, Model, TaskKind, TaskParams, PROJECTIONS};
use crate::{Error, Result};

/// Synthetic calibration data: `samples` seeded tasks, with the projection
/// inputs at `positions` random token positions of each (the last position
/// is always included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub samples: usize,
    pub positions: usize,
    pub seed: u64,
    pub kind: TaskKind,
    pub visual_len: usize,
    pub text_len: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            samples: 128,
            positions: 4,
            seed: 0x00CA_11B0,
            kind: TaskKind::NeedleRetrieval,
            visual_len: 480,
            text_len: 32,
        }
    }
}

impl CalibrationConfig {
    pub fn task_params(&self, model: &Model) -> TaskParams {
        TaskParams {
            visual_len: self.visual_len,
            text_len: self.text_len,
            hidden: model.config().hidden(),
            vocab_size: model.config().vocab_size,
            ..TaskParams::default()
        }
    }
}

pub fn tensor_name(layer: usize, projection: &str) -> String {
    format!("layer{layer}.{projection}")
}

/// Parses `layer{l}.{projection}`.
pub fn parse_tensor_name(name: &str) -> Option<(usize, &str)> {
    let (layer, proj) = name.strip_prefix("layer")?.split_once('.')?;
    let layer = layer.parse().ok()?;
    PROJECTIONS.contains(&proj).then_some((layer, proj))
}

/// Captured projection inputs, keyed by tensor name.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCalibration {
    pub sets: BTreeMap<String, CalibrationSet>,
}

impl ModelCalibration {
    pub fn get(&self, name: &str) -> Result<&CalibrationSet> {
        self.sets
            .get(name)
            .ok_or_else(|| Error::Config(format!("no calibration data for `{name}`")))
    }
}

/// One recording forward pass per calibration task.
pub fn capture(model: &Model, cfg: &CalibrationConfig) -> Result<ModelCalibration> {
    if cfg.samples == 0 || cfg.positions == 0 {
        return Err(Error::Config("calibration needs samples and positions".into()));
    }
    let params = cfg.task_params(model);
    let mut raw: BTreeMap<String, Vec<Vec<f32>>> = BTreeMap::new();
    for s in 0..cfg.samples {
        let task = make_task(cfg.kind, &params, rng::derive(cfg.seed, s as u64))?;
        let len = task.sequence.len();
        let mut r = rng::stream(cfg.seed, 0xCA1B_0000 + s as u64);
        let mut picked = vec![false; len];
        picked[len - 1] = true;
        let extra = cfg.positions.min(len) - 1;
        for i in sample(&mut r, len - 1, extra) {
            picked[i] = true;
        }
        model.record_inputs(task.sequence.embeddings(), |layer, pos, proj, x| {
            if picked[pos] {
                raw.entry(tensor_name(layer, proj)).or_default().push(x.to_vec());
            }
        });
    }
    let sets = raw
        .into_iter()
        .map(|(name, samples)| {
            let n = samples[0].len();
            CalibrationSet::new(n, samples).map(|c| (name, c))
        })
        .collect::<Result<_>>()?;
    Ok(ModelCalibration { sets })
}
