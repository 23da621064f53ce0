//! Post-training weight pruning and quantization of the toy model.

pub mod calibrate;
pub mod ecoflap;
pub mod mask;
pub mod model_file;
pub mod quant;
pub mod sparsegpt;
pub mod tensor;
pub mod wanda;

pub use calibrate::{capture, parse_tensor_name, tensor_name, CalibrationConfig, ModelCalibration};
pub use ecoflap::{
    ecoflap_layer_scores, layer_densities, layer_keep_counts, zeroth_order_importance, EcoFlapConfig,
};
pub use mask::{magnitude_mask, mask_from_scores, row_keep_counts, MaskGroup, SparsityMask, SparsityPattern};
pub use model_file::{read_model, write_model, CompressedModel, CompressedTensor};
pub use quant::{awq_quantize, gptq_quantize, rtn_quantize, QuantSpec, QuantizedTensor};
pub use sparsegpt::{sparsegpt_prune, sparsegpt_scores};
pub use tensor::{reconstruction_error, CalibrationSet, WeightTensor};
pub use wanda::{wanda_prune, wanda_scores};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sim::{Model, PROJECTIONS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamMethod {
    Magnitude,
    Wanda,
    #[serde(rename = "sparsegpt")]
    SparseGpt,
    #[serde(rename = "ecoflap")]
    EcoFlap,
    Rtn,
    Awq,
    Gptq,
}

impl ParamMethod {
    pub const ALL: [ParamMethod; 7] = [
        ParamMethod::Magnitude,
        ParamMethod::Wanda,
        ParamMethod::SparseGpt,
        ParamMethod::EcoFlap,
        ParamMethod::Rtn,
        ParamMethod::Awq,
        ParamMethod::Gptq,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ParamMethod::Magnitude => "magnitude",
            ParamMethod::Wanda => "wanda",
            ParamMethod::SparseGpt => "sparsegpt",
            ParamMethod::EcoFlap => "ecoflap",
            ParamMethod::Rtn => "rtn",
            ParamMethod::Awq => "awq",
            ParamMethod::Gptq => "gptq",
        }
    }

    pub fn is_quantizer(&self) -> bool {
        matches!(self, ParamMethod::Rtn | ParamMethod::Awq | ParamMethod::Gptq)
    }
}

/// One weight-compression configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub method: ParamMethod,
    #[serde(default = "default_pattern")]
    pub pattern: SparsityPattern,
    #[serde(default)]
    pub quant: QuantSpec,
    #[serde(default)]
    pub group: MaskGroup,
    /// Hessian damping; defaults to 1% of the mean diagonal of X Xᵀ.
    #[serde(default)]
    pub damping: Option<f64>,
    #[serde(default)]
    pub ecoflap: EcoFlapConfig,
}

fn default_pattern() -> SparsityPattern {
    SparsityPattern::Unstructured { density: 0.5 }
}

impl ParamSpec {
    pub fn new(method: ParamMethod) -> Self {
        Self {
            method,
            pattern: default_pattern(),
            quant: QuantSpec::default(),
            group: MaskGroup::default(),
            damping: None,
            ecoflap: EcoFlapConfig::default(),
        }
    }

    pub fn pruning(method: ParamMethod, pattern: SparsityPattern) -> Self {
        Self {
            pattern,
            ..Self::new(method)
        }
    }

    pub fn quantization(method: ParamMethod, quant: QuantSpec) -> Self {
        Self {
            quant,
            ..Self::new(method)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method.is_quantizer() {
            self.quant.validate()
        } else {
            if self.method == ParamMethod::EcoFlap && self.pattern == SparsityPattern::Semi24 {
                return Err(Error::Config("ecoflap allocates unstructured sparsity only".into()));
            }
            if let SparsityPattern::Unstructured { density } = self.pattern {
                crate::budget::check_fraction(density)?;
            }
            Ok(())
        }
    }

    /// e.g. `wanda_d0.5`, `sparsegpt_2:4`, `awq_w4g128`.
    pub fn label(&self) -> String {
        let m = self.method.name();
        if self.method.is_quantizer() {
            format!("{m}_{}", self.quant.label())
        } else {
            match self.pattern {
                SparsityPattern::Unstructured { density } => format!("{m}_d{density}"),
                SparsityPattern::Semi24 => format!("{m}_2:4"),
            }
        }
    }

    /// Needs projection inputs from a calibration pass.
    pub fn needs_calibration(&self) -> bool {
        !matches!(self.method, ParamMethod::Magnitude | ParamMethod::Rtn)
    }
}

fn weight_tensors(model: &Model) -> Vec<WeightTensor> {
    let mut out = Vec::new();
    for (l, block) in model.blocks().iter().enumerate() {
        for p in PROJECTIONS {
            let lin = block.get(p).expect("known projection");
            out.push(WeightTensor {
                name: tensor_name(l, p),
                rows: lin.out_dim,
                cols: lin.in_dim,
                data: lin.weight.clone(),
            });
        }
    }
    out
}

fn pruned(w: &WeightTensor, mask: SparsityMask) -> CompressedTensor {
    CompressedTensor::Pruned {
        weights: mask.apply(w),
        mask,
    }
}

/// Compresses every projection of every block. `calib` is required unless
/// the method is data-free.
pub fn compress_model(model: &Model, spec: &ParamSpec, calib: Option<&ModelCalibration>) -> Result<CompressedModel> {
    spec.validate()?;
    let tensors = weight_tensors(model);
    let calib_for = |name: &str| -> Result<&CalibrationSet> {
        calib
            .ok_or_else(|| Error::Config(format!("{} needs calibration data", spec.method.name())))?
            .get(name)
    };
    let eco_counts: BTreeMap<String, usize> = if spec.method == ParamMethod::EcoFlap {
        let SparsityPattern::Unstructured { density } = spec.pattern else {
            unreachable!("validated")
        };
        let data = ecoflap::loss_data(model, &spec.ecoflap)?;
        let scores = ecoflap_layer_scores(model, &data, &spec.ecoflap)?;
        let sizes: Vec<usize> = (0..model.config().num_layers)
            .map(|l| model.block_params(l).len())
            .collect();
        let keep = layer_keep_counts(&scores, &sizes, density, spec.ecoflap.temperature)?;
        ecoflap::tensor_keep_counts(model, &keep).into_iter().collect()
    } else {
        BTreeMap::new()
    };

    let compressed = tensors
        .par_iter()
        .map(|w| -> Result<CompressedTensor> {
            Ok(match spec.method {
                ParamMethod::Magnitude => pruned(w, magnitude_mask(w, &spec.pattern, spec.group)?),
                ParamMethod::Wanda => pruned(w, wanda::wanda_mask(w, calib_for(&w.name)?, &spec.pattern, spec.group)?),
                ParamMethod::EcoFlap => {
                    let scores = wanda_scores(w, calib_for(&w.name)?)?;
                    let k = eco_counts[&w.name];
                    pruned(w, mask::mask_with_count(&scores, w.rows, w.cols, k, spec.group))
                }
                ParamMethod::SparseGpt => {
                    let (weights, mask) = sparsegpt_prune(w, calib_for(&w.name)?, &spec.pattern, spec.damping)?;
                    CompressedTensor::Pruned { weights, mask }
                }
                ParamMethod::Rtn => CompressedTensor::Quantized(rtn_quantize(w, &spec.quant)?),
                ParamMethod::Awq => CompressedTensor::Quantized(awq_quantize(w, calib_for(&w.name)?, &spec.quant)?),
                ParamMethod::Gptq => {
                    CompressedTensor::Quantized(gptq_quantize(w, calib_for(&w.name)?, &spec.quant, spec.damping)?)
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompressedModel {
        config: model.config().clone(),
        method: spec.label(),
        tensors: compressed,
    })
}
