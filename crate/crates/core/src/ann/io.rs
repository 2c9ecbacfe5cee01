//! Model files: JSON with row-major weight arrays.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Architecture, Layer, MlpModel};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    arch: Architecture,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    masks: Vec<Vec<u8>>,
    dropout_p: f64,
    dropout_input_p: f64,
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        arch: model.arch.clone(),
        weights: model.layers.iter().map(|l| l.weights.iter().copied().collect()).collect(),
        biases: model.layers.iter().map(|l| l.biases.to_vec()).collect(),
        masks: model.layers.iter().map(|l| l.mask.iter().map(|&m| m as u8).collect()).collect(),
        dropout_p: model.dropout_p,
        dropout_input_p: model.dropout_input_p,
    };
    let mut text = serde_json::to_string(&file)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Schema(format!(
            "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    file.arch.validate().map_err(|e| Error::Schema(e.to_string()))?;
    let sizes = file.arch.layer_sizes();
    let n = sizes.len() - 1;
    if file.weights.len() != n || file.biases.len() != n || file.masks.len() != n {
        return Err(Error::Schema(format!("expected {n} layers of weights, biases and masks")));
    }
    let mut layers = Vec::with_capacity(n);
    for (l, w) in sizes.windows(2).enumerate() {
        let shape = (w[1], w[0]);
        let bad = |what: &str| Error::Schema(format!("layer {l}: {what} has the wrong length"));
        let weights = Array2::from_shape_vec(shape, file.weights[l].clone()).map_err(|_| bad("weights"))?;
        let masks: Vec<f64> = file.masks[l].iter().map(|&m| f64::from(m)).collect();
        if masks.iter().any(|&m| m > 1.0) {
            return Err(Error::Schema(format!("layer {l}: masks must be 0 or 1")));
        }
        let mask = Array2::from_shape_vec(shape, masks).map_err(|_| bad("mask"))?;
        if file.biases[l].len() != w[1] {
            return Err(bad("biases"));
        }
        if weights.iter().zip(&mask).any(|(&w, &m)| m == 0.0 && w != 0.0) {
            return Err(Error::Schema(format!("layer {l}: pruned weight is nonzero")));
        }
        layers.push(Layer {
            weights,
            biases: Array1::from(file.biases[l].clone()),
            mask,
        });
    }
    for p in [file.dropout_p, file.dropout_input_p] {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Schema(format!("dropout {p} outside [0, 1)")));
        }
    }
    Ok(MlpModel {
        arch: file.arch,
        layers,
        dropout_p: file.dropout_p,
        dropout_input_p: file.dropout_input_p,
    })
}
