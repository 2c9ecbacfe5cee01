//! Dense feed-forward regressor: ReLU hidden layers, one linear output,
//! optional dropout and magnitude-pruning masks.

mod io;
mod train;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureRow;
use crate::error::{Error, Result};
use crate::seed;

pub use io::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use train::{
    adam_step, prune_step, size_matched_depth, sparsity_at, train, AdamState, PruningSchedule, TrainConfig,
    TrainHistory, HISTORY_HEADER,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub output_dim: usize,
}

impl Architecture {
    /// Six inputs, the given hidden widths, one output.
    pub fn new(hidden_sizes: Vec<usize>) -> Result<Self> {
        let arch = Architecture {
            input_dim: 6,
            hidden_sizes,
            output_dim: 1,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// `layers` hidden layers of width `width`.
    pub fn homogeneous(width: usize, layers: usize) -> Result<Self> {
        Self::new(vec![width; layers])
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() {
            return Err(Error::InvalidArgument("at least one hidden layer is required".into()));
        }
        if self.input_dim == 0 || self.output_dim != 1 || self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid architecture {self:?}")));
        }
        Ok(())
    }

    /// Widths from input to output.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim];
        sizes.extend(&self.hidden_sizes);
        sizes.push(self.output_dim);
        sizes
    }

    pub fn depth(&self) -> usize {
        self.hidden_sizes.len()
    }

    /// Number of weights and biases actually held by the model.
    pub fn parameter_count(&self) -> usize {
        self.layer_sizes().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Parameter count as tallied in the literature this model follows:
    /// `(in + 1)·N₁ + N₁ + Σ (N_{l−1}·N_l + N_l) + N_L + 1`, which for width
    /// `N` everywhere is `7N + N + (L−1)(N² + N) + N + 1`. It counts the first
    /// hidden biases twice, so it exceeds [`parameter_count`] by `N₁`.
    ///
    /// [`parameter_count`]: Architecture::parameter_count
    pub fn reported_parameter_count(&self) -> usize {
        let h = &self.hidden_sizes;
        let first = (self.input_dim + 1) * h[0] + h[0];
        let middle: usize = h.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        first + middle + h[h.len() - 1] + 1
    }

    /// Connection count with first-layer biases and no deeper ones:
    /// `(in + 1)·N₁ + Σ N_{l−1}·N_l + N_L`.
    pub fn connection_count(&self) -> usize {
        let h = &self.hidden_sizes;
        let middle: usize = h.windows(2).map(|w| w[0] * w[1]).sum();
        (self.input_dim + 1) * h[0] + middle + h[h.len() - 1] * self.output_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `N_l × N_{l−1}`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    /// 1 keeps a weight, 0 prunes it.
    pub mask: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub arch: Architecture,
    pub layers: Vec<Layer>,
    /// Drop probability of hidden units.
    pub dropout_p: f64,
    /// Drop probability of input features.
    pub dropout_input_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Sample Bernoulli dropout masks.
    Train,
    /// Scale by the keep probabilities instead.
    Infer,
}

/// He-normal weights, zero biases, nothing pruned, no dropout.
pub fn init(arch: &Architecture, seed: u64) -> Result<MlpModel> {
    arch.validate()?;
    let mut rng = seed::rng(seed);
    let layers = arch
        .layer_sizes()
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            Layer {
                weights: Array2::from_shape_simple_fn((fan_out, fan_in), || normal.sample(&mut rng)),
                biases: Array1::zeros(fan_out),
                mask: Array2::ones((fan_out, fan_in)),
            }
        })
        .collect();
    Ok(MlpModel {
        arch: arch.clone(),
        layers,
        dropout_p: 0.0,
        dropout_input_p: 0.0,
    })
}

impl MlpModel {
    /// Fraction of pruned weights over all layers.
    pub fn sparsity(&self) -> f64 {
        let total: usize = self.layers.iter().map(|l| l.mask.len()).sum();
        let pruned: usize = self
            .layers
            .iter()
            .map(|l| l.mask.iter().filter(|&&m| m == 0.0).count())
            .sum();
        pruned as f64 / total as f64
    }

    /// Infer-mode outputs for each row of `x`.
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let keep = Keep::Infer {
            hidden: 1.0 - self.dropout_p,
            input: 1.0 - self.dropout_input_p,
        };
        self.run(x, &keep).output()
    }

    pub fn predict_rows(&self, rows: &[FeatureRow]) -> Vec<f64> {
        self.predict(features_matrix(rows).view()).to_vec()
    }

    fn run(&self, x: ArrayView2<f64>, keep: &Keep) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        keep.apply(&mut a, 0);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.weights.t()) + &layer.biases;
            inputs.push(a);
            if l == last {
                a = z.clone();
            } else {
                a = z.mapv(relu);
                keep.apply(&mut a, l + 1);
            }
            pre.push(z);
        }
        Trace { inputs, pre, out: a }
    }
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

/// How activations are kept: per-unit 0/1 masks, or a constant factor.
enum Keep {
    Infer { hidden: f64, input: f64 },
    /// Index 0 is the input mask, then one mask per hidden layer.
    Sampled(Vec<Array2<f64>>),
}

impl Keep {
    fn sample<R: Rng>(model: &MlpModel, rows: usize, rng: &mut R) -> Keep {
        let sizes = model.arch.layer_sizes();
        let masks = sizes[..sizes.len() - 1]
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let p = if i == 0 { model.dropout_input_p } else { model.dropout_p };
                if p == 0.0 {
                    Array2::ones((rows, n))
                } else {
                    Array2::from_shape_simple_fn((rows, n), || if rng.random::<f64>() < p { 0.0 } else { 1.0 })
                }
            })
            .collect();
        Keep::Sampled(masks)
    }

    /// Applies the keep rule to activations `a` entering layer `index`.
    fn apply(&self, a: &mut Array2<f64>, index: usize) {
        match self {
            Keep::Infer { hidden, input } => {
                let f = if index == 0 { *input } else { *hidden };
                if f != 1.0 {
                    *a *= f;
                }
            }
            Keep::Sampled(masks) => *a *= &masks[index],
        }
    }
}

struct Trace {
    /// Input to each layer, after dropout.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Array2<f64>>,
    out: Array2<f64>,
}

impl Trace {
    fn output(self) -> Array1<f64> {
        self.out.index_axis_move(Axis(1), 0)
    }
}

/// Output for a single input vector. The generator is drawn from only in
/// train mode.
pub fn forward<R: Rng>(model: &MlpModel, x: &[f64], mode: Mode, rng: &mut R) -> f64 {
    let x = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
    match mode {
        Mode::Infer => model.predict(x)[0],
        Mode::Train => {
            let keep = Keep::sample(model, 1, rng);
            model.run(x, &keep).output()[0]
        }
    }
}

/// `‖outputs − targets‖² / (2N)`.
pub fn loss(outputs: &[f64], targets: &[f64]) -> Result<f64> {
    if outputs.len() != targets.len() || outputs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "loss needs equal nonempty lengths, got {} and {}",
            outputs.len(),
            targets.len()
        )));
    }
    let sse: f64 = outputs.iter().zip(targets).map(|(y, t)| (y - t) * (y - t)).sum();
    Ok(sse / (2.0 * outputs.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            weights: model.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: model.layers.iter().map(|l| Array1::zeros(l.biases.len())).collect(),
        }
    }
}

/// Exact gradient of the infer-mode loss over the batch `(x, targets)`.
pub fn gradients(model: &MlpModel, x: ArrayView2<f64>, targets: &[f64]) -> Result<Gradients> {
    let keep = Keep::Infer {
        hidden: 1.0 - model.dropout_p,
        input: 1.0 - model.dropout_input_p,
    };
    backprop(model, x, targets, &keep).map(|(_, g)| g)
}

/// Loss and gradient under the given keep rule.
fn backprop(model: &MlpModel, x: ArrayView2<f64>, targets: &[f64], keep: &Keep) -> Result<(f64, Gradients)> {
    let rows = x.nrows();
    if rows == 0 || rows != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "batch of {rows} rows with {} targets",
            targets.len()
        )));
    }
    let trace = model.run(x, keep);
    let out = trace.out.column(0);
    let j = loss(out.as_slice().expect("contiguous column"), targets)?;

    let mut delta = Array2::from_shape_fn((rows, 1), |(i, _)| (out[i] - targets[i]) / rows as f64);
    let mut grads = Gradients::zeros_like(model);
    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        grads.weights[l] = delta.t().dot(&trace.inputs[l]) * &layer.mask;
        grads.biases[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut back = delta.dot(&layer.weights);
            keep.apply(&mut back, l);
            back.zip_mut_with(&trace.pre[l - 1], |d, &z| {
                if z <= 0.0 {
                    *d = 0.0
                }
            });
            delta = back;
        }
    }
    Ok((j, grads))
}

/// Rows of `x` in feature order.
pub fn features_matrix(rows: &[FeatureRow]) -> Array2<f64> {
    let mut x = Array2::zeros((rows.len(), 6));
    for (mut row, r) in x.rows_mut().into_iter().zip(rows) {
        row.assign(&Array1::from(r.features().to_vec()));
    }
    x
}

pub fn targets(rows: &[FeatureRow]) -> Vec<f64> {
    rows.iter().map(|r| r.label_c).collect()
}
