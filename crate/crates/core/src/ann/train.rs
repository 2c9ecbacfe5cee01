use std::path::Path;

use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::{backprop, features_matrix, loss, targets, Gradients, Keep, MlpModel};
use crate::dataset::SplitDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Sparsity ramp `s_t = s_f + (s0 − s_f)(1 − (t − t0)/(n_pr·Δt))`, applied
/// every `delta_t` epochs from `t0` through `t0 + n_pr·delta_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruningSchedule {
    pub s0: f64,
    pub s_f: f64,
    pub t0: usize,
    pub delta_t: usize,
    pub n_pr: usize,
}

impl PruningSchedule {
    /// Ramp from 0 to `s_f` starting at `t0`, one step per epoch for 50 epochs.
    pub fn to(s_f: f64, t0: usize) -> Self {
        PruningSchedule {
            s0: 0.0,
            s_f,
            t0,
            delta_t: 1,
            n_pr: 50,
        }
    }

    pub fn end(&self) -> usize {
        self.t0 + self.n_pr * self.delta_t
    }

    /// Whether a pruning step happens at epoch `t`.
    pub fn fires_at(&self, t: usize) -> bool {
        t >= self.t0 && t <= self.end() && (t - self.t0).is_multiple_of(self.delta_t)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0 <= self.s0 && self.s0 <= self.s_f && self.s_f < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pruning needs 0 <= s0 <= s_f < 1, got s0={} s_f={}",
                self.s0, self.s_f
            )));
        }
        if self.delta_t == 0 || self.n_pr == 0 {
            return Err(Error::InvalidArgument("pruning needs delta_t >= 1 and n_pr >= 1".into()));
        }
        Ok(())
    }
}

/// Target sparsity at epoch `t`, clamped to the ramp's endpoints.
pub fn sparsity_at(t: usize, s: &PruningSchedule) -> f64 {
    let span = (s.n_pr * s.delta_t) as f64;
    let progress = ((t as f64 - s.t0 as f64) / span).clamp(0.0, 1.0);
    if progress == 0.0 {
        return s.s0;
    }
    if progress == 1.0 {
        return s.s_f;
    }
    s.s_f + (s.s0 - s.s_f) * (1.0 - progress)
}

/// Masks the `⌈s·count⌉` smallest-magnitude weights of every layer.
/// Already-masked weights count first, so masks only grow.
pub fn prune_step(model: &mut MlpModel, target_sparsity: f64) -> Result<()> {
    if !(0.0..1.0).contains(&target_sparsity) {
        return Err(Error::InvalidArgument(format!(
            "target sparsity must lie in [0, 1), got {target_sparsity}"
        )));
    }
    for layer in &mut model.layers {
        let count = layer.weights.len();
        // the small offset keeps products like 0.3·10 from rounding up to 4
        let k = ((target_sparsity * count as f64) - 1e-9).ceil().max(0.0) as usize;
        let w = layer.weights.as_slice().expect("standard layout");
        let m = layer.mask.as_slice().expect("standard layout");
        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by(|&a, &b| (m[a] != 0.0, w[a].abs()).partial_cmp(&(m[b] != 0.0, w[b].abs())).unwrap());
        let w = layer.weights.as_slice_mut().expect("standard layout");
        let m = layer.mask.as_slice_mut().expect("standard layout");
        for &i in &order[..k] {
            m[i] = 0.0;
            w[i] = 0.0;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub epochs: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub pruning: Option<PruningSchedule>,
    pub dropout_p: f64,
    pub dropout_input_p: f64,
}

impl TrainConfig {
    pub fn new(eta: f64, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            eta,
            epochs,
            seed,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            pruning: None,
            dropout_p: 0.0,
            dropout_input_p: 0.0,
        }
    }

    /// Hidden dropout `p`, input dropout `p/4`.
    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_p = p;
        self.dropout_input_p = p / 4.0;
        self
    }

    pub fn with_pruning(mut self, schedule: PruningSchedule) -> Self {
        self.pruning = Some(schedule);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {}", self.eta)));
        }
        for p in [self.dropout_p, self.dropout_input_p] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("dropout must lie in [0, 1), got {p}")));
            }
        }
        if let Some(s) = &self.pruning {
            s.validate()?;
        }
        Ok(())
    }
}

/// First and second moment estimates of Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        AdamState {
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
        }
    }
}

/// One bias-corrected Adam update; `step` counts from 1. Pruned weights
/// stay zero.
pub fn adam_step(model: &mut MlpModel, grads: &Gradients, state: &mut AdamState, step: usize, config: &TrainConfig) {
    assert!(step >= 1, "Adam steps count from 1");
    let (b1, b2, eps, eta) = (config.adam_beta1, config.adam_beta2, config.adam_eps, config.eta);
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= eta * (*m / c1) / ((*v / c2).sqrt() + eps);
    };
    for (l, layer) in model.layers.iter_mut().enumerate() {
        Zip::from(&mut layer.weights)
            .and(&grads.weights[l])
            .and(&mut state.m.weights[l])
            .and(&mut state.v.weights[l])
            .for_each(update);
        layer.weights *= &layer.mask;
        Zip::from(&mut layer.biases)
            .and(&grads.biases[l])
            .and(&mut state.m.biases[l])
            .and(&mut state.v.biases[l])
            .for_each(update);
    }
}

pub const HISTORY_HEADER: [&str; 4] = ["epoch", "train_loss", "val_loss", "sparsity"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub sparsity: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HistoryRow {
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
    sparsity: f64,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.val_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.val_loss.is_empty()
    }

    /// Smallest validation loss and its 1-based epoch; the earliest wins ties.
    pub fn min_val_loss(&self) -> Option<(f64, usize)> {
        self.val_loss
            .iter()
            .enumerate()
            .fold(None, |best: Option<(f64, usize)>, (i, &v)| match best {
                Some((b, _)) if b <= v => best,
                _ => Some((v, i + 1)),
            })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<HistoryRow> = (0..self.len())
            .map(|i| HistoryRow {
                epoch: i + 1,
                train_loss: self.train_loss[i],
                val_loss: self.val_loss[i],
                sparsity: self.sparsity[i],
            })
            .collect();
        crate::csvio::write_rows(path, &HISTORY_HEADER, &rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let rows: Vec<HistoryRow> = crate::csvio::read_rows(path, &HISTORY_HEADER)?;
        let mut h = TrainHistory::default();
        for (i, r) in rows.into_iter().enumerate() {
            if r.epoch != i + 1 {
                return Err(Error::parse(path, i + 2, format!("expected epoch {}, found {}", i + 1, r.epoch)));
            }
            h.train_loss.push(r.train_loss);
            h.val_loss.push(r.val_loss);
            h.sparsity.push(r.sparsity);
        }
        Ok(h)
    }
}

/// Full-batch Adam, one step per epoch.
///
/// Each epoch runs a train-mode pass for the loss and gradient, takes the
/// Adam step, prunes when the schedule fires, then records the infer-mode
/// validation loss and the achieved sparsity.
pub fn train(mut model: MlpModel, data: &SplitDataset, config: &TrainConfig) -> Result<(MlpModel, TrainHistory)> {
    config.validate()?;
    if data.train.is_empty() || data.validation.is_empty() {
        return Err(Error::InvalidArgument("training needs nonempty train and validation sets".into()));
    }
    model.dropout_p = config.dropout_p;
    model.dropout_input_p = config.dropout_input_p;
    let (xt, yt) = (features_matrix(&data.train), targets(&data.train));
    let (xv, yv) = (features_matrix(&data.validation), targets(&data.validation));
    let mut rng = seed::rng(config.seed);
    let mut adam = AdamState::new(&model);
    let mut history = TrainHistory::default();

    for t in 1..=config.epochs {
        let keep = Keep::sample(&model, xt.nrows(), &mut rng);
        let (j, grads) = backprop(&model, xt.view(), &yt, &keep)?;
        if !j.is_finite() {
            return Err(Error::Divergence { epoch: t, loss: j });
        }
        adam_step(&mut model, &grads, &mut adam, t, config);
        if let Some(s) = config.pruning.as_ref().filter(|s| s.fires_at(t)) {
            prune_step(&mut model, sparsity_at(t, s))?;
        }
        let jv = loss(model.predict(xv.view()).as_slice().expect("contiguous"), &yv)?;
        if !jv.is_finite() {
            return Err(Error::Divergence { epoch: t, loss: jv });
        }
        history.train_loss.push(j);
        history.val_loss.push(jv);
        history.sparsity.push(model.sparsity());
    }
    Ok((model, history))
}

/// Depth of a width-`n` network whose weight count matches a dense
/// `(n, l)` network pruned to sparsity `s_f`:
/// `7Ñ + (L̃−1)Ñ² + Ñ = (7N + (L−1)N² + N)/(1 − s_f)` with `Ñ = N`, solved
/// for `L̃` and rounded to the nearest integer (at least 1).
pub fn size_matched_depth(n: usize, l: usize, s_f: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&s_f) || n == 0 || l == 0 {
        return Err(Error::InvalidArgument(format!(
            "size matching needs n, l >= 1 and s_f in [0, 1), got n={n} l={l} s_f={s_f}"
        )));
    }
    let n = n as f64;
    let dense = 7.0 * n + (l as f64 - 1.0) * n * n + n;
    let extra = (dense / (1.0 - s_f) - 8.0 * n) / (n * n);
    Ok(1 + extra.round().max(0.0) as usize)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::ann::{init, Architecture};
    use crate::dataset::FeatureRow;

    fn toy(n: usize, offset: usize) -> Vec<FeatureRow> {
        (0..n)
            .map(|i| {
                let u = (i + offset) as f64 / 10.0;
                FeatureRow {
                    polygon_id: i + offset,
                    ic: 0.1 + 0.3 * u,
                    cc: 0.2 + 0.1 * u * u,
                    apr: 0.5 - 0.2 * u,
                    er: (3.0 * u).sin().abs(),
                    mx: 1.0 + u,
                    iso: 0.9 - 0.05 * u,
                    label_c: 0.05 + 0.02 * (2.0 * u).cos(),
                }
            })
            .collect()
    }

    fn split_of(train: usize, val: usize) -> SplitDataset {
        SplitDataset {
            train: toy(train, 0),
            validation: toy(val, train),
            split_seed: 0,
        }
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let s = PruningSchedule::to(0.67, 78);
        assert_eq!(sparsity_at(78, &s), 0.0);
        assert_eq!(sparsity_at(128, &s), 0.67);
        assert_relative_eq!(sparsity_at(103, &s), 0.335, epsilon = 1e-15);
        assert_eq!(sparsity_at(10, &s), 0.0);
        assert_eq!(sparsity_at(1000, &s), 0.67);
        let stepped = PruningSchedule { delta_t: 5, n_pr: 4, ..s };
        assert!(stepped.fires_at(78) && stepped.fires_at(83) && stepped.fires_at(98));
        assert!(!stepped.fires_at(79) && !stepped.fires_at(103) && !stepped.fires_at(77));
    }

    #[test]
    fn size_matching() {
        assert_eq!(size_matched_depth(385, 3, 0.67).unwrap(), 7);
        assert_eq!(size_matched_depth(385, 3, 0.0).unwrap(), 3);
        assert_eq!(size_matched_depth(385, 3, 0.5).unwrap(), 5);
        assert!(size_matched_depth(385, 3, 1.0).is_err());
    }

    #[test]
    fn prune_ten_entries_by_half() {
        let mut m = init(&Architecture::new(vec![10]).unwrap(), 0).unwrap();
        let mags = [0.9, -0.1, 0.5, 0.05, -0.7, 0.3, 0.2, -0.8, 0.6, 0.4];
        for (w, &v) in m.layers[1].weights.iter_mut().zip(&mags) {
            *w = v;
        }
        prune_step(&mut m, 0.5).unwrap();
        let out = &m.layers[1];
        let zeros: Vec<usize> = (0..10).filter(|&i| out.mask[(0, i)] == 0.0).collect();
        assert_eq!(zeros, vec![1, 3, 5, 6, 9]);
        assert!(zeros.iter().all(|&i| out.weights[(0, i)] == 0.0));
        // 60 first-layer weights: exactly 30 masked
        assert_eq!(m.layers[0].mask.iter().filter(|&&v| v == 0.0).count(), 30);
    }

    #[test]
    fn prune_zero_changes_nothing_and_masks_only_grow() {
        let mut m = init(&Architecture::new(vec![7, 5]).unwrap(), 4).unwrap();
        let before = m.clone();
        prune_step(&mut m, 0.0).unwrap();
        assert_eq!(m, before);
        prune_step(&mut m, 0.3).unwrap();
        let first = m.clone();
        // weights regrow in magnitude elsewhere, old masks must survive
        for l in &mut m.layers {
            l.weights.mapv_inplace(|w| w * 1e-3);
        }
        prune_step(&mut m, 0.4).unwrap();
        for (a, b) in first.layers.iter().zip(&m.layers) {
            assert!(a.mask.iter().zip(&b.mask).all(|(x, y)| *x == 1.0 || *y == 0.0));
            let frac = b.mask.iter().filter(|&&v| v == 0.0).count() as f64 / b.mask.len() as f64;
            assert!(frac >= 0.4 - 1e-12 && frac < 0.4 + 1.0 / b.mask.len() as f64);
        }
        assert!(prune_step(&mut m, 1.0).is_err());
    }

    #[test]
    fn adam_first_step_moves_by_eta() {
        let mut m = init(&Architecture::new(vec![2]).unwrap(), 0).unwrap();
        let before = m.clone();
        let mut g = Gradients::zeros_like(&m);
        let mut state = AdamState::new(&m);
        let cfg = TrainConfig::new(1e-3, 1, 0);
        adam_step(&mut m, &g, &mut state, 1, &cfg);
        assert_eq!(m, before);

        g.biases[1][0] = 1.0;
        let mut fresh = AdamState::new(&m);
        adam_step(&mut m, &g, &mut fresh, 1, &cfg);
        // m̂ = 1, v̂ = 1: step is η/(1 + ε)
        assert_relative_eq!(before.layers[1].biases[0] - m.layers[1].biases[0], 1e-3 / (1.0 + 1e-8), max_relative = 1e-12);
    }

    #[test]
    fn adam_keeps_masked_weights_at_zero() {
        let mut m = init(&Architecture::new(vec![3]).unwrap(), 0).unwrap();
        m.layers[0].mask[(0, 0)] = 0.0;
        m.layers[0].weights[(0, 0)] = 0.0;
        let mut g = Gradients::zeros_like(&m);
        g.weights[0].fill(1.0);
        let mut state = AdamState::new(&m);
        for step in 1..5 {
            adam_step(&mut m, &g, &mut state, step, &TrainConfig::new(0.1, 1, 0));
        }
        assert_eq!(m.layers[0].weights[(0, 0)], 0.0);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let m = init(&Architecture::new(vec![4]).unwrap(), 1).unwrap();
        let (out, h) = train(m.clone(), &split_of(6, 3), &TrainConfig::new(1e-3, 0, 0)).unwrap();
        assert_eq!(out, m);
        assert!(h.is_empty() && h.min_val_loss().is_none());
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let m = init(&Architecture::new(vec![16, 16]).unwrap(), 1).unwrap();
        let cfg = TrainConfig::new(1e-3, 300, 5).with_dropout(0.1);
        let (a, ha) = train(m.clone(), &split_of(12, 4), &cfg).unwrap();
        let (b, hb) = train(m, &split_of(12, 4), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert_eq!(ha.len(), 300);
        assert!(ha.train_loss[299] < ha.train_loss[0]);
        let (v, e) = ha.min_val_loss().unwrap();
        assert_eq!(ha.val_loss[e - 1], v);
        assert!(ha.val_loss.iter().all(|&x| x >= v));
    }

    #[test]
    fn pruned_training_reaches_final_sparsity() {
        let m = init(&Architecture::new(vec![20, 20]).unwrap(), 1).unwrap();
        let cfg = TrainConfig::new(1e-3, 40, 5).with_pruning(PruningSchedule {
            s0: 0.0,
            s_f: 0.67,
            t0: 10,
            delta_t: 2,
            n_pr: 10,
        });
        let (out, h) = train(m, &split_of(8, 3), &cfg).unwrap();
        assert!(h.sparsity[..9].iter().all(|&s| s == 0.0));
        assert!(h.sparsity.windows(2).all(|w| w[1] >= w[0]));
        assert!((out.sparsity() - 0.67).abs() < 0.01);
        assert_eq!(*h.sparsity.last().unwrap(), out.sparsity());
    }

    #[test]
    fn divergence_is_reported() {
        let mut m = init(&Architecture::new(vec![4]).unwrap(), 1).unwrap();
        m.layers[1].biases[0] = f64::NAN;
        let err = train(m, &split_of(5, 2), &TrainConfig::new(1e-3, 3, 0)).unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 1, .. }));
    }

    #[test]
    fn config_validation() {
        let m = init(&Architecture::new(vec![4]).unwrap(), 1).unwrap();
        let d = split_of(5, 2);
        assert!(train(m.clone(), &d, &TrainConfig::new(0.0, 3, 0)).is_err());
        assert!(train(m.clone(), &d, &TrainConfig::new(1e-3, 3, 0).with_dropout(1.0)).is_err());
        let bad = PruningSchedule { s0: 0.5, ..PruningSchedule::to(0.3, 1) };
        assert!(train(m.clone(), &d, &TrainConfig::new(1e-3, 3, 0).with_pruning(bad)).is_err());
        let empty = SplitDataset { validation: vec![], ..d };
        assert!(train(m, &empty, &TrainConfig::new(1e-3, 3, 0)).is_err());
    }

    #[test]
    fn history_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let h = TrainHistory {
            train_loss: vec![0.5, 1.0 / 3.0],
            val_loss: vec![0.25, 1e-7],
            sparsity: vec![0.0, 0.67],
        };
        h.write_csv(&path).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("epoch,train_loss,val_loss,sparsity\n"));
        assert_eq!(TrainHistory::read_csv(&path).unwrap(), h);
    }
}
