//! Seeded random search over architecture and training settings, and the
//! side-by-side comparison of model variants.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann::{
    init, loss, size_matched_depth, train, Architecture, MlpModel, PruningSchedule, TrainConfig, TrainHistory,
};
use crate::dataset::{FeatureRow, SplitDataset};
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_TRIAL_EPOCHS: usize = 200;
pub const DEFAULT_COMPARE_EPOCHS: usize = 500;
pub const RESULTS_HEADER: [&str; 10] = ["trial", "L", "N1", "N2", "N3", "eta", "p", "t0", "min_val_loss", "best_epoch"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Hidden-layer counts, each in 1..=3.
    pub l_choices: Vec<usize>,
    /// Inclusive width interval.
    pub n_range: (usize, usize),
    /// Draw one width per layer instead of one shared width.
    pub per_layer_width: bool,
    pub eta_choices: Vec<f64>,
    /// Final sparsity interval; no pruning when absent.
    pub p_range: Option<(f64, f64)>,
    /// Inclusive pruning start interval; used with `p_range`.
    pub t0_range: Option<(usize, usize)>,
}

impl SearchSpace {
    /// `L ∈ {2, 3}`, `N ∈ [250, 500]`, `η = 10⁻³`.
    pub fn dense_default() -> Self {
        SearchSpace {
            l_choices: vec![2, 3],
            n_range: (250, 500),
            per_layer_width: false,
            eta_choices: vec![1e-3],
            p_range: None,
            t0_range: None,
        }
    }

    /// `L = 3`, `N = 385`, `η = 10⁻³`, `p ∈ [0.5, 0.7]`, `t0 ∈ [75, 125]`.
    pub fn pruning_default() -> Self {
        SearchSpace {
            l_choices: vec![3],
            n_range: (385, 385),
            per_layer_width: false,
            eta_choices: vec![1e-3],
            p_range: Some((0.5, 0.7)),
            t0_range: Some((75, 125)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("search space: {m}")));
        if self.l_choices.is_empty() || self.l_choices.iter().any(|&l| !(1..=3).contains(&l)) {
            return bad("L choices must be nonempty and within 1..=3");
        }
        let (lo, hi) = self.n_range;
        if lo < 1 || lo > hi || hi > 2048 {
            return bad("N range must satisfy 1 <= lo <= hi <= 2048");
        }
        if self.eta_choices.is_empty() || self.eta_choices.iter().any(|&e| !(e > 0.0)) {
            return bad("eta choices must be nonempty and positive");
        }
        match (self.p_range, self.t0_range) {
            (None, None) => {}
            (Some((a, b)), Some((c, d))) => {
                if !(0.0 <= a && a <= b && b < 1.0) || c > d {
                    return bad("pruning ranges must be ordered, with p in [0, 1)");
                }
            }
            _ => return bad("p range and t0 range go together"),
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (Architecture, f64, Option<PruningSchedule>) {
        let l = *self.l_choices.choose(rng).expect("nonempty");
        let (lo, hi) = self.n_range;
        let widths = if self.per_layer_width {
            (0..l).map(|_| rng.random_range(lo..=hi)).collect()
        } else {
            vec![rng.random_range(lo..=hi); l]
        };
        let eta = *self.eta_choices.choose(rng).expect("nonempty");
        let pruning = self.p_range.zip(self.t0_range).map(|((a, b), (c, d))| {
            let p = if a == b { a } else { rng.random_range(a..=b) };
            PruningSchedule::to(p, rng.random_range(c..=d))
        });
        (Architecture::new(widths).expect("validated space"), eta, pruning)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub arch: Architecture,
    pub config: TrainConfig,
    /// Seed the model weights were initialised from.
    pub init_seed: u64,
    /// Infinite when training diverged.
    pub min_val_loss: f64,
    /// 1-based; 0 when training diverged.
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// In trial order.
    pub trials: Vec<TrialResult>,
    /// Index of the trial with the smallest `min_val_loss`.
    pub best: usize,
}

impl SearchResult {
    pub fn best_trial(&self) -> &TrialResult {
        &self.trials[self.best]
    }
}

/// Trains `budget` independently sampled configurations for `epochs` epochs
/// each. Trial `k` draws from its own seed, so results do not depend on the
/// order trials run in.
pub fn random_search(
    space: &SearchSpace,
    budget: usize,
    epochs: usize,
    data: &SplitDataset,
    seed: u64,
) -> Result<SearchResult> {
    space.validate()?;
    if budget == 0 || epochs == 0 {
        return Err(Error::InvalidArgument("budget and epochs must be at least 1".into()));
    }
    let trials: Vec<TrialResult> = (0..budget)
        .into_par_iter()
        .map(|k| {
            let trial_seed = seed::stage_seed(seed, &format!("trial-{k}"));
            let mut rng = seed::rng(trial_seed);
            let (arch, eta, pruning) = space.sample(&mut rng);
            let mut config = TrainConfig::new(eta, epochs, seed::stage_seed(trial_seed, "train"));
            config.pruning = pruning;
            let init_seed = seed::stage_seed(trial_seed, "init");
            let (min_val_loss, best_epoch) = init(&arch, init_seed)
                .and_then(|m| train(m, data, &config))
                .ok()
                .and_then(|(_, h)| h.min_val_loss())
                .filter(|(v, _)| v.is_finite())
                .unwrap_or((f64::INFINITY, 0));
            TrialResult {
                trial: k,
                arch,
                config,
                init_seed,
                min_val_loss,
                best_epoch,
            }
        })
        .collect();
    let best = trials
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.min_val_loss.total_cmp(&b.1.min_val_loss).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("budget >= 1");
    Ok(SearchResult { trials, best })
}

#[derive(Serialize, Deserialize)]
struct ResultRow {
    trial: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "N1")]
    n1: usize,
    #[serde(rename = "N2")]
    n2: Option<usize>,
    #[serde(rename = "N3")]
    n3: Option<usize>,
    eta: f64,
    p: Option<f64>,
    t0: Option<usize>,
    min_val_loss: f64,
    best_epoch: usize,
}

pub fn write_results(trials: &[TrialResult], path: &Path) -> Result<()> {
    let rows: Vec<ResultRow> = trials
        .iter()
        .map(|t| {
            let h = &t.arch.hidden_sizes;
            ResultRow {
                trial: t.trial,
                l: h.len(),
                n1: h[0],
                n2: h.get(1).copied(),
                n3: h.get(2).copied(),
                eta: t.config.eta,
                p: t.config.pruning.map(|s| s.s_f),
                t0: t.config.pruning.map(|s| s.t0),
                min_val_loss: t.min_val_loss,
                best_epoch: t.best_epoch,
            }
        })
        .collect();
    crate::csvio::write_rows(path, &RESULTS_HEADER, &rows)
}

/// One model in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub arch: Architecture,
    pub config: TrainConfig,
}

/// The five models of the reference comparison, each trained for `epochs`
/// epochs from `seed`.
pub fn paper_variants(epochs: usize, seed: u64) -> Result<Vec<Variant>> {
    let n = 385;
    let variant = |name: &str, arch: Architecture, eta: f64| Variant {
        name: name.to_string(),
        arch,
        config: TrainConfig::new(eta, epochs, seed::stage_seed(seed, name)),
    };
    let pruned = PruningSchedule::to(0.67, 78);
    let deep = size_matched_depth(n, 3, pruned.s_f)?;
    let mut dropout = variant("dropout_30", Architecture::homogeneous(n, 3)?, 1e-4);
    dropout.config = dropout.config.with_dropout(0.3);
    let mut deep_sparse = variant("deep_sparse", Architecture::homogeneous(n, deep)?, 1e-3);
    deep_sparse.config.pruning = Some(pruned);
    let mut pruned_67 = variant("pruned_67", Architecture::homogeneous(n, 3)?, 1e-3);
    pruned_67.config.pruning = Some(pruned);
    Ok(vec![
        variant("full", Architecture::homogeneous(n, 3)?, 1e-4),
        dropout,
        variant("non_homogeneous", Architecture::new(vec![326, 324, 70])?, 1e-4),
        deep_sparse,
        pruned_67,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub min_val_loss: f64,
    pub best_epoch: usize,
    pub test_loss: f64,
    pub final_sparsity: f64,
    pub train_seconds: f64,
    pub test_seconds: f64,
    /// `ok` or the training error.
    pub status: String,
}

/// A trained comparison entry. `model` and `history` are absent for failed rows.
#[derive(Debug, Clone)]
pub struct Trained {
    pub row: ComparisonRow,
    pub model: Option<MlpModel>,
    pub history: Option<TrainHistory>,
}

/// Trains every variant on `data` and scores it on `test`. A failing variant
/// yields a row marked failed instead of aborting the comparison.
pub fn compare_models(variants: &[Variant], data: &SplitDataset, test: &[FeatureRow], init_seed: u64) -> Result<Vec<Trained>> {
    if variants.is_empty() {
        return Err(Error::InvalidArgument("nothing to compare".into()));
    }
    if test.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let test_targets: Vec<f64> = test.iter().map(|r| r.label_c).collect();
    Ok(variants
        .iter()
        .map(|v| {
            let start = Instant::now();
            let trained = init(&v.arch, seed::stage_seed(init_seed, &v.name)).and_then(|m| train(m, data, &v.config));
            let train_seconds = start.elapsed().as_secs_f64();
            match trained {
                Ok((model, history)) => {
                    let start = Instant::now();
                    let predictions = model.predict_rows(test);
                    let test_seconds = start.elapsed().as_secs_f64();
                    let (min_val_loss, best_epoch) = history.min_val_loss().unwrap_or((f64::NAN, 0));
                    Trained {
                        row: ComparisonRow {
                            model: v.name.clone(),
                            min_val_loss,
                            best_epoch,
                            test_loss: loss(&predictions, &test_targets).expect("equal lengths"),
                            final_sparsity: model.sparsity(),
                            train_seconds,
                            test_seconds,
                            status: "ok".into(),
                        },
                        model: Some(model),
                        history: Some(history),
                    }
                }
                Err(e) => Trained {
                    row: ComparisonRow {
                        model: v.name.clone(),
                        min_val_loss: f64::NAN,
                        best_epoch: 0,
                        test_loss: f64::NAN,
                        final_sparsity: f64::NAN,
                        train_seconds,
                        test_seconds: 0.0,
                        status: format!("failed: {e}"),
                    },
                    model: None,
                    history: None,
                },
            }
        })
        .collect())
}

pub const COMPARISON_HEADER: &str = "model,min_val_loss,best_epoch,test_loss,final_sparsity,status";
pub const TIMING_HEADER: &str = "model,train_seconds,test_seconds";

/// Writes the scores to `path` and the wall-clock timings to `timing_path`,
/// keeping the score file reproducible.
pub fn write_comparison(rows: &[ComparisonRow], path: &Path, timing_path: &Path) -> Result<()> {
    let mut scores = format!("{COMPARISON_HEADER}\n");
    let mut timing = format!("{TIMING_HEADER}\n");
    for r in rows {
        let status = r.status.replace([',', '\n'], ";");
        writeln!(
            scores,
            "{},{:e},{},{:e},{},{}",
            r.model, r.min_val_loss, r.best_epoch, r.test_loss, r.final_sparsity, status
        )
        .unwrap();
        writeln!(timing, "{},{:.6},{:.6}", r.model, r.train_seconds, r.test_seconds).unwrap();
    }
    fs::write(path, scores)?;
    fs::write(timing_path, timing)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize, offset: usize) -> Vec<FeatureRow> {
        (0..n)
            .map(|i| {
                let u = (i + offset) as f64 / n as f64;
                FeatureRow {
                    polygon_id: i + offset,
                    ic: 0.02 + 0.01 * u,
                    cc: 0.05 + 0.03 * u,
                    apr: 0.6 + 0.1 * (5.0 * u).sin(),
                    er: 0.7 - 0.2 * u,
                    mx: 1.0 + u,
                    iso: 0.8 + 0.1 * u * u,
                    label_c: 0.02 + 0.015 * u,
                }
            })
            .collect()
    }

    fn data() -> SplitDataset {
        SplitDataset {
            train: rows(14, 0),
            validation: rows(6, 14),
            split_seed: 0,
        }
    }

    fn small_space() -> SearchSpace {
        SearchSpace {
            l_choices: vec![1, 2],
            n_range: (4, 12),
            per_layer_width: true,
            eta_choices: vec![1e-3, 1e-2],
            p_range: Some((0.1, 0.3)),
            t0_range: Some((2, 5)),
        }
    }

    #[test]
    fn singleton_space_returns_its_config() {
        let space = SearchSpace {
            l_choices: vec![2],
            n_range: (8, 8),
            per_layer_width: false,
            eta_choices: vec![1e-3],
            p_range: None,
            t0_range: None,
        };
        let r = random_search(&space, 1, 20, &data(), 3).unwrap();
        assert_eq!(r.trials.len(), 1);
        let t = r.best_trial();
        assert_eq!(t.arch.hidden_sizes, vec![8, 8]);
        assert_eq!(t.config.eta, 1e-3);
        assert!(t.config.pruning.is_none());
        assert!(t.min_val_loss.is_finite() && (1..=20).contains(&t.best_epoch));
    }

    #[test]
    fn search_is_deterministic_and_best_is_minimal() {
        let a = random_search(&small_space(), 6, 15, &data(), 11).unwrap();
        let b = random_search(&small_space(), 6, 15, &data(), 11).unwrap();
        assert_eq!(a, b);
        assert!(a.trials.iter().all(|t| t.min_val_loss >= a.best_trial().min_val_loss));
        assert!(a.trials.iter().enumerate().all(|(i, t)| t.trial == i));
        let c = random_search(&small_space(), 6, 15, &data(), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn best_trial_retrains_to_its_recorded_loss() {
        let r = random_search(&small_space(), 3, 15, &data(), 5).unwrap();
        let t = r.best_trial();
        let (_, h) = train(init(&t.arch, t.init_seed).unwrap(), &data(), &t.config).unwrap();
        assert_eq!(h.min_val_loss().unwrap(), (t.min_val_loss, t.best_epoch));
    }

    #[test]
    fn divergent_trials_do_not_abort() {
        let space = SearchSpace {
            eta_choices: vec![1e300],
            ..small_space()
        };
        let r = random_search(&space, 2, 10, &data(), 1).unwrap();
        assert_eq!(r.trials.len(), 2);
        assert!(r.trials.iter().all(|t| t.min_val_loss == f64::INFINITY && t.best_epoch == 0));
    }

    #[test]
    fn space_validation() {
        let mut s = small_space();
        s.l_choices = vec![4];
        assert!(s.validate().is_err());
        let mut s = small_space();
        s.n_range = (10, 5);
        assert!(s.validate().is_err());
        let mut s = small_space();
        s.t0_range = None;
        assert!(s.validate().is_err());
        assert!(SearchSpace::dense_default().validate().is_ok());
        assert!(SearchSpace::pruning_default().validate().is_ok());
        assert!(random_search(&small_space(), 0, 5, &data(), 0).is_err());
    }

    #[test]
    fn results_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let r = random_search(&small_space(), 2, 5, &data(), 2).unwrap();
        write_results(&r.trials, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("trial,L,N1,N2,N3,eta,p,t0,min_val_loss,best_epoch"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn reference_variants() {
        let v = paper_variants(500, 1).unwrap();
        let names: Vec<&str> = v.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["full", "dropout_30", "non_homogeneous", "deep_sparse", "pruned_67"]);
        assert_eq!(v[3].arch.depth(), 7);
        assert_eq!(v[1].config.dropout_input_p, 0.075);
        assert_eq!(v[4].config.pruning.unwrap().t0, 78);
    }

    #[test]
    fn comparison_marks_failures() {
        let v = vec![
            Variant {
                name: "small".into(),
                arch: Architecture::new(vec![6]).unwrap(),
                config: TrainConfig::new(1e-3, 10, 0),
            },
            Variant {
                name: "broken".into(),
                arch: Architecture::new(vec![6]).unwrap(),
                config: TrainConfig::new(-1.0, 10, 0),
            },
        ];
        let out = compare_models(&v, &data(), &rows(5, 40), 0).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].row.status, "ok");
        assert!(out[0].row.test_loss.is_finite());
        assert!(out[1].row.status.starts_with("failed"));
        assert!(out[1].model.is_none());

        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("c.csv"), dir.path().join("t.csv"));
        let rows: Vec<_> = out.into_iter().map(|t| t.row).collect();
        write_comparison(&rows, &a, &b).unwrap();
        let text = fs::read_to_string(&a).unwrap();
        assert!(text.starts_with(COMPARISON_HEADER));
        assert_eq!(text.lines().count(), 3);
    }
}
