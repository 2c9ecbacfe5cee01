//! File-based stages from point sampling to trained models.
//!
//! Every stage reads only artifacts written by earlier stages plus the
//! configuration. Stage seeds derive from the master seed through
//! [`seed::stage_seed`], so any stage can be rerun on its own.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann::{self, Architecture, MlpModel, PruningSchedule, TrainConfig, TrainHistory};
use crate::dataset::{self, FeatureRow, SplitDataset};
use crate::error::{Error, Result};
use crate::fem::{self, LabelRow};
use crate::geometry::{self, compute_metrics, io::read_polygons, io::write_polygons, Polygon, METRIC_NAMES};
use crate::seed;
use crate::tuner::{self, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; required by every stage that draws random numbers.
    pub seed: Option<u64>,
    pub n_points: usize,
    pub domain_side: f64,
    pub test_n_points: usize,
    pub test_side: f64,
    pub mesh_divisor: f64,
    pub z_threshold: f64,
    pub validation_fraction: f64,
    /// Relative artifact paths resolve against this directory.
    pub out_dir: PathBuf,
    pub paths: ArtifactPaths,
    pub train: TrainSettings,
    pub prune: PruneSettings,
    pub tune: TuneSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            n_points: 100,
            domain_side: 1.0,
            test_n_points: 65,
            test_side: 0.5,
            mesh_divisor: fem::MESH_DIVISOR,
            z_threshold: dataset::DEFAULT_Z_THRESHOLD,
            validation_fraction: dataset::DEFAULT_VALIDATION_FRACTION,
            out_dir: PathBuf::from("artifacts"),
            paths: ArtifactPaths::default(),
            train: TrainSettings::default(),
            prune: PruneSettings::default(),
            tune: TuneSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactPaths {
    pub polygons: PathBuf,
    pub test_polygons: PathBuf,
    pub labels: PathBuf,
    pub test_labels: PathBuf,
    pub label_failures: PathBuf,
    pub correlation: PathBuf,
    pub features: PathBuf,
    pub train: PathBuf,
    pub validation: PathBuf,
    pub test_features: PathBuf,
    pub model: PathBuf,
    pub history: PathBuf,
    pub summary: PathBuf,
    pub pruned_model: PathBuf,
    pub pruned_history: PathBuf,
    pub pruned_summary: PathBuf,
    pub tune_results: PathBuf,
    pub comparison: PathBuf,
    pub comparison_timing: PathBuf,
    pub plots: PathBuf,
    pub predictions: PathBuf,
}

impl Default for ArtifactPaths {
    fn default() -> Self {
        let p = PathBuf::from;
        ArtifactPaths {
            polygons: p("polygons.txt"),
            test_polygons: p("test_polygons.txt"),
            labels: p("labels.csv"),
            test_labels: p("test_labels.csv"),
            label_failures: p("label_failures.csv"),
            correlation: p("correlation.csv"),
            features: p("features.csv"),
            train: p("train.csv"),
            validation: p("validation.csv"),
            test_features: p("test_features.csv"),
            model: p("model.json"),
            history: p("history.csv"),
            summary: p("train_summary.json"),
            pruned_model: p("pruned_model.json"),
            pruned_history: p("pruned_history.csv"),
            pruned_summary: p("pruned_summary.json"),
            tune_results: p("tune_results.csv"),
            comparison: p("comparison.csv"),
            comparison_timing: p("comparison_timing.csv"),
            plots: p("plots.csv"),
            predictions: p("predictions.csv"),
        }
    }
}

impl ArtifactPaths {
    fn all(&self) -> [&PathBuf; 21] {
        [
            &self.polygons,
            &self.test_polygons,
            &self.labels,
            &self.test_labels,
            &self.label_failures,
            &self.correlation,
            &self.features,
            &self.train,
            &self.validation,
            &self.test_features,
            &self.model,
            &self.history,
            &self.summary,
            &self.pruned_model,
            &self.pruned_history,
            &self.pruned_summary,
            &self.tune_results,
            &self.comparison,
            &self.comparison_timing,
            &self.plots,
            &self.predictions,
        ]
    }
}

/// Dense model trained by the `train` stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub hidden: Vec<usize>,
    pub eta: f64,
    pub epochs: usize,
    pub dropout_p: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            hidden: vec![385; 3],
            eta: 1e-4,
            epochs: tuner::DEFAULT_COMPARE_EPOCHS,
            dropout_p: 0.0,
        }
    }
}

/// Pruned model trained by the `prune-train` stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneSettings {
    pub hidden: Vec<usize>,
    pub eta: f64,
    pub epochs: usize,
    pub s0: f64,
    pub s_f: f64,
    pub t0: usize,
    pub delta_t: usize,
    pub n_pr: usize,
}

impl Default for PruneSettings {
    fn default() -> Self {
        let s = PruningSchedule::to(0.67, 78);
        PruneSettings {
            hidden: vec![385; 3],
            eta: 1e-3,
            epochs: tuner::DEFAULT_COMPARE_EPOCHS,
            s0: s.s0,
            s_f: s.s_f,
            t0: s.t0,
            delta_t: s.delta_t,
            n_pr: s.n_pr,
        }
    }
}

impl PruneSettings {
    pub fn schedule(&self) -> PruningSchedule {
        PruningSchedule {
            s0: self.s0,
            s_f: self.s_f,
            t0: self.t0,
            delta_t: self.delta_t,
            n_pr: self.n_pr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSettings {
    pub budget: usize,
    pub epochs: usize,
    pub space: SearchSpace,
}

impl Default for TuneSettings {
    fn default() -> Self {
        TuneSettings {
            budget: 20,
            epochs: tuner::DEFAULT_TRIAL_EPOCHS,
            space: SearchSpace::dense_default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?
        } else {
            toml::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_points == 0 || self.test_n_points == 0 {
            return bad("point counts must be positive".into());
        }
        for (name, v) in [
            ("domain_side", self.domain_side),
            ("test_side", self.test_side),
            ("mesh_divisor", self.mesh_divisor),
            ("z_threshold", self.z_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let mut seen = HashMap::new();
        for p in self.paths.all() {
            let resolved = self.out_dir.join(p);
            if let Some(prev) = seen.insert(resolved.clone(), p) {
                return bad(format!("artifact paths collide: {} and {}", prev.display(), p.display()));
            }
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidArgument("a master seed is required (--seed or `seed` in the config)".into()))
    }

    /// Artifact path resolved against `out_dir`.
    pub fn path(&self, pick: impl Fn(&ArtifactPaths) -> &PathBuf) -> PathBuf {
        self.out_dir.join(pick(&self.paths))
    }

    fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateReport {
    pub cells: usize,
    pub test_cells: usize,
}

/// Samples the training and test point sets and writes their bounded
/// Voronoi cells.
pub fn generate(cfg: &PipelineConfig) -> Result<GenerateReport> {
    cfg.validate()?;
    let master = cfg.require_seed()?;
    cfg.ensure_out_dir()?;
    let cells = write_tessellation(&cfg.path(|p| &p.polygons), master, "generate", cfg.n_points, cfg.domain_side)?;
    let test_cells = write_tessellation(
        &cfg.path(|p| &p.test_polygons),
        master,
        "generate-test",
        cfg.test_n_points,
        cfg.test_side,
    )?;
    Ok(GenerateReport { cells, test_cells })
}

fn write_tessellation(path: &Path, master: u64, tag: &str, n: usize, side: f64) -> Result<usize> {
    let stage = seed::stage_seed(master, tag);
    let points = geometry::sample_points(n, side, stage)?;
    let cells = geometry::voronoi_cells(&points)?;
    let header = [
        ("seed", master.to_string()),
        ("stage_seed", stage.to_string()),
        ("n", n.to_string()),
        ("side", side.to_string()),
        ("cells", cells.len().to_string()),
    ];
    write_polygons(path, &cells, &header)?;
    Ok(cells.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelFailure {
    pub set: &'static str,
    pub polygon_id: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelReport {
    pub labeled: usize,
    pub test_labeled: usize,
    pub failures: Vec<LabelFailure>,
}

/// Solves the eigenproblem on every cell, in parallel. Failures are recorded
/// and skipped.
pub fn label(cfg: &PipelineConfig) -> Result<LabelReport> {
    cfg.validate()?;
    let mut failures = Vec::new();
    let labeled = label_file(&cfg.path(|p| &p.polygons), &cfg.path(|p| &p.labels), cfg.mesh_divisor)?;
    let test_labeled = label_file(&cfg.path(|p| &p.test_polygons), &cfg.path(|p| &p.test_labels), cfg.mesh_divisor)?;
    for (set, (_, fails)) in [("train", &labeled), ("test", &test_labeled)] {
        failures.extend(fails.iter().map(|(id, message)| LabelFailure {
            set,
            polygon_id: *id,
            message: message.clone(),
        }));
    }
    let mut text = String::from("set,polygon_id,error\n");
    for f in &failures {
        text.push_str(&format!("{},{},{}\n", f.set, f.polygon_id, f.message.replace([',', '\n'], ";")));
    }
    fs::write(cfg.path(|p| &p.label_failures), text)?;
    Ok(LabelReport {
        labeled: labeled.0,
        test_labeled: test_labeled.0,
        failures,
    })
}

/// Labels one polygon file; returns the number labeled and the failures.
pub fn label_file(polygons: &Path, labels: &Path, mesh_divisor: f64) -> Result<(usize, Vec<(usize, String)>)> {
    let polys = read_polygons(polygons)?;
    let results: Vec<_> = polys
        .par_iter()
        .enumerate()
        .map(|(id, p)| (id, fem::poincare_constant_with(p, mesh_divisor)))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(r) => rows.push(LabelRow::new(id, &r)),
            Err(e) => failures.push((id, e.to_string())),
        }
    }
    fem::write_labels(labels, &rows)?;
    Ok((rows.len(), failures))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessReport {
    pub raw_rows: usize,
    pub kept_rows: usize,
    pub train_rows: usize,
    pub validation_rows: usize,
    pub test_rows: usize,
    /// Metric pairs with `|r| ≥ 0.8`.
    pub correlated_pairs: Vec<(String, String, f64)>,
    /// Cells whose closest vertex pair is not an edge.
    pub mpd_below_se: usize,
}

/// Correlation report, feature projection, outlier removal and split.
pub fn preprocess(cfg: &PipelineConfig) -> Result<PreprocessReport> {
    cfg.validate()?;
    let master = cfg.require_seed()?;
    let raw = labeled_rows(&cfg.path(|p| &p.polygons), &cfg.path(|p| &p.labels))?;
    let correlation = dataset::pearson_correlation(&raw, &METRIC_NAMES)?;
    correlation.write_csv(&cfg.path(|p| &p.correlation))?;
    let mpd_below_se = raw.iter().filter(|r| r.metrics.mpd < r.metrics.se).count();

    let features = dataset::select_features(&raw);
    let kept = dataset::remove_outliers(&features, cfg.z_threshold)?;
    dataset::save_csv(&kept, &cfg.path(|p| &p.features))?;
    let split = dataset::split(&kept, cfg.validation_fraction, seed::stage_seed(master, "split"))?;
    dataset::save_csv(&split.train, &cfg.path(|p| &p.train))?;
    dataset::save_csv(&split.validation, &cfg.path(|p| &p.validation))?;

    let test = dataset::select_features(&labeled_rows(&cfg.path(|p| &p.test_polygons), &cfg.path(|p| &p.test_labels))?);
    dataset::save_csv(&test, &cfg.path(|p| &p.test_features))?;

    Ok(PreprocessReport {
        raw_rows: raw.len(),
        kept_rows: kept.len(),
        train_rows: split.train.len(),
        validation_rows: split.validation.len(),
        test_rows: test.len(),
        correlated_pairs: correlation.strongly_correlated(dataset::CORRELATION_THRESHOLD),
        mpd_below_se,
    })
}

/// Joins a polygon file with its labels by polygon id.
pub fn labeled_rows(polygons: &Path, labels: &Path) -> Result<Vec<dataset::RawRow>> {
    let polys = read_polygons(polygons)?;
    let label_rows = fem::read_labels(labels)?;
    let pairs = label_rows
        .iter()
        .map(|l| {
            polys.get(l.polygon_id).map(|p| (l.polygon_id, p.clone())).ok_or_else(|| {
                Error::Schema(format!(
                    "{} labels polygon {} but {} holds {} polygons",
                    labels.display(),
                    l.polygon_id,
                    polygons.display(),
                    polys.len()
                ))
            })
        })
        .collect::<Result<Vec<(usize, Polygon)>>>()?;
    dataset::build_raw(&pairs, &label_rows)
}

/// Reproducible record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub hidden_sizes: Vec<usize>,
    pub parameter_count: usize,
    pub reported_parameter_count: usize,
    pub config: TrainConfig,
    pub init_seed: u64,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub min_val_loss: f64,
    pub best_epoch: usize,
    pub final_sparsity: f64,
    /// Loss on the test cells, when they were preprocessed.
    pub test_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Dense,
    Pruned,
}

impl ModelKind {
    fn tag(self) -> &'static str {
        match self {
            ModelKind::Dense => "train",
            ModelKind::Pruned => "prune-train",
        }
    }
}

/// Trains the dense (`train`) or pruned (`prune-train`) model and writes the
/// model, its history and a summary.
pub fn train_model(cfg: &PipelineConfig, kind: ModelKind) -> Result<TrainSummary> {
    cfg.validate()?;
    let master = cfg.require_seed()?;
    let data = SplitDataset {
        train: dataset::load_csv(&cfg.path(|p| &p.train))?,
        validation: dataset::load_csv(&cfg.path(|p| &p.validation))?,
        split_seed: seed::stage_seed(master, "split"),
    };
    let stage = seed::stage_seed(master, kind.tag());
    let (hidden, config) = match kind {
        ModelKind::Dense => {
            let t = &cfg.train;
            let c = TrainConfig::new(t.eta, t.epochs, seed::stage_seed(stage, "dropout")).with_dropout(t.dropout_p);
            (t.hidden.clone(), c)
        }
        ModelKind::Pruned => {
            let t = &cfg.prune;
            let c = TrainConfig::new(t.eta, t.epochs, seed::stage_seed(stage, "dropout")).with_pruning(t.schedule());
            (t.hidden.clone(), c)
        }
    };
    let arch = Architecture::new(hidden)?;
    let init_seed = seed::stage_seed(stage, "init");
    let (model, history) = ann::train(ann::init(&arch, init_seed)?, &data, &config)?;
    let (min_val_loss, best_epoch) = history.min_val_loss().unwrap_or((f64::NAN, 0));

    let test_path = cfg.path(|p| &p.test_features);
    let test_loss = if test_path.exists() {
        let test = dataset::load_csv(&test_path)?;
        (!test.is_empty()).then(|| evaluate_rows(&model, &test)).transpose()?
    } else {
        None
    };
    let summary = TrainSummary {
        parameter_count: arch.parameter_count(),
        reported_parameter_count: arch.reported_parameter_count(),
        hidden_sizes: arch.hidden_sizes,
        config,
        init_seed,
        initial_train_loss: history.train_loss.first().copied().unwrap_or(f64::NAN),
        final_train_loss: history.train_loss.last().copied().unwrap_or(f64::NAN),
        min_val_loss,
        best_epoch,
        final_sparsity: model.sparsity(),
        test_loss,
    };
    let (model_path, history_path, summary_path) = match kind {
        ModelKind::Dense => (cfg.path(|p| &p.model), cfg.path(|p| &p.history), cfg.path(|p| &p.summary)),
        ModelKind::Pruned => (
            cfg.path(|p| &p.pruned_model),
            cfg.path(|p| &p.pruned_history),
            cfg.path(|p| &p.pruned_summary),
        ),
    };
    ann::save_model(&model, &model_path)?;
    history.write_csv(&history_path)?;
    write_summary(&summary, &summary_path)?;
    Ok(summary)
}

pub fn write_summary(summary: &TrainSummary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<TrainSummary> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

/// Loss of `model` on labeled feature rows.
pub fn evaluate_rows(model: &MlpModel, rows: &[FeatureRow]) -> Result<f64> {
    ann::loss(&model.predict_rows(rows), &ann::targets(rows))
}

/// Loss of a saved model on a features CSV.
pub fn evaluate(model: &Path, features: &Path) -> Result<f64> {
    let rows = dataset::load_csv(features)?;
    evaluate_rows(&ann::load_model(model)?, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub polygon_id: usize,
    pub c_p: f64,
}

/// Predicted constants for every polygon of a file.
pub fn predict(model: &Path, polygons: &Path, out: &Path) -> Result<Vec<Prediction>> {
    let model = ann::load_model(model)?;
    let rows: Vec<FeatureRow> = read_polygons(polygons)?
        .iter()
        .enumerate()
        .map(|(id, p)| FeatureRow::from_metrics(id, &compute_metrics(p), f64::NAN))
        .collect();
    let predictions: Vec<Prediction> = if rows.is_empty() {
        Vec::new()
    } else {
        rows.iter()
            .zip(model.predict_rows(&rows))
            .map(|(r, c_p)| Prediction {
                polygon_id: r.polygon_id,
                c_p,
            })
            .collect()
    };
    crate::csvio::write_rows(out, &["polygon_id", "c_p"], &predictions)?;
    Ok(predictions)
}

/// Seeded random search; writes the results CSV.
pub fn tune(cfg: &PipelineConfig) -> Result<tuner::SearchResult> {
    cfg.validate()?;
    let master = cfg.require_seed()?;
    let data = SplitDataset {
        train: dataset::load_csv(&cfg.path(|p| &p.train))?,
        validation: dataset::load_csv(&cfg.path(|p| &p.validation))?,
        split_seed: seed::stage_seed(master, "split"),
    };
    let t = &cfg.tune;
    let result = tuner::random_search(&t.space, t.budget, t.epochs, &data, seed::stage_seed(master, "tune"))?;
    tuner::write_results(&result.trials, &cfg.path(|p| &p.tune_results))?;
    Ok(result)
}

/// Trains the five reference variants for `epochs` epochs, writes the score
/// table, the timings, one history per variant next to the score table, and
/// the long-format plot data.
pub fn compare(cfg: &PipelineConfig, epochs: usize) -> Result<Vec<tuner::ComparisonRow>> {
    cfg.validate()?;
    let master = cfg.require_seed()?;
    let data = SplitDataset {
        train: dataset::load_csv(&cfg.path(|p| &p.train))?,
        validation: dataset::load_csv(&cfg.path(|p| &p.validation))?,
        split_seed: seed::stage_seed(master, "split"),
    };
    let test = dataset::load_csv(&cfg.path(|p| &p.test_features))?;
    let stage = seed::stage_seed(master, "compare");
    let variants = tuner::paper_variants(epochs, stage)?;
    let trained = tuner::compare_models(&variants, &data, &test, seed::stage_seed(stage, "init"))?;
    let mut histories = Vec::new();
    for t in &trained {
        if let Some(h) = &t.history {
            let path = cfg.out_dir.join(format!("history_{}.csv", t.row.model));
            h.write_csv(&path)?;
            histories.push((t.row.model.clone(), path));
        }
    }
    let rows: Vec<_> = trained.into_iter().map(|t| t.row).collect();
    tuner::write_comparison(&rows, &cfg.path(|p| &p.comparison), &cfg.path(|p| &p.comparison_timing))?;
    export_plots(&histories, &cfg.path(|p| &p.plots))?;
    Ok(rows)
}

/// Long-format validation curves, `model,epoch,val_loss`.
pub fn export_plots(histories: &[(String, PathBuf)], out: &Path) -> Result<()> {
    let mut text = String::from("model,epoch,val_loss\n");
    for (name, path) in histories {
        let h = TrainHistory::read_csv(path)?;
        for (i, v) in h.val_loss.iter().enumerate() {
            text.push_str(&format!("{name},{},{v:e}\n", i + 1));
        }
    }
    fs::write(out, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub generate: GenerateReport,
    pub label: LabelReport,
    pub preprocess: PreprocessReport,
    pub dense: TrainSummary,
    pub pruned: TrainSummary,
}

/// generate, label, preprocess, train, prune-train, then the plot data of
/// both models.
pub fn run_all(cfg: &PipelineConfig) -> Result<RunReport> {
    let generate = generate(cfg)?;
    let label = label(cfg)?;
    let preprocess = preprocess(cfg)?;
    let dense = train_model(cfg, ModelKind::Dense)?;
    let pruned = train_model(cfg, ModelKind::Pruned)?;
    export_plots(
        &[
            ("dense".to_string(), cfg.path(|p| &p.history)),
            ("pruned".to_string(), cfg.path(|p| &p.pruned_history)),
        ],
        &cfg.path(|p| &p.plots),
    )?;
    Ok(RunReport {
        generate,
        label,
        preprocess,
        dense,
        pruned,
    })
}
