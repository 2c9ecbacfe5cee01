use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use poincare::pipeline::{self, ModelKind, PipelineConfig};
use poincare::tuner;

#[derive(Parser)]
#[command(name = "poincare", version, about = "Poincaré constants of convex polygons: FEM labels and a neural surrogate")]
struct Cli {
    /// TOML or JSON pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for every artifact.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample points and write the bounded Voronoi cells of the training and test sets.
    Generate {
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        geometry: GeometryArgs,
    },
    /// Compute c_p for every cell with the finite element solver.
    Label {
        #[arg(long)]
        mesh_divisor: Option<f64>,
    },
    /// Correlation report, feature selection, outlier removal and train/validation split.
    Preprocess {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        z_threshold: Option<f64>,
        #[arg(long)]
        validation_fraction: Option<f64>,
    },
    /// Train the dense network.
    Train {
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        net: NetArgs,
        /// Hidden-unit drop probability; inputs drop with a quarter of it.
        #[arg(long)]
        dropout: Option<f64>,
    },
    /// Train with magnitude pruning.
    PruneTrain {
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        s0: Option<f64>,
        #[arg(long)]
        s_f: Option<f64>,
        #[arg(long)]
        t0: Option<usize>,
        #[arg(long)]
        delta_t: Option<usize>,
        #[arg(long)]
        n_pr: Option<usize>,
    },
    /// Random search over layers, widths and learning rates.
    Tune {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the five reference variants and tabulate their losses.
    Compare {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = tuner::DEFAULT_COMPARE_EPOCHS)]
        epochs: usize,
    },
    /// Loss of a saved model on a labeled features file.
    Evaluate {
        /// Defaults to the dense model of the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Defaults to the test features of the output directory.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Predict c_p for every polygon of a polygon file.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        polygons: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge training histories into one long-format validation-curve file.
    ExportPlots {
        /// `name=path` pairs; defaults to the dense and pruned histories.
        #[arg(long = "history", value_parser = parse_history)]
        histories: Vec<(String, PathBuf)>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// generate, label, preprocess, train, prune-train and export-plots.
    Run {
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        geometry: GeometryArgs,
    },
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    domain_side: Option<f64>,
    #[arg(long)]
    test_n_points: Option<usize>,
    #[arg(long)]
    test_side: Option<f64>,
}

#[derive(Args)]
struct NetArgs {
    /// Comma-separated hidden widths, e.g. 385,385,385.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

fn parse_history(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected name=path, got `{s}`")),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl GeometryArgs {
    fn apply(self, cfg: &mut PipelineConfig) {
        set(&mut cfg.n_points, self.n_points);
        set(&mut cfg.domain_side, self.domain_side);
        set(&mut cfg.test_n_points, self.test_n_points);
        set(&mut cfg.test_side, self.test_side);
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    set(&mut cfg.out_dir, cli.out_dir);

    match cli.command {
        Command::Generate { seed, geometry } => {
            cfg.seed = Some(seed);
            geometry.apply(&mut cfg);
            let r = pipeline::generate(&cfg)?;
            println!("{} training cells, {} test cells", r.cells, r.test_cells);
            if r.cells == 0 {
                eprintln!("warning: no bounded Voronoi cell in the training set");
            }
            if r.test_cells == 0 {
                eprintln!("warning: no bounded Voronoi cell in the test set");
            }
        }
        Command::Label { mesh_divisor } => {
            set(&mut cfg.mesh_divisor, mesh_divisor);
            let r = pipeline::label(&cfg)?;
            println!("labeled {} training and {} test cells", r.labeled, r.test_labeled);
            for f in &r.failures {
                eprintln!("warning: {} polygon {} failed: {}", f.set, f.polygon_id, f.message);
            }
        }
        Command::Preprocess {
            seed,
            z_threshold,
            validation_fraction,
        } => {
            set(&mut cfg.seed, seed.map(Some));
            set(&mut cfg.z_threshold, z_threshold);
            set(&mut cfg.validation_fraction, validation_fraction);
            let r = pipeline::preprocess(&cfg)?;
            println!(
                "{} rows, {} after outlier removal: {} train, {} validation; {} test rows",
                r.raw_rows, r.kept_rows, r.train_rows, r.validation_rows, r.test_rows
            );
            for (a, b, v) in &r.correlated_pairs {
                println!("corr({a}, {b}) = {v:.4}");
            }
            if r.mpd_below_se > 0 {
                println!("{} cells have MPD < SE", r.mpd_below_se);
            }
        }
        Command::Train { seed, net, dropout } => {
            cfg.seed = Some(seed);
            set(&mut cfg.train.hidden, net.hidden);
            set(&mut cfg.train.eta, net.eta);
            set(&mut cfg.train.epochs, net.epochs);
            set(&mut cfg.train.dropout_p, dropout);
            report_training(&pipeline::train_model(&cfg, ModelKind::Dense)?);
        }
        Command::PruneTrain {
            seed,
            net,
            s0,
            s_f,
            t0,
            delta_t,
            n_pr,
        } => {
            set(&mut cfg.seed, seed.map(Some));
            let p = &mut cfg.prune;
            set(&mut p.hidden, net.hidden);
            set(&mut p.eta, net.eta);
            set(&mut p.epochs, net.epochs);
            set(&mut p.s0, s0);
            set(&mut p.s_f, s_f);
            set(&mut p.t0, t0);
            set(&mut p.delta_t, delta_t);
            set(&mut p.n_pr, n_pr);
            report_training(&pipeline::train_model(&cfg, ModelKind::Pruned)?);
        }
        Command::Tune { seed, budget, epochs } => {
            cfg.seed = Some(seed);
            set(&mut cfg.tune.budget, budget);
            set(&mut cfg.tune.epochs, epochs);
            let r = pipeline::tune(&cfg)?;
            let best = r.best_trial();
            println!(
                "best trial {}: hidden {:?}, eta {}, min validation loss {:e} at epoch {}",
                best.trial, best.arch.hidden_sizes, best.config.eta, best.min_val_loss, best.best_epoch
            );
        }
        Command::Compare { seed, epochs } => {
            set(&mut cfg.seed, seed.map(Some));
            for r in pipeline::compare(&cfg, epochs)? {
                println!(
                    "{:<16} min val {:e} (epoch {}), test {:e}, train {:.2} s, test {:.4} s, {}",
                    r.model, r.min_val_loss, r.best_epoch, r.test_loss, r.train_seconds, r.test_seconds, r.status
                );
            }
        }
        Command::Evaluate { model, features } => {
            let model = model.unwrap_or_else(|| cfg.path(|p| &p.model));
            let features = features.unwrap_or_else(|| cfg.path(|p| &p.test_features));
            println!("{:e}", pipeline::evaluate(&model, &features)?);
        }
        Command::Predict { model, polygons, out } => {
            let model = model.unwrap_or_else(|| cfg.path(|p| &p.model));
            let polygons = polygons.unwrap_or_else(|| cfg.path(|p| &p.test_polygons));
            let out = out.unwrap_or_else(|| cfg.path(|p| &p.predictions));
            let n = pipeline::predict(&model, &polygons, &out)?.len();
            println!("{n} predictions written to {}", out.display());
        }
        Command::ExportPlots { histories, out } => {
            let histories = if histories.is_empty() {
                [("dense", cfg.path(|p| &p.history)), ("pruned", cfg.path(|p| &p.pruned_history))]
                    .into_iter()
                    .filter(|(_, p)| p.exists())
                    .map(|(n, p)| (n.to_string(), p))
                    .collect()
            } else {
                histories
            };
            let out = out.unwrap_or_else(|| cfg.path(|p| &p.plots));
            pipeline::export_plots(&histories, &out)?;
            println!("{} curves written to {}", histories.len(), out.display());
        }
        Command::Run { seed, geometry } => {
            cfg.seed = Some(seed);
            geometry.apply(&mut cfg);
            let r = pipeline::run_all(&cfg)?;
            if r.generate.cells == 0 {
                bail!("no bounded Voronoi cell to train on");
            }
            println!(
                "{} cells, {} labeled, {} kept after outlier removal",
                r.generate.cells, r.label.labeled, r.preprocess.kept_rows
            );
            report_training(&r.dense);
            report_training(&r.pruned);
        }
    }
    Ok(())
}

fn report_training(s: &pipeline::TrainSummary) {
    print!(
        "hidden {:?}: min validation loss {:e} at epoch {}, sparsity {:.4}",
        s.hidden_sizes, s.min_val_loss, s.best_epoch, s.final_sparsity
    );
    match s.test_loss {
        Some(t) => println!(", test loss {t:e}"),
        None => println!(),
    }
}
