//! Command-line front end. Every stage reads and writes files so stages can
//! be run, cached and swept independently.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::classify::{evaluate, mean_std, svm_train_select, FeatureSet, SvmConfig};
use crate::config::ExperimentConfig;
use crate::datasets::export_image_grid;
use crate::error::{Error, Result};
use crate::pipeline::{
    cross_dataset, extract_features, filter_tiles, load_dataset, run_experiment, train_layer,
    ExperimentReport, Preprocessor,
};
use crate::snn::{EpochStats, SnnLayer};

#[derive(Debug, Parser)]
#[command(name = "whitespike", version, about = "Whitening + STDP spiking feature learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Config file plus `key=value` overrides.
#[derive(Debug, Clone, clap::Args)]
pub struct ConfigArgs {
    /// Experiment config (`section.key = value` lines); defaults if omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set layer.filter_count=128`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not KEY=VALUE")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the configured whitening (full-image ZCA or kernels) on the training split.
    WhitenFit {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train one SNN layer and write it with its per-epoch log.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Whitening file from `whiten-fit` (not needed for DoG).
        #[arg(long)]
        transform: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        /// Per-epoch CSV log; printed to stdout when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Run index; the run seed is `experiment.seed + run`.
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Extract pooled SNN features for one split.
    Extract {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        layer: PathBuf,
        #[arg(long)]
        transform: Option<PathBuf>,
        #[arg(long, value_enum)]
        split: Split,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train and evaluate linear SVMs over `classify.run_count` seeds.
    Classify {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Machine-readable `key = value` summary.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Whole pipeline in memory: fit, then train/extract/classify per run.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Directory receiving `layer_run<k>.bin` for every run.
        #[arg(long)]
        layers: Option<PathBuf>,
    },
    /// Kernels fitted on each of two datasets, evaluated on both.
    CrossDataset {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Render a layer's filters as a PNG grid.
    ExportFilters {
        #[arg(long)]
        layer: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Print the effective configuration.
    ShowConfig {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn log_csv(log: &[EpochStats]) -> String {
    let mut s = String::from(EpochStats::CSV_HEADER);
    s.push('\n');
    for e in log {
        s.push_str(&e.csv_line());
        s.push('\n');
    }
    s
}

/// Runs one command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::WhitenFit { config, out: path } => {
            let cfg = config.load()?;
            let (train, _) = load_dataset(&cfg.dataset, cfg.seed)?;
            let pre = Preprocessor::fit(&cfg.whitening, &train, cfg.seed)?;
            let file = pre.to_file().ok_or_else(|| {
                Error::Config(format!("{} pre-processing has nothing to fit", cfg.whitening.preproc))
            })?;
            file.save(path)?;
            let (dim, retained, eig) = match &pre {
                Preprocessor::Standard(t) => (t.dim(), t.retained(), t.eigvals.clone()),
                Preprocessor::Kernels(k) => {
                    let d = k.patch_w * k.patch_h * k.channels;
                    (d, crate::whitening::retained_count(k.ratio, d), Vec::new())
                }
                Preprocessor::Dog(_) => unreachable!("no file for DoG"),
            };
            writeln!(out, "fitted {} (dim {dim}, {retained} eigenpairs retained)", pre.name()).map_err(out_err)?;
            if !eig.is_empty() {
                let head: Vec<String> = eig.iter().take(8).map(|v| format!("{v:.4e}")).collect();
                writeln!(out, "spectrum head: {}", head.join(" ")).map_err(out_err)?;
            }
            writeln!(out, "wrote {}", path.display()).map_err(out_err)?;
        }
        Command::Train {
            config,
            transform,
            out: path,
            log,
            run,
        } => {
            let cfg = config.load()?;
            let pre = Preprocessor::from_source(&cfg.whitening, transform.as_deref())?;
            let (train, _) = load_dataset(&cfg.dataset, cfg.seed)?;
            let coded = pre.code_all(train.images())?;
            let (layer, epochs) = train_layer(&cfg, &coded, *run)?;
            layer.save(path)?;
            let csv = log_csv(&epochs);
            match log {
                Some(p) => write_text(p, &csv)?,
                None => out.write_all(csv.as_bytes()).map_err(out_err)?,
            }
            writeln!(out, "wrote {}", path.display()).map_err(out_err)?;
        }
        Command::Extract {
            config,
            layer,
            transform,
            split,
            out: path,
        } => {
            let cfg = config.load()?;
            let pre = Preprocessor::from_source(&cfg.whitening, transform.as_deref())?;
            let layer = SnnLayer::load(layer)?;
            let (train, test) = load_dataset(&cfg.dataset, cfg.seed)?;
            let set = match split {
                Split::Train => train,
                Split::Test => test,
            };
            let features = extract_features(&layer, &pre, &set, cfg.classify.pooling)?;
            features.save(path)?;
            writeln!(
                out,
                "wrote {} features of length {} to {}",
                features.vectors.len(),
                features.dim(),
                path.display()
            )
            .map_err(out_err)?;
        }
        Command::Classify {
            config,
            train,
            test,
            summary,
        } => {
            let cfg = config.load()?;
            let train = FeatureSet::load(train)?;
            let test = FeatureSet::load(test)?;
            if train.dim() != test.dim() {
                return Err(Error::Shape(format!(
                    "train features have {} values, test features {}",
                    train.dim(),
                    test.dim()
                )));
            }
            writeln!(out, "run,seed,accuracy,reg").map_err(out_err)?;
            let mut accs = Vec::new();
            for run in 0..cfg.classify.run_count {
                let svm = SvmConfig {
                    reg: cfg.classify.reg_grid[0],
                    epochs: cfg.classify.svm_epochs,
                    seed: cfg.run_seed(run),
                    project: true,
                };
                let sel = svm_train_select(&train.vectors, train.class_count, &svm, &cfg.classify.reg_grid)?;
                let acc = evaluate(&sel.model, &test.vectors)?;
                writeln!(out, "{run},{},{acc:.6},{}", svm.seed, sel.reg).map_err(out_err)?;
                accs.push(acc);
            }
            let (m, s) = mean_std(&accs);
            let line = format!(
                "accuracy: {:.2} ± {:.2} % over {} runs",
                100.0 * m,
                100.0 * s,
                accs.len()
            );
            writeln!(out, "{line}").map_err(out_err)?;
            if let Some(p) = summary {
                let list: Vec<String> = accs.iter().map(f64::to_string).collect();
                write_text(
                    p,
                    &format!(
                        "runs = {}\nmean_accuracy_percent = {}\nstd_accuracy_percent = {}\naccuracies = {}\n",
                        accs.len(),
                        100.0 * m,
                        100.0 * s,
                        list.join(",")
                    ),
                )?;
            }
        }
        Command::Run {
            config,
            summary,
            layers,
        } => {
            let cfg = config.load()?;
            let report = run_experiment(&cfg)?;
            print_report(&report, out)?;
            if let Some(dir) = layers {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                for r in &report.runs {
                    r.layer.save(dir.join(format!("layer_run{}.bin", r.run)))?;
                }
            }
            if let Some(p) = summary {
                write_text(p, &report.summary_text())?;
            }
        }
        Command::CrossDataset {
            config_a,
            config_b,
            summary,
        } => {
            let a = ExperimentConfig::load(config_a)?;
            let b = ExperimentConfig::load(config_b)?;
            let report = cross_dataset(&a, &b)?;
            out.write_all(report.table().as_bytes()).map_err(out_err)?;
            if let Some(p) = summary {
                let (da, db) = report.deltas();
                let mut text = String::new();
                for (name, r) in [
                    ("a_same", &report.a_same),
                    ("a_cross", &report.a_cross),
                    ("b_same", &report.b_same),
                    ("b_cross", &report.b_cross),
                ] {
                    let (m, s) = r.mean_std_percent();
                    text.push_str(&format!("{name}_mean_percent = {m}\n{name}_std_percent = {s}\n"));
                }
                text.push_str(&format!("delta_a_pp = {da}\ndelta_b_pp = {db}\n"));
                write_text(p, &text)?;
            }
        }
        Command::ExportFilters { layer, out: path } => {
            let layer = SnnLayer::load(layer)?;
            let tiles = filter_tiles(&layer);
            export_image_grid(&tiles, path)?;
            writeln!(out, "wrote {} filters to {}", tiles.len(), path.display()).map_err(out_err)?;
        }
        Command::ShowConfig { config } => {
            out.write_all(config.load()?.to_text().as_bytes()).map_err(out_err)?;
        }
    }
    Ok(())
}

fn print_report(report: &ExperimentReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{}", ExperimentReport::CSV_HEADER).map_err(out_err)?;
    for l in report.csv_lines() {
        writeln!(out, "{l}").map_err(out_err)?;
    }
    writeln!(out, "{}", report.summary()).map_err(out_err)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            i32::from(e.exit_code())
        }
    }
}
