//! `flowsentinel train | evaluate | predict | inspect`.
//!
//! Progress and diagnostics go to stderr, results to stdout or `--out`.
//! Exit codes: 0 success, 1 usage, 2 data, 3 model file.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowsentinel_core::optim::AdamConfig;
use flowsentinel_core::trainer::{evaluate, fit, predict, EpochStats};
use flowsentinel_core::{Task, Tensor, TrainConfig};

use crate::dataset_io::{
    load_csv, load_features, load_taxonomy, write_predictions, DEFAULT_LABEL_COLUMN,
};
use crate::model_store::{load_model, read_header, save_model, SavedModel, TrainingMetadata};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_MODEL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "flowsentinel",
    version,
    about = "1D-CNN classifier for network-flow attack traffic"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a labelled CSV and write it to a model file.
    Train(TrainArgs),
    /// Score a model against a labelled CSV.
    Evaluate(EvaluateArgs),
    /// Write class probabilities and predicted labels for a CSV.
    Predict(PredictArgs),
    /// Print architecture, class map and training metadata of a model file.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Binary,
    Category,
    Multiclass,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Binary => Task::Binary,
            TaskArg::Category => Task::Category,
            TaskArg::Multiclass => Task::Multiclass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    /// JSON document with the report fields.
    Structured,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = TaskArg::Multiclass)]
    pub task: TaskArg,
    #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
    pub label_column: String,
    /// Rule file (`kind,pattern,category` per line); built-in rules otherwise.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val_split: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Stop after this many epochs without validation-loss improvement; 0 disables.
    #[arg(long, default_value_t = 0)]
    pub early_stop_patience: usize,
    /// Keep at most this many rows of each raw label.
    #[arg(long)]
    pub limit_per_class: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    /// Defaults to the label column the model was trained with.
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
}

/// An error already classified by exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(e: impl Display) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: e.to_string(),
    }
}

fn data(e: impl Display) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: e.to_string(),
    }
}

fn model_file(e: impl Display) -> Failure {
    Failure {
        code: EXIT_MODEL,
        message: e.to_string(),
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let (code, sink): (i32, &mut dyn Write) = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => (EXIT_OK, out),
                _ => (EXIT_USAGE, err),
            };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => train_cmd(&a, out, err),
        Command::Evaluate(a) => evaluate_cmd(&a, out, err),
        Command::Predict(a) => predict_cmd(&a, err),
        Command::Inspect(a) => inspect_cmd(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.prec$}"))
}

/// The stable per-epoch progress line.
pub fn epoch_line(stats: &EpochStats, epoch: usize, total: usize) -> String {
    format!(
        "epoch {}/{total} train_loss={:.6} train_acc={:.4} val_loss={} val_acc={}",
        epoch + 1,
        stats.train_loss,
        stats.train_accuracy,
        fmt_opt(stats.val_loss, 6),
        fmt_opt(stats.val_accuracy, 4)
    )
}

fn train_cmd(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        adam: AdamConfig {
            lr: a.lr,
            ..AdamConfig::default()
        },
        val_fraction: a.val_split,
        seed: a.seed,
        early_stop_patience: a.early_stop_patience,
        shuffle_each_epoch: true,
    };
    cfg.validate().map_err(usage)?;
    if a.limit_per_class == Some(0) {
        return Err(usage("--limit-per-class must be at least 1"));
    }
    let task = Task::from(a.task);

    let taxonomy = match &a.taxonomy {
        Some(p) => load_taxonomy(p).map_err(data)?,
        None => Default::default(),
    };
    let mut dataset = load_csv(&a.data, &a.label_column).map_err(data)?;
    let _ = writeln!(
        err,
        "loaded {} rows, {} features from {}",
        dataset.len(),
        dataset.feature_count(),
        a.data.display()
    );
    if let Some(cap) = a.limit_per_class {
        dataset = dataset.subsample_stratified(cap, a.seed).map_err(data)?;
        let _ = writeln!(err, "kept {} rows at {cap} per class", dataset.len());
    }

    let outcome = fit(&dataset, &taxonomy, task, &cfg, |stats, epoch| {
        let _ = writeln!(err, "{}", epoch_line(stats, epoch, cfg.epochs));
    })
    .map_err(data)?;
    if outcome.history.stopped_early {
        let _ = writeln!(
            err,
            "early stop after epoch {}, restored epoch {}",
            outcome.history.epochs.len(),
            outcome.history.best_epoch.map_or(0, |b| b + 1)
        );
    }

    let saved = SavedModel {
        model: outcome.model,
        preproc: outcome.preproc,
        taxonomy,
        feature_names: dataset.feature_names.clone(),
        metadata: TrainingMetadata {
            config: cfg,
            label_column: a.label_column.clone(),
            data_source: a.data.display().to_string(),
            limit_per_class: a.limit_per_class,
            history: outcome.history,
        },
    };
    save_model(&a.out, &saved).map_err(model_file)?;
    let _ = writeln!(err, "model written to {}", a.out.display());

    let w = |e: std::io::Error| data(e);
    writeln!(
        out,
        "task={} classes={} train_rows={} val_rows={}",
        task,
        saved.preproc.class_count(),
        outcome.split.train_indices.len(),
        outcome.split.val_indices.len()
    )
    .map_err(w)?;
    if let Some(last) = saved.metadata.history.epochs.last() {
        writeln!(
            out,
            "final {}",
            epoch_line(
                last,
                saved.metadata.history.epochs.len() - 1,
                saved.metadata.config.epochs
            )
        )
        .map_err(w)?;
    }
    if let Some(report) = &outcome.validation {
        writeln!(out, "\nvalidation report:\n{report}").map_err(w)?;
    }
    Ok(())
}

/// Columns of `table_names` reordered to `model_names`; every model column
/// must be present and no others.
fn align_features(
    model_names: &[String],
    table_names: &[String],
    features: &Tensor,
) -> Result<Tensor, Failure> {
    if model_names == table_names {
        return Ok(features.clone());
    }
    let mut cols = Vec::with_capacity(model_names.len());
    for name in model_names {
        match table_names.iter().position(|t| t == name) {
            Some(i) => cols.push(i),
            None => {
                return Err(data(format!(
                    "feature column `{name}` required by the model is missing"
                )))
            }
        }
    }
    if let Some(extra) = table_names.iter().find(|t| !model_names.contains(t)) {
        return Err(data(format!(
            "column `{extra}` is not a feature of this model"
        )));
    }
    let n = features.shape()[0];
    let mut out = Vec::with_capacity(n * cols.len());
    for i in 0..n {
        let row = features.row(i);
        out.extend(cols.iter().map(|&c| row[c]));
    }
    Tensor::new(vec![n, cols.len()], out).map_err(data)
}

fn evaluate_cmd(a: &EvaluateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let saved = load_model(&a.model).map_err(model_file)?;
    let label_column = a
        .label_column
        .as_deref()
        .unwrap_or(&saved.metadata.label_column);
    let mut dataset = load_csv(&a.data, label_column).map_err(data)?;
    dataset.features = align_features(
        &saved.feature_names,
        &dataset.feature_names,
        &dataset.features,
    )?;
    dataset.feature_names = saved.feature_names.clone();
    let _ = writeln!(
        err,
        "evaluating {} rows on the {} task",
        dataset.len(),
        saved.preproc.task
    );

    let report = evaluate(
        &saved.model,
        &saved.preproc,
        &dataset,
        &saved.taxonomy,
        saved.preproc.task,
    )
    .map_err(data)?;
    let text = match a.format {
        ReportFormat::Text => report.to_string(),
        ReportFormat::Structured => serde_json::to_string_pretty(&report).map_err(data)? + "\n",
    };
    match &a.out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| data(format!("{}: {e}", p.display())))?;
            let _ = writeln!(err, "report written to {}", p.display());
        }
        None => out.write_all(text.as_bytes()).map_err(data)?,
    }
    Ok(())
}

fn predict_cmd(a: &PredictArgs, err: &mut dyn Write) -> CmdResult {
    let saved = load_model(&a.model).map_err(model_file)?;
    let table = load_features(&a.data, &saved.metadata.label_column).map_err(data)?;
    let features = align_features(&saved.feature_names, &table.feature_names, &table.features)?;
    let pred = predict(&saved.model, &saved.preproc, &features).map_err(data)?;

    let file = File::create(&a.out).map_err(|e| data(format!("{}: {e}", a.out.display())))?;
    write_predictions(
        BufWriter::new(file),
        &saved.feature_names,
        &features,
        &saved.preproc.label_map,
        &pred,
    )
    .map_err(|e| data(format!("{}: {e}", a.out.display())))?;
    let _ = writeln!(
        err,
        "wrote {} predictions to {}",
        pred.classes.len(),
        a.out.display()
    );
    Ok(())
}

fn inspect_cmd(a: &InspectArgs, out: &mut dyn Write) -> CmdResult {
    let path: &Path = &a.model;
    let bytes = std::fs::read(path).map_err(|e| model_file(format!("{}: {e}", path.display())))?;
    let h = read_header(&bytes, path).map_err(model_file)?;
    let arch = h.architecture;
    let chain = arch.shape_chain();
    let mut s = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(
        s,
        "file: {} ({} bytes, format version {})",
        path.display(),
        bytes.len(),
        h.format_version
    );
    let _ = writeln!(s, "task: {}", h.task);
    let _ = writeln!(
        s,
        "architecture: F={} -> conv({}x{}) {:?} -> pool({}) {:?} -> conv({}x{}) {:?} -> pool({}) {:?} -> flatten {} -> dense {} -> {} classes",
        arch.feature_count,
        arch.conv1_filters,
        arch.kernel_size,
        chain.conv1,
        arch.pool_size,
        chain.pool1,
        arch.conv2_filters,
        arch.kernel_size,
        chain.conv2,
        arch.pool_size,
        chain.pool2,
        chain.flatten,
        arch.dense_units,
        arch.class_count
    );
    let _ = writeln!(s, "parameters:");
    let mut total = 0u64;
    for t in &h.tensors {
        let _ = writeln!(
            s,
            "  {:<15} {:?} offset={} bytes={}",
            t.name, t.shape, t.offset, t.bytes
        );
        total += t.bytes / 8;
    }
    let _ = writeln!(s, "  total {total}");
    let _ = writeln!(s, "classes:");
    for (i, c) in h.class_names.iter().enumerate() {
        let _ = writeln!(s, "  {i}: {c}");
    }
    let _ = writeln!(
        s,
        "features ({}): {}",
        h.feature_names.len(),
        h.feature_names.join(", ")
    );
    let degenerate: Vec<&str> = h
        .feature_names
        .iter()
        .zip(&h.standardizer.degenerate)
        .filter(|(_, &d)| d)
        .map(|(n, _)| n.as_str())
        .collect();
    if !degenerate.is_empty() {
        let _ = writeln!(
            s,
            "constant features (std set to 1): {}",
            degenerate.join(", ")
        );
    }
    let _ = writeln!(s, "taxonomy:");
    for line in h.taxonomy.to_text().lines() {
        let _ = writeln!(s, "  {line}");
    }
    let m = &h.metadata;
    let c = &m.config;
    let _ = writeln!(
        s,
        "training: data={} label_column={} seed={} epochs={} batch_size={} lr={} val_split={} early_stop_patience={} limit_per_class={}",
        m.data_source,
        m.label_column,
        c.seed,
        c.epochs,
        c.batch_size,
        c.adam.lr,
        c.val_fraction,
        c.early_stop_patience,
        m.limit_per_class.map_or_else(|| "none".into(), |v| v.to_string())
    );
    for (i, e) in m.history.epochs.iter().enumerate() {
        let _ = writeln!(s, "  {}", epoch_line(e, i, c.epochs));
    }
    if let Some(b) = m.history.best_epoch {
        let _ = writeln!(
            s,
            "best epoch: {}{}",
            b + 1,
            if m.history.stopped_early {
                " (stopped early)"
            } else {
                ""
            }
        );
    }
    out.write_all(s.as_bytes()).map_err(data)
}
