//! Training protocol, evaluation and the QNN-vs-baseline comparison.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate_scores, MetricsReport};
use crate::nn::{classify, mean_bce_loss, AdamConfig, DenseModel, LayerSpec};
use crate::plot::{line_chart, Series};
use crate::rng::{streams, SeededRng};

/// Flat input vectors with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Samples {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|x| x.len() != first.len()) {
                return Err(Error::Shape("inputs have mixed lengths".into()));
            }
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Validation(format!("label {l} is not binary")));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub data_seed: u64,
    pub init_seed: u64,
    pub ansatz_seed: u64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 4,
            adam: AdamConfig::default(),
            data_seed: 0,
            init_seed: 0,
            ansatz_seed: 0,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn init_model(&self, specs: &[LayerSpec]) -> Result<DenseModel> {
        DenseModel::init(specs, self.init_seed)
    }

    /// Optimizer steps in one epoch over `n` samples.
    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub epoch_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub model: String,
    pub epochs: Vec<EpochRecord>,
    pub final_metrics: Option<MetricsReport>,
}

impl RunHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn mean_epoch_ms(&self) -> f64 {
        if self.epochs.is_empty() {
            return 0.0;
        }
        self.epochs.iter().map(|e| e.epoch_ms).sum::<f64>() / self.epochs.len() as f64
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn series(&self, f: impl Fn(&EpochRecord) -> f64) -> Vec<f64> {
        self.epochs.iter().map(f).collect()
    }
}

/// Mean BCE loss and accuracy of `model` over every sample.
pub fn loss_and_accuracy(model: &DenseModel, data: &Samples) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Ok((0.0, 0.0));
    }
    let preds = model.predict_batch(&data.inputs)?;
    let correct = preds
        .iter()
        .zip(&data.labels)
        .filter(|(&p, &y)| classify(p) == y)
        .count();
    Ok((
        mean_bce_loss(&preds, &data.labels),
        correct as f64 / data.len() as f64,
    ))
}

/// Trains `model` in place. Each epoch visits a seeded permutation of the
/// training set in mini-batches of `batch_size` (the last batch may be
/// shorter), takes one Adam step per batch on the mean gradient, then
/// scores the full training and validation sets.
pub fn train(
    model: &mut DenseModel,
    train_data: &Samples,
    val_data: &Samples,
    config: &TrainConfig,
    name: &str,
) -> Result<RunHistory> {
    config.adam.validate()?;
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    for (what, data) in [("training", train_data), ("validation", val_data)] {
        if data.is_empty() {
            return Err(Error::Config(format!("{what} set is empty")));
        }
        if data.dim() != Some(model.input_dim()) {
            return Err(Error::Shape(format!(
                "{what} inputs have {} values, model expects {}",
                data.dim().unwrap_or(0),
                model.input_dim()
            )));
        }
    }

    let mut history = RunHistory {
        model: name.to_string(),
        epochs: Vec::with_capacity(config.epochs),
        final_metrics: None,
    };
    if config.epochs == 0 {
        return Ok(history);
    }

    let mut shuffler = SeededRng::for_stream(config.data_seed, streams::EPOCH_SHUFFLE);
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_data.len()).collect();
        if config.shuffle_each_epoch {
            shuffler.shuffle(&mut order);
        }
        for batch in order.chunks(config.batch_size) {
            let inputs: Vec<&[f64]> = batch
                .iter()
                .map(|&i| train_data.inputs[i].as_slice())
                .collect();
            let labels: Vec<u8> = batch.iter().map(|&i| train_data.labels[i]).collect();
            let (_, grads) = model.batch_gradients(&inputs, &labels)?;
            model.adam_step(&grads, &config.adam)?;
        }
        let (train_loss, train_accuracy) = loss_and_accuracy(model, train_data)?;
        let (val_loss, val_accuracy) = loss_and_accuracy(model, val_data)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
            epoch_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    history.final_metrics = Some(evaluate(model, val_data)?);
    Ok(history)
}

pub fn evaluate(model: &DenseModel, data: &Samples) -> Result<MetricsReport> {
    if data.is_empty() {
        return Err(Error::Config("cannot evaluate an empty dataset".into()));
    }
    let scores = model.predict_batch(&data.inputs)?;
    evaluate_scores(&scores, &data.labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub mean_epoch_ms: f64,
    /// Training accuracy minus validation accuracy.
    pub generalization_gap: f64,
}

impl ModelSummary {
    fn of(h: &RunHistory) -> Self {
        let last = h.last().cloned().unwrap_or(EpochRecord {
            epoch: 0,
            train_loss: 0.0,
            train_accuracy: 0.0,
            val_loss: 0.0,
            val_accuracy: 0.0,
            epoch_ms: 0.0,
        });
        Self {
            model: h.model.clone(),
            train_accuracy: last.train_accuracy,
            val_accuracy: last.val_accuracy,
            train_loss: last.train_loss,
            val_loss: last.val_loss,
            mean_epoch_ms: h.mean_epoch_ms(),
            generalization_gap: last.train_accuracy - last.val_accuracy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Leader {
    Qnn,
    Baseline,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub qnn: f64,
    pub baseline: f64,
    /// `qnn - baseline`.
    pub delta: f64,
    pub leader: Leader,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub qnn: ModelSummary,
    pub baseline: ModelSummary,
    pub rows: Vec<ComparisonRow>,
    pub qnn_history: RunHistory,
    pub baseline_history: RunHistory,
}

fn row(metric: &str, qnn: f64, baseline: f64, higher_is_better: bool) -> ComparisonRow {
    let leader = if qnn == baseline {
        Leader::Tie
    } else if (qnn > baseline) == higher_is_better {
        Leader::Qnn
    } else {
        Leader::Baseline
    };
    ComparisonRow {
        metric: metric.to_string(),
        qnn,
        baseline,
        delta: qnn - baseline,
        leader,
    }
}

pub fn compare_runs(qnn: &RunHistory, baseline: &RunHistory) -> Result<ComparisonReport> {
    if qnn.epochs.len() != baseline.epochs.len() {
        return Err(Error::Config(format!(
            "histories cover {} and {} epochs",
            qnn.epochs.len(),
            baseline.epochs.len()
        )));
    }
    let q = ModelSummary::of(qnn);
    let b = ModelSummary::of(baseline);
    let rows = vec![
        row(
            "Training Accuracy",
            q.train_accuracy,
            b.train_accuracy,
            true,
        ),
        row("Validation Accuracy", q.val_accuracy, b.val_accuracy, true),
        row("Training Loss", q.train_loss, b.train_loss, false),
        row("Validation Loss", q.val_loss, b.val_loss, false),
        row(
            "Generalization Gap",
            q.generalization_gap,
            b.generalization_gap,
            false,
        ),
        row(
            "Mean Epoch Time (ms)",
            q.mean_epoch_ms,
            b.mean_epoch_ms,
            false,
        ),
    ];
    Ok(ComparisonReport {
        qnn: q,
        baseline: b,
        rows,
        qnn_history: qnn.clone(),
        baseline_history: baseline.clone(),
    })
}

impl ComparisonReport {
    /// Aligned text table, one row per metric.
    pub fn to_table(&self) -> String {
        let headers = [
            "Metric",
            "Hybrid QNN",
            "Classical baseline",
            "Delta",
            "Leader",
        ];
        let body: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                let prec = if r.metric.contains("Time") { 2 } else { 4 };
                [
                    r.metric.clone(),
                    format!("{:.prec$}", r.qnn),
                    format!("{:.prec$}", r.baseline),
                    format!("{:+.prec$}", r.delta),
                    match r.leader {
                        Leader::Qnn => "QNN".into(),
                        Leader::Baseline => "baseline".into(),
                        Leader::Tie => "tie".into(),
                    },
                ]
            })
            .collect();
        let mut widths = headers.map(str::len);
        for cells in &body {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            for (k, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if k == 0 {
                    let _ = write!(out, "{c:<w$}");
                } else {
                    let _ = write!(out, "  {c:>w$}");
                }
            }
            out.push('\n');
        };
        line(&mut out, &headers);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(
            &mut out,
            &rule.iter().map(String::as_str).collect::<Vec<_>>(),
        );
        for cells in &body {
            line(
                &mut out,
                &cells.iter().map(String::as_str).collect::<Vec<_>>(),
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Overlaid accuracy and loss charts for both runs.
    pub fn emit_overlay_charts(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
        let (q, b) = (&self.qnn_history, &self.baseline_history);
        let charts = [
            (
                "accuracy",
                "Training and validation accuracy",
                [
                    q.series(|e| e.train_accuracy),
                    q.series(|e| e.val_accuracy),
                    b.series(|e| e.train_accuracy),
                    b.series(|e| e.val_accuracy),
                ],
            ),
            (
                "loss",
                "Training and validation loss",
                [
                    q.series(|e| e.train_loss),
                    q.series(|e| e.val_loss),
                    b.series(|e| e.train_loss),
                    b.series(|e| e.val_loss),
                ],
            ),
        ];
        let names = ["QNN train", "QNN val", "baseline train", "baseline val"];
        let mut paths = Vec::new();
        for (quantity, title, values) in &charts {
            let series: Vec<Series> = names
                .iter()
                .zip(values)
                .map(|(name, v)| Series { name, values: v })
                .collect();
            let path = dir.join(format!("{prefix}_{quantity}.svg"));
            fs::write(&path, line_chart(title, quantity, &series))
                .map_err(|e| Error::io(&path, e))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

pub const CURVE_CSV_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc,epoch_ms";
pub const HISTORY_CSV_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

/// Per-epoch metrics without wall-clock timing; identical seeds and inputs
/// produce identical bytes.
pub fn history_csv(history: &RunHistory) -> String {
    let mut out = format!("{HISTORY_CSV_HEADER}\n");
    for e in &history.epochs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
        );
    }
    out
}

/// Writes `<prefix>.csv` with every per-epoch column including wall time,
/// plus accuracy, loss and epoch-time SVG charts. Returns the written paths.
pub fn emit_curves(history: &RunHistory, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    if history.epochs.is_empty() {
        return Err(Error::Config("history has no epochs to plot".into()));
    }
    let mut csv = format!("{CURVE_CSV_HEADER}\n");
    for e in &history.epochs {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy, e.epoch_ms
        );
    }
    let csv_path = dir.join(format!("{prefix}.csv"));
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    let mut paths = vec![csv_path];

    let acc = [
        history.series(|e| e.train_accuracy),
        history.series(|e| e.val_accuracy),
    ];
    let loss = [
        history.series(|e| e.train_loss),
        history.series(|e| e.val_loss),
    ];
    let time = [history.series(|e| e.epoch_ms)];
    type Chart<'a> = (&'a str, &'a [Vec<f64>], &'a [&'a str]);
    let charts: [Chart; 3] = [
        ("accuracy", &acc, &["train", "val"]),
        ("loss", &loss, &["train", "val"]),
        ("epoch_ms", &time, &["epoch time"]),
    ];
    for (quantity, values, names) in charts {
        let series: Vec<Series> = names
            .iter()
            .zip(values)
            .map(|(name, v)| Series { name, values: v })
            .collect();
        let title = format!("{} {quantity}", history.model);
        let path = dir.join(format!("{prefix}_{quantity}.svg"));
        fs::write(&path, line_chart(&title, quantity, &series)).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
