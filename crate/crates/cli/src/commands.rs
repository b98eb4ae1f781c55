use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use quanv_core::data::{
    dataset_to_idx, export_feature_map_pgm, load_csv, load_idx, subsample_indices,
    synthetic_dataset, Dataset, FeatureDataset, Split, CACHE_MAGIC,
};
use quanv_core::metrics::MetricsReport;
use quanv_core::nn::{classifier_head, DenseModel, CHECKPOINT_MAGIC};
use quanv_core::quanv::precompute_features;
use quanv_core::rng::{derive_seed, streams};
use quanv_core::sim::{build_random_layers, CircuitSpec};
use quanv_core::train::{
    compare_runs, emit_curves, evaluate, history_csv, train as run_training, RunHistory, Samples,
    TrainConfig,
};

use crate::manifest::{sidecar, RunManifest, Seeds};
use crate::{
    CircuitArgs, CliError, CompareArgs, ConvertArgs, DataArgs, EvalArgs, ExtractArgs, Format,
    InspectArgs, Mode, SynthArgs, TrainArgs,
};

/// Errors while producing outputs are runtime failures; everything else
/// the core reports is about the inputs.
fn output_err(e: quanv_core::Error) -> CliError {
    match e {
        quanv_core::Error::Io { .. } => CliError::runtime(e.to_string()),
        other => other.into(),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))
}

fn require<'a, T>(value: &'a Option<T>, flag: &str, mode: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::input(format!("{flag} is required in {mode} mode")))
}

fn load_data(
    images: &Path,
    labels: Option<&Path>,
    format: Format,
    height: usize,
    width: usize,
    split: Split,
) -> Result<(Dataset, Vec<PathBuf>), CliError> {
    match format {
        Format::Idx => {
            let labels =
                labels.ok_or_else(|| CliError::input("--labels is required for IDX input"))?;
            let ds = load_idx(images, labels, split)?;
            Ok((ds, vec![images.to_path_buf(), labels.to_path_buf()]))
        }
        Format::Csv => Ok((
            load_csv(images, height, width, split)?,
            vec![images.to_path_buf()],
        )),
    }
}

fn load_data_args(d: &DataArgs, split: Split) -> Result<(Dataset, Vec<PathBuf>), CliError> {
    load_data(
        &d.images,
        d.labels.as_deref(),
        d.format,
        d.height,
        d.width,
        split,
    )
}

/// Seeded subsample indices; `n == 0` keeps everything in source order.
fn draw(len: usize, n: usize, seed: u64) -> Result<Vec<usize>, CliError> {
    if n == 0 {
        Ok((0..len).collect())
    } else {
        Ok(subsample_indices(len, n, seed)?)
    }
}

pub fn extract(a: &ExtractArgs, args: &[String]) -> Result<(), CliError> {
    let (ds, inputs) = load_data_args(&a.data, Split::Train)?;
    let ansatz = build_random_layers(a.seed, a.layers, 4)?;
    let fd = precompute_features(&ds.images, &ds.labels, &ansatz, a.threads, Some(&a.out))
        .map_err(output_err)?;
    println!(
        "wrote {} feature maps of {}x{}x4 to {} (ansatz seed {}, {} layer(s))",
        fd.len(),
        fd.height,
        fd.width,
        a.out.display(),
        a.seed,
        a.layers
    );

    let mut m = RunManifest::new("extract", args)
        .with_inputs(&inputs)?
        .with_outputs(std::slice::from_ref(&a.out))?;
    m.seeds = Seeds {
        ansatz_seed: Some(a.seed),
        ..Seeds::default()
    };
    m.ansatz = Some(ansatz);
    m.config = json!({
        "layers": a.layers,
        "format": format!("{:?}", a.data.format).to_lowercase(),
        "count": fd.len(),
        "patch_order": "row-major",
    });
    m.write(&sidecar(&a.out))
}

struct PreparedData {
    train: Samples,
    val: Samples,
    train_indices: Vec<usize>,
    val_indices: Vec<usize>,
    ansatz: Option<CircuitSpec>,
    inputs: Vec<PathBuf>,
}

fn prepare_qnn(a: &TrainArgs, train_seed: u64, val_seed: u64) -> Result<PreparedData, CliError> {
    let train_path = require(&a.train_cache, "--train-cache", "qnn")?;
    let val_path = require(&a.val_cache, "--val-cache", "qnn")?;
    let train_fd = FeatureDataset::load(train_path, None)?;
    let seed = a.seed.unwrap_or(train_fd.ansatz_seed);
    let layers = a.layers.unwrap_or(train_fd.ansatz_layers);
    train_fd.check_stamp(seed, layers)?;
    let val_fd = FeatureDataset::load(val_path, Some((seed, layers)))?;

    let train_indices = draw(train_fd.len(), a.train_n, train_seed)?;
    let val_indices = draw(val_fd.len(), a.val_n, val_seed)?;
    let t = train_fd.select(&train_indices);
    let v = val_fd.select(&val_indices);
    Ok(PreparedData {
        train: Samples::new(t.flat_inputs(), t.labels)?,
        val: Samples::new(v.flat_inputs(), v.labels)?,
        train_indices,
        val_indices,
        ansatz: Some(build_random_layers(seed, layers as usize, 4)?),
        inputs: vec![train_path.clone(), val_path.clone()],
    })
}

fn prepare_baseline(
    a: &TrainArgs,
    train_seed: u64,
    val_seed: u64,
) -> Result<PreparedData, CliError> {
    let ti = require(&a.train_images, "--train-images", "baseline")?;
    let vi = require(&a.val_images, "--val-images", "baseline")?;
    let (train_ds, mut inputs) = load_data(
        ti,
        a.train_labels.as_deref(),
        a.format,
        a.height,
        a.width,
        Split::Train,
    )?;
    let (val_ds, val_inputs) = load_data(
        vi,
        a.val_labels.as_deref(),
        a.format,
        a.height,
        a.width,
        Split::Val,
    )?;
    inputs.extend(val_inputs);

    let train_indices = draw(train_ds.len(), a.train_n, train_seed)?;
    let val_indices = draw(val_ds.len(), a.val_n, val_seed)?;
    let t = train_ds.select(&train_indices);
    let v = val_ds.select(&val_indices);
    Ok(PreparedData {
        train: Samples::new(t.flat_inputs(), t.labels)?,
        val: Samples::new(v.flat_inputs(), v.labels)?,
        train_indices,
        val_indices,
        ansatz: None,
        inputs,
    })
}

pub fn train(a: &TrainArgs, args: &[String]) -> Result<(), CliError> {
    let train_seed = derive_seed(a.data_seed, streams::TRAIN_SUBSAMPLE);
    let val_seed = derive_seed(a.data_seed, streams::VAL_SUBSAMPLE);
    let data = match a.mode {
        Mode::Qnn => prepare_qnn(a, train_seed, val_seed)?,
        Mode::Baseline => prepare_baseline(a, train_seed, val_seed)?,
    };
    let input_dim = data
        .train
        .dim()
        .ok_or_else(|| CliError::input("training set is empty"))?;

    let mut config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        data_seed: a.data_seed,
        init_seed: a.init_seed,
        ansatz_seed: data.ansatz.as_ref().map_or(0, |c| c.seed),
        ..TrainConfig::default()
    };
    config.adam.learning_rate = a.lr;
    let mut model = config.init_model(&classifier_head(input_dim, a.hidden))?;
    let name = match a.mode {
        Mode::Qnn => "Hybrid QNN",
        Mode::Baseline => "Classical baseline",
    };
    let history = run_training(&mut model, &data.train, &data.val, &config, name)?;

    create_dir(&a.out_dir)?;
    let checkpoint = a.out_dir.join("model.qnvm");
    model.save(&checkpoint).map_err(output_err)?;
    let history_json = a.out_dir.join("history.json");
    history.save_json(&history_json).map_err(output_err)?;
    let history_csv_path = a.out_dir.join("history.csv");
    write_file(&history_csv_path, history_csv(&history))?;
    let mut outputs = vec![checkpoint, history_json, history_csv_path];
    if !history.epochs.is_empty() {
        outputs.extend(emit_curves(&history, &a.out_dir, "curves").map_err(output_err)?);
    }

    for e in &history.epochs {
        println!(
            "epoch {:>3}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}  {:.1} ms",
            e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy, e.epoch_ms
        );
    }
    if let Some(r) = &history.final_metrics {
        print!("{}", metrics_table(r));
    }

    let mut m = RunManifest::new("train", args)
        .with_inputs(&data.inputs)?
        .with_outputs(&outputs)?;
    m.seeds = Seeds {
        data_seed: Some(a.data_seed),
        init_seed: Some(a.init_seed),
        ansatz_seed: data.ansatz.as_ref().map(|c| c.seed),
    };
    m.ansatz = data.ansatz;
    m.train_indices = Some(data.train_indices);
    m.val_indices = Some(data.val_indices);
    m.config = json!({
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.adam.learning_rate,
        "beta1": config.adam.beta1,
        "beta2": config.adam.beta2,
        "epsilon": config.adam.epsilon,
        "shuffle_each_epoch": config.shuffle_each_epoch,
        "hidden": a.hidden,
        "input_dim": input_dim,
        "train_n": data.train.len(),
        "val_n": data.val.len(),
    });
    m.write(&a.out_dir.join("manifest.json"))
}

pub fn metrics_table(r: &MetricsReport) -> String {
    let c = &r.confusion;
    let mut out = String::new();
    for (name, v) in [
        ("accuracy", r.accuracy),
        ("precision", r.precision),
        ("recall", r.recall),
        ("specificity", r.specificity),
        ("f1", r.f1),
        ("auc_roc", r.auc_roc),
    ] {
        out.push_str(&format!("{name:<12} {v:.4}\n"));
    }
    out.push_str(&format!(
        "{:<12} tp {} fp {} tn {} fn {}\n",
        "confusion", c.tp, c.fp, c.tn, c.fn_
    ));
    if !r.degenerate.is_empty() {
        let names: Vec<String> = r
            .degenerate
            .iter()
            .map(|d| {
                serde_json::to_value(d)
                    .map(|v| v.as_str().unwrap_or("").to_string())
                    .unwrap_or_default()
            })
            .collect();
        out.push_str(&format!(
            "{:<12} {} (zero denominator, reported as 0)\n",
            "undefined",
            names.join(", ")
        ));
    }
    out
}

pub fn eval(a: &EvalArgs, args: &[String]) -> Result<(), CliError> {
    let model = DenseModel::load(&a.checkpoint)?;
    let (samples, mut inputs) = match (&a.cache, &a.images) {
        (Some(cache), None) => {
            let fd = FeatureDataset::load(cache, None)?;
            (
                Samples::new(fd.flat_inputs(), fd.labels)?,
                vec![cache.clone()],
            )
        }
        (None, Some(images)) => {
            let (ds, inputs) = load_data(
                images,
                a.labels.as_deref(),
                a.format,
                a.height,
                a.width,
                Split::Test,
            )?;
            (Samples::new(ds.flat_inputs(), ds.labels)?, inputs)
        }
        _ => return Err(CliError::input("give exactly one of --cache or --images")),
    };
    inputs.push(a.checkpoint.clone());
    let indices = if samples.is_empty() {
        Vec::new()
    } else {
        draw(
            samples.len(),
            a.n,
            derive_seed(a.data_seed, streams::VAL_SUBSAMPLE),
        )?
    };
    let picked = Samples::new(
        indices.iter().map(|&i| samples.inputs[i].clone()).collect(),
        indices.iter().map(|&i| samples.labels[i]).collect(),
    )?;
    let report = evaluate(&model, &picked)?;
    print!("{}", metrics_table(&report));

    if let Some(path) = &a.json {
        let text =
            serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?;
        write_file(path, text)?;
        let mut m = RunManifest::new("eval", args)
            .with_inputs(&inputs)?
            .with_outputs(std::slice::from_ref(path))?;
        m.seeds.data_seed = Some(a.data_seed);
        m.val_indices = Some(indices);
        m.config = json!({ "n": picked.len() });
        m.write(&sidecar(path))?;
    }
    Ok(())
}

pub fn compare(a: &CompareArgs, args: &[String]) -> Result<(), CliError> {
    let qnn = RunHistory::load_json(&a.qnn)?;
    let baseline = RunHistory::load_json(&a.baseline)?;
    let report = compare_runs(&qnn, &baseline)?;
    let table = report.to_table();
    print!("{table}");

    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        let json_path = dir.join("comparison.json");
        write_file(&json_path, report.to_json().map_err(output_err)?)?;
        let txt_path = dir.join("comparison.txt");
        write_file(&txt_path, &table)?;
        let mut outputs = vec![json_path, txt_path];
        outputs.extend(
            report
                .emit_overlay_charts(dir, "comparison")
                .map_err(output_err)?,
        );
        let mut m = RunManifest::new("compare", args)
            .with_inputs(&[a.qnn.clone(), a.baseline.clone()])?
            .with_outputs(&outputs)?;
        m.config = json!({ "epochs": qnn.epochs.len() });
        m.write(&dir.join("manifest.json"))?;
    }
    Ok(())
}

fn print_gates(c: &CircuitSpec) {
    for (i, g) in c.gates.iter().enumerate() {
        println!("{i:>4}  {g}");
    }
}

pub fn inspect(a: &InspectArgs, args: &[String]) -> Result<(), CliError> {
    let bytes =
        fs::read(&a.path).map_err(|e| CliError::input(format!("{}: {e}", a.path.display())))?;
    if bytes.starts_with(CACHE_MAGIC) {
        let fd = FeatureDataset::from_bytes(&bytes, &a.path)?;
        println!("feature cache {}", a.path.display());
        println!("  count       {}", fd.len());
        println!("  shape       {}x{}x4", fd.height, fd.width);
        println!("  ansatz seed {}", fd.ansatz_seed);
        println!("  layers      {}", fd.ansatz_layers);
        println!("  patch order row-major");
        let positives = fd.labels.iter().filter(|&&l| l == 1).count();
        println!(
            "  labels      {} positive, {} negative",
            positives,
            fd.len() - positives
        );
        if a.show_circuit {
            print_gates(&build_random_layers(
                fd.ansatz_seed,
                fd.ansatz_layers as usize,
                4,
            )?);
        }
        if a.export_pgm {
            let fm = fd.features.get(a.index).ok_or_else(|| {
                CliError::input(format!(
                    "index {} out of range for {} feature maps",
                    a.index,
                    fd.len()
                ))
            })?;
            let dir = a.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            create_dir(&dir)?;
            let mut outputs = Vec::new();
            for ch in 0..4 {
                let p = dir.join(format!("feature_{}_ch{ch}.pgm", a.index));
                export_feature_map_pgm(fm, ch, &p).map_err(output_err)?;
                println!("wrote {}", p.display());
                outputs.push(p);
            }
            let mut m = RunManifest::new("inspect", args)
                .with_inputs(std::slice::from_ref(&a.path))?
                .with_outputs(&outputs)?;
            m.seeds.ansatz_seed = Some(fd.ansatz_seed);
            m.config = json!({ "index": a.index });
            m.write(&dir.join(format!("feature_{}.manifest.json", a.index)))?;
        }
        Ok(())
    } else if bytes.starts_with(CHECKPOINT_MAGIC) {
        let model = DenseModel::from_bytes(&bytes, &a.path)?;
        println!("checkpoint {}", a.path.display());
        for (k, s) in model.layers.iter().enumerate() {
            println!(
                "  layer {k}     {} -> {} {:?}",
                s.in_dim, s.out_dim, s.activation
            );
        }
        println!("  parameters  {}", model.parameter_count());
        println!("  adam step   {}", model.step);
        Ok(())
    } else if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        let text = String::from_utf8_lossy(&bytes);
        let c = CircuitSpec::from_json(&text)?;
        println!("circuit {}", a.path.display());
        println!("  qubits      {}", c.n_qubits);
        println!("  seed        {}", c.seed);
        println!("  layers      {}", c.n_layers);
        println!("  gates       {}", c.gates.len());
        if a.show_circuit {
            print_gates(&c);
        }
        Ok(())
    } else {
        Err(CliError::input(format!(
            "{}: unrecognized file (expected QNVF, QNVM or circuit JSON)",
            a.path.display()
        )))
    }
}

pub fn circuit(a: &CircuitArgs, args: &[String]) -> Result<(), CliError> {
    let c = build_random_layers(a.seed, a.layers, a.qubits)?;
    write_file(&a.out, c.to_json().map_err(output_err)?)?;
    println!("wrote {} gates to {}", c.gates.len(), a.out.display());
    let mut m = RunManifest::new("circuit", args).with_outputs(std::slice::from_ref(&a.out))?;
    m.seeds.ansatz_seed = Some(a.seed);
    m.ansatz = Some(c);
    m.config = json!({ "layers": a.layers, "qubits": a.qubits });
    m.write(&sidecar(&a.out))
}

pub fn synth(a: &SynthArgs, args: &[String]) -> Result<(), CliError> {
    let ds = synthetic_dataset(a.n, a.side, a.seed)?;
    dataset_to_idx(&ds, &a.images, &a.labels).map_err(output_err)?;
    println!(
        "wrote {} synthetic {}x{} images to {}",
        ds.len(),
        a.side,
        a.side,
        a.images.display()
    );
    let mut m =
        RunManifest::new("synth", args).with_outputs(&[a.images.clone(), a.labels.clone()])?;
    m.seeds.data_seed = Some(a.seed);
    m.config = json!({ "n": a.n, "side": a.side });
    m.write(&sidecar(&a.images))
}

pub fn convert(a: &ConvertArgs, args: &[String]) -> Result<(), CliError> {
    let ds = load_csv(&a.csv, a.height, a.width, Split::Train)?;
    dataset_to_idx(&ds, &a.images, &a.labels).map_err(output_err)?;
    println!("converted {} rows to {}", ds.len(), a.images.display());
    let mut m = RunManifest::new("convert", args)
        .with_inputs(std::slice::from_ref(&a.csv))?
        .with_outputs(&[a.images.clone(), a.labels.clone()])?;
    m.config = json!({ "height": a.height, "width": a.width });
    m.write(&sidecar(&a.images))
}
