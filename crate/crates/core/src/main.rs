//! Pipeline command-line interface. Every stage reads and writes files so
//! the pipeline can run stepwise or scripted end-to-end; identical inputs
//! and seeds produce byte-identical outputs.

use clap::{Parser, Subcommand, ValueEnum};
use packsense::augment::{self, OversampleConfig, OversampleMode};
use packsense::compress;
use packsense::config::PipelineConfig;
use packsense::dataio::{
    self, csvio,
    manifest::{load_json, save_json, StreamEntry, StreamManifest, WindowRecord, WindowSet},
    Label, LabeledDataset, TimeWindow, NUM_CLASSES, TARGET_CLASSES,
};
use packsense::decide::{
    self, EvalReport, SelectedThresholds, ThresholdPolicy,
};
use packsense::nnet::{self, SoftDecision, TrainConfig};
use packsense::runtime::{self, Model, QEngine};
use packsense::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "packsense",
    about = "Package-lifecycle event classification: data synthesis, training, compression, and deployment tooling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Smote,
    Adasyn,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic accelerometer streams and a manifest.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Window the generated streams and split them into train/val/test.
    Split {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Manifest file (or the directory containing manifest.json).
        #[arg(long = "in")]
        input: PathBuf,
        /// Output directory for train.json / val.json / test.json.
        #[arg(long)]
        out: PathBuf,
        /// Window length in samples.
        #[arg(long, default_value_t = 128)]
        v_l: usize,
        /// Window stride in samples.
        #[arg(long, default_value_t = 64)]
        stride: usize,
    },
    /// Oversample the minority target class of a window set.
    Augment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured oversampling mode.
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Train the convolutional classifier on train/val window sets.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Train and validation window sets, in that order.
        #[arg(long = "in", num_args = 2)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-epoch history CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Evaluate a model on a window set at fixed thresholds.
    Eval {
        /// Model file and window set, in that order.
        #[arg(long = "in", num_args = 2)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Threshold-selection artifact from `sweep`; defaults to zero
        /// thresholds (pure argmax).
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
        /// Row label carried into `report`.
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Sweep the rejection threshold grid and select operating points.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model file and validation window set, in that order.
        #[arg(long = "in", num_args = 2)]
        input: Vec<PathBuf>,
        /// Precision-recall curve output.
        #[arg(long)]
        out: PathBuf,
        /// Selected-thresholds JSON output.
        #[arg(long)]
        select: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Zero the globally smallest-magnitude weights.
    Prune {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep-mask JSON for `rewind`.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Overrides the configured prune ratio.
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Retrain a pruned model with masked weights frozen at zero.
    Rewind {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Pruned model, mask, train set, and validation set, in order.
        #[arg(long = "in", num_args = 4)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fold batch norm, calibrate on representative windows, and quantize.
    Quantize {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Float model, train set, and validation set, in order.
        #[arg(long = "in", num_args = 3)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Entropy-encode a serialized model.
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also emit the encoded bytes as a C source array.
        #[arg(long)]
        c_array: Option<PathBuf>,
    },
    /// Classify the windows of a set with a float or quantized model.
    Infer {
        /// Model file and window set, in that order.
        #[arg(long = "in", num_args = 2)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Report per-inference energy and battery lifetime.
    Energy {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        wakes_per_day: u64,
        #[arg(long, default_value_t = 500.0)]
        overhead_ms: f64,
        #[arg(long, default_value_t = 4000.0)]
        battery_mwh: f64,
    },
    /// Merge named evaluation reports into one table document.
    Report {
        #[arg(long = "in", num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: category={}: {e}", e.category_name());
        let code = match e.category() {
            packsense::error::ErrorCategory::MissingInput => 2,
            packsense::error::ErrorCategory::InvalidConfig => 3,
            packsense::error::ErrorCategory::Internal => 4,
        };
        std::process::exit(code);
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::from_file(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn load_model(path: &Path) -> Result<Model> {
    runtime::deserialize(&read_bytes(path)?)
}

fn load_window_set(path: &Path) -> Result<LabeledDataset> {
    let set: WindowSet = load_json(path)?;
    set.to_dataset()
}

fn load_policy(path: &Option<PathBuf>) -> Result<ThresholdPolicy> {
    match path {
        Some(p) => {
            let sel: SelectedThresholds = load_json(p)?;
            Ok(sel.policy)
        }
        None => Ok(ThresholdPolicy::zero()),
    }
}

/// Eval-mode class probabilities from either model kind.
fn model_probs(model: &Model, windows: &[TimeWindow]) -> Result<Vec<SoftDecision>> {
    match model {
        Model::Float(m) => nnet::eval_probs(m, windows),
        Model::Quantized(q) => {
            let engine = QEngine::new(q)?;
            windows.iter().map(|w| engine.forward(w)).collect()
        }
    }
}

/// Inverse-frequency class weights, tolerating absent classes: a class with
/// no windows keeps weight 1.0 (it contributes no samples either way).
fn lenient_class_weights(ds: &LabeledDataset) -> Vec<f64> {
    let counts = ds.class_counts();
    let n: usize = counts.iter().sum();
    let mut weights = vec![1.0; NUM_CLASSES];
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            weights[c] = n as f64 / (NUM_CLASSES as f64 * count as f64);
        } else {
            eprintln!(
                "warning: class {} absent from the training set; weight left at 1.0",
                Label::from_index(c).expect("valid class index").name()
            );
        }
    }
    weights
}

#[derive(Serialize, Deserialize)]
struct NamedReport {
    name: String,
    report: EvalReport,
}

#[derive(Serialize, Deserialize)]
struct MaskFile {
    layers: Vec<Option<Vec<bool>>>,
}

#[derive(Serialize)]
struct EnergyReport {
    profile: runtime::EnergyProfile,
    energy: runtime::EnergyEstimate,
    wakes_per_day: u64,
    awake_overhead_ms: f64,
    battery_capacity_mwh: f64,
    /// None when zero wakes make the lifetime unbounded.
    lifetime_days: Option<f64>,
    unbounded: bool,
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { config, seed, out } => cmd_generate(&config, seed, &out),
        Command::Split {
            config,
            seed,
            input,
            out,
            v_l,
            stride,
        } => cmd_split(&config, seed, &input, &out, v_l, stride),
        Command::Augment {
            config,
            seed,
            input,
            out,
            method,
        } => cmd_augment(&config, seed, &input, &out, method),
        Command::Train {
            config,
            seed,
            input,
            out,
            history,
        } => cmd_train(&config, seed, &input, &out, &history),
        Command::Eval {
            input,
            out,
            thresholds,
            format,
            name,
        } => cmd_eval(&input, &out, &thresholds, format, &name),
        Command::Sweep {
            config,
            input,
            out,
            select,
            format,
        } => cmd_sweep(&config, &input, &out, &select, format),
        Command::Prune {
            config,
            input,
            out,
            mask,
            ratio,
        } => cmd_prune(&config, &input, &out, &mask, ratio),
        Command::Rewind {
            config,
            seed,
            input,
            out,
        } => cmd_rewind(&config, seed, &input, &out),
        Command::Quantize {
            config,
            seed,
            input,
            out,
        } => cmd_quantize(&config, seed, &input, &out),
        Command::Encode {
            input,
            out,
            c_array,
        } => cmd_encode(&input, &out, &c_array),
        Command::Infer {
            input,
            out,
            thresholds,
            format,
        } => cmd_infer(&input, &out, &thresholds, format),
        Command::Energy {
            config,
            out,
            wakes_per_day,
            overhead_ms,
            battery_mwh,
        } => cmd_energy(&config, &out, wakes_per_day, overhead_ms, battery_mwh),
        Command::Report { input, out, format } => cmd_report(&input, &out, format),
    }
}

fn cmd_generate(config: &Option<PathBuf>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let seed = seed.unwrap_or(42);
    let streams = dataio::generate_synthetic(&cfg.generator, seed)?;
    ensure_dir(out)?;
    let mut entries = Vec::with_capacity(streams.len());
    for (i, stream) in streams.iter().enumerate() {
        let file = format!("stream_{i:03}.csv");
        csvio::write_csv(&out.join(&file), &stream.samples, Some(stream.label))?;
        entries.push(StreamEntry {
            path: file,
            label: stream.label,
            samples: stream.samples.len(),
        });
    }
    let manifest = StreamManifest::new(cfg.generator.sample_rate, entries);
    save_json(&out.join("manifest.json"), &manifest)?;
    println!("wrote {} streams to {}", streams.len(), out.display());
    Ok(())
}

fn cmd_split(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    input: &Path,
    out: &Path,
    v_l: usize,
    stride: usize,
) -> Result<()> {
    let cfg = load_config(config)?;
    let mut spec = cfg.split;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let manifest_path = if input.is_dir() {
        input.join("manifest.json")
    } else {
        input.to_path_buf()
    };
    let manifest: StreamManifest = load_json(&manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut windows = Vec::new();
    for entry in &manifest.streams {
        let (samples, _) = csvio::read_csv(&base.join(&entry.path))?;
        windows.extend(dataio::window_stream(
            &samples,
            v_l,
            stride,
            Some(entry.label),
        )?);
    }
    let ds = LabeledDataset::new(windows)?;
    if ds.len() == 0 {
        return Err(Error::EmptyDataset(
            "no stream is long enough to window".into(),
        ));
    }
    let split = dataio::split_dataset(&ds, &spec)?;
    for w in &split.warnings {
        eprintln!("warning: {w}");
    }
    ensure_dir(out)?;
    save_json(&out.join("train.json"), &WindowSet::from_dataset(&split.train))?;
    save_json(&out.join("val.json"), &WindowSet::from_dataset(&split.val))?;
    save_json(&out.join("test.json"), &WindowSet::from_dataset(&split.test))?;
    println!(
        "windows: {} train / {} val / {} test",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(())
}

fn cmd_augment(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    input: &Path,
    out: &Path,
    method: Option<Method>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let mut ov: OversampleConfig = cfg.oversample;
    if let Some(s) = seed {
        ov.seed = s;
    }
    if let Some(m) = method {
        ov.mode = match m {
            Method::Smote => OversampleMode::Smote,
            Method::Adasyn => OversampleMode::Adasyn,
        };
    }
    let set: WindowSet = load_json(input)?;
    let ds = set.to_dataset()?;

    // Minority/majority among the target classes, by window count.
    let counts = ds.class_counts();
    let (minority_label, majority_label) = {
        let [a, b] = TARGET_CLASSES;
        if counts[a.index()] <= counts[b.index()] {
            (a, b)
        } else {
            (b, a)
        }
    };
    let minority = ds.of_class(minority_label);
    let majority = ds.of_class(majority_label);

    // Both techniques generate the ADASYN budget so they are comparable at
    // equal dataset sizes.
    let counts_per_window = augment::adasyn_counts(&minority, &majority, &ov)?;
    let batch = match ov.mode {
        OversampleMode::Adasyn => augment::adasyn_generate(&minority, &majority, &ov)?,
        OversampleMode::Smote => {
            let total = augment::match_smote_count(counts_per_window.iter().sum());
            augment::smote_generate(&minority, total, &ov)?
        }
    };

    // Map minority-pool provenance indices back to positions in the input
    // window set.
    let minority_positions: Vec<usize> = set
        .windows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.label == minority_label)
        .map(|(i, _)| i)
        .collect();
    let mut augmented = set.clone();
    for (w, p) in batch.windows.iter().zip(&batch.provenance) {
        augmented.windows.push(WindowRecord {
            label: minority_label,
            synthetic: true,
            parents: Some([
                minority_positions[p.selected],
                minority_positions[p.neighbor],
            ]),
            values: w.values().to_vec(),
        });
    }
    save_json(out, &augmented)?;
    println!(
        "added {} synthetic {} windows",
        batch.windows.len(),
        minority_label.name()
    );
    Ok(())
}

fn cmd_train(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    input: &[PathBuf],
    out: &Path,
    history: &Option<PathBuf>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let mut train_cfg: TrainConfig = cfg.train;
    if let Some(s) = seed {
        train_cfg.seed = s;
    }
    let train_set = load_window_set(&input[0])?;
    let val_set = load_window_set(&input[1])?;
    let v_l = train_set
        .v_l()
        .ok_or_else(|| Error::EmptyDataset("training set has no windows".into()))?;
    if train_cfg.class_weights.is_empty() {
        train_cfg.class_weights = lenient_class_weights(&train_set);
    }
    let model = nnet::default_architecture(v_l, NUM_CLASSES, train_cfg.seed)?;
    let (trained, hist) = nnet::train(&model, &train_set, &val_set, &train_cfg)?;
    write_bytes(out, &runtime::serialize_float(&trained))?;
    if let Some(h) = history {
        write_text(h, &hist.to_csv())?;
    }
    let last = hist.epochs.last();
    println!(
        "trained {} epochs; final val loss {}",
        hist.epochs.len(),
        last.map(|e| e.val_loss).unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_eval(
    input: &[PathBuf],
    out: &Path,
    thresholds: &Option<PathBuf>,
    format: OutputFormat,
    name: &str,
) -> Result<()> {
    let model = load_model(&input[0])?;
    let ds = load_window_set(&input[1])?;
    if ds.len() == 0 {
        return Err(Error::EmptyDataset(format!(
            "window set {} is empty",
            input[1].display()
        )));
    }
    let policy = load_policy(thresholds)?;
    let probs = model_probs(&model, ds.windows())?;
    let labels: Vec<Label> = ds
        .windows()
        .iter()
        .map(|w| w.label.expect("labeled window"))
        .collect();
    let report = decide::evaluate(&probs, &labels, &policy)?;
    let named = NamedReport {
        name: name.to_string(),
        report,
    };
    match format {
        OutputFormat::Json => save_json(out, &named)?,
        OutputFormat::Csv => write_text(out, &report_csv(std::slice::from_ref(&named)))?,
    }
    println!(
        "{name}: precision {:?} recall {:?}",
        named.report.precision, named.report.recall
    );
    Ok(())
}

fn cmd_sweep(
    config: &Option<PathBuf>,
    input: &[PathBuf],
    out: &Path,
    select: &Option<PathBuf>,
    format: OutputFormat,
) -> Result<()> {
    let cfg = load_config(config)?;
    let model = load_model(&input[0])?;
    let ds = load_window_set(&input[1])?;
    let probs = model_probs(&model, ds.windows())?;
    let labels: Vec<Label> = ds
        .windows()
        .iter()
        .map(|w| w.label.expect("labeled window"))
        .collect();
    let curve = decide::sweep(&probs, &labels, &decide::default_grid())?;
    match format {
        OutputFormat::Csv => write_text(out, &curve.to_csv())?,
        OutputFormat::Json => save_json(out, &curve)?,
    }
    if let Some(sel_path) = select {
        let sel = decide::select_thresholds(
            &curve,
            cfg.thresholds.precision_target,
            cfg.thresholds.recall_floor,
        )?;
        for w in &sel.warnings {
            eprintln!("warning: {w}");
        }
        save_json(sel_path, &sel)?;
        println!(
            "selected thresholds {:?}",
            sel.policy.thresholds
        );
    }
    Ok(())
}

fn cmd_prune(
    config: &Option<PathBuf>,
    input: &Path,
    out: &Path,
    mask_path: &Option<PathBuf>,
    ratio: Option<f64>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let ratio = ratio.unwrap_or(cfg.compress.prune_ratio);
    let Model::Float(model) = load_model(input)? else {
        return Err(Error::Config("prune expects a float model".into()));
    };
    let (pruned, mask) = compress::prune_l1(&model, ratio)?;
    write_bytes(out, &runtime::serialize_float(&pruned))?;
    if let Some(p) = mask_path {
        save_json(p, &MaskFile {
            layers: mask.layers.clone(),
        })?;
    }
    println!(
        "pruned {} of {} weights",
        mask.masked_count(),
        model.parameter_count()
    );
    Ok(())
}

fn cmd_rewind(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    input: &[PathBuf],
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let mut train_cfg = cfg.train;
    if let Some(s) = seed {
        train_cfg.seed = s;
    }
    let Model::Float(pruned) = load_model(&input[0])? else {
        return Err(Error::Config("rewind expects a float model".into()));
    };
    let mask_file: MaskFile = load_json(&input[1])?;
    let mask = packsense::nnet::WeightMask {
        layers: mask_file.layers,
    };
    let train_set = load_window_set(&input[2])?;
    let val_set = load_window_set(&input[3])?;
    if train_cfg.class_weights.is_empty() {
        train_cfg.class_weights = lenient_class_weights(&train_set);
    }
    let (rewound, _) = compress::rewind_retrain(
        &pruned,
        &mask,
        &train_set,
        &val_set,
        &train_cfg,
        cfg.compress.rewind_epochs,
    )?;
    write_bytes(out, &runtime::serialize_float(&rewound))?;
    println!(
        "rewound for {} epochs at lr {}",
        cfg.compress.rewind_epochs,
        train_cfg.final_epoch_lr()
    );
    Ok(())
}

fn cmd_quantize(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    input: &[PathBuf],
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let calib_seed = seed.unwrap_or(cfg.compress.calibration_seed);
    let Model::Float(model) = load_model(&input[0])? else {
        return Err(Error::Config("quantize expects a float model".into()));
    };
    let train_set = load_window_set(&input[1])?;
    let val_set = load_window_set(&input[2])?;
    let folded = compress::fold_batchnorm(&model)?;
    let (calib, warnings) = compress::select_calibration(
        &train_set,
        &val_set,
        cfg.compress.calibration_size,
        calib_seed,
    );
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let ranges = compress::calibrate(&folded, &calib)?;
    let quantized = compress::quantize(&folded, &ranges)?;
    write_bytes(out, &runtime::serialize_quantized(&quantized))?;
    println!("calibrated on {} windows", calib.len());
    Ok(())
}

fn cmd_encode(input: &Path, out: &Path, c_array: &Option<PathBuf>) -> Result<()> {
    let raw = read_bytes(input)?;
    // Validate before encoding: the container must parse.
    runtime::deserialize(&raw)?;
    let encoded = runtime::huffman_encode(&raw)?;
    let bytes = encoded.to_bytes();
    write_bytes(out, &bytes)?;
    if let Some(c_path) = c_array {
        write_text(c_path, &c_array_text(&bytes))?;
    }
    println!(
        "encoded {} bytes to {} ({:.1}%)",
        raw.len(),
        bytes.len(),
        100.0 * bytes.len() as f64 / raw.len() as f64
    );
    Ok(())
}

/// Source-embeddable form of the encoded model: one array of decimal bytes
/// plus a length constant.
fn c_array_text(bytes: &[u8]) -> String {
    let mut out = String::from("/* auto-generated encoded model */\n");
    out.push_str(&format!("const unsigned int model_data_len = {};\n", bytes.len()));
    out.push_str("const unsigned char model_data[] = {\n");
    for chunk in bytes.chunks(16) {
        out.push_str("    ");
        for b in chunk {
            out.push_str(&format!("{b},"));
        }
        out.push('\n');
    }
    out.push_str("};\n");
    out
}

#[derive(Serialize)]
struct Prediction {
    index: usize,
    predicted: String,
    prob_forklift: f32,
    prob_truck: f32,
    prob_dummy: f32,
}

fn cmd_infer(
    input: &[PathBuf],
    out: &Path,
    thresholds: &Option<PathBuf>,
    format: OutputFormat,
) -> Result<()> {
    let model = load_model(&input[0])?;
    let ds = load_window_set(&input[1])?;
    let policy = load_policy(thresholds)?;
    let probs = model_probs(&model, ds.windows())?;
    let rows: Vec<Prediction> = probs
        .iter()
        .enumerate()
        .map(|(i, p)| Prediction {
            index: i,
            predicted: decide::classify(p, &policy).name().to_string(),
            prob_forklift: p.probs[0],
            prob_truck: p.probs[1],
            prob_dummy: p.probs[2],
        })
        .collect();
    match format {
        OutputFormat::Json => save_json(out, &rows)?,
        OutputFormat::Csv => {
            let mut text =
                String::from("index,predicted,prob_forklift,prob_truck,prob_dummy\n");
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.index, r.predicted, r.prob_forklift, r.prob_truck, r.prob_dummy
                ));
            }
            write_text(out, &text)?;
        }
    }
    println!("classified {} windows", rows.len());
    Ok(())
}

fn cmd_energy(
    config: &Option<PathBuf>,
    out: &Path,
    wakes_per_day: u64,
    overhead_ms: f64,
    battery_mwh: f64,
) -> Result<()> {
    let cfg = load_config(config)?;
    let energy = runtime::estimate_inference_energy(&cfg.energy)?;
    let days =
        runtime::estimate_wake_budget(&cfg.energy, wakes_per_day, overhead_ms, battery_mwh)?;
    let report = EnergyReport {
        profile: cfg.energy,
        energy,
        wakes_per_day,
        awake_overhead_ms: overhead_ms,
        battery_capacity_mwh: battery_mwh,
        lifetime_days: days.is_finite().then_some(days),
        unbounded: days.is_infinite(),
    };
    save_json(out, &report)?;
    println!(
        "inference {} mJ (marginal {} mJ)",
        energy.total_mj, energy.marginal_mj
    );
    Ok(())
}

fn report_csv(rows: &[NamedReport]) -> String {
    let mut text = String::from(
        "name,precision_forklift,recall_forklift,precision_truck,recall_truck,dummy_rejection_rate\n",
    );
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.name,
            r.report.precision[0],
            r.report.recall[0],
            r.report.precision[1],
            r.report.recall[1],
            r.report.dummy_rejection_rate
        ));
    }
    text
}

fn cmd_report(input: &[PathBuf], out: &Path, format: OutputFormat) -> Result<()> {
    let mut rows = Vec::with_capacity(input.len());
    for path in input {
        rows.push(load_json::<NamedReport>(path)?);
    }
    match format {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Table {
                rows: Vec<NamedReport>,
            }
            save_json(out, &Table { rows })?;
        }
        OutputFormat::Csv => write_text(out, &report_csv(&rows))?,
    }
    println!("merged {} reports", input.len());
    Ok(())
}
