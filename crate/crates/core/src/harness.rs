//! Experiment runner: named presets for every dataset × numeric configuration,
//! training with CSV learning curves, evaluation of checkpoints, and
//! result tables.
//!
//! A training run writes into its output directory:
//!
//! | file          | columns                                            |
//! |---------------|----------------------------------------------------|
//! | `metrics.csv` | `epoch,train_acc,val_acc` (percent)                |
//! | `timing.csv`  | `epoch,seconds` (wall clock, not reproducible)     |
//! | `result.csv`  | `run,dataset,config,epochs,test_acc`               |
//! | `model.ckpt`  | binary checkpoint, see [`crate::nn::checkpoint`]   |
//!
//! Everything except `timing.csv` is a pure function of the experiment settings and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::dataset::{self, Dataset, EncodedSet};
use crate::error::{Error, Result};
use crate::fixed::FixedFormat;
use crate::lns::LnsFormat;
use crate::nn::checkpoint::{AnyModel, Checkpoint, Checkpointable};
use crate::nn::config::{ApproxConfig, NumericConfig, TrainConfig};
use crate::nn::train::{evaluate, EpochReport, Trainer};
use crate::nn::{Backend, MlpModel};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const RESULT_FILE: &str = "result.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// One in `VALIDATION_RATIO` training samples is held back.
pub const VALIDATION_RATIO: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetName {
    Mnist,
    Fashion,
    EmnistDigits,
    EmnistLetters,
}

impl DatasetName {
    pub const ALL: [DatasetName; 4] =
        [DatasetName::Mnist, DatasetName::Fashion, DatasetName::EmnistDigits, DatasetName::EmnistLetters];

    /// Directory under the data root, also the preset prefix.
    pub fn key(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::Fashion => "fashion",
            DatasetName::EmnistDigits => "emnist-digits",
            DatasetName::EmnistLetters => "emnist-letters",
        }
    }

    /// Row label in result tables.
    pub fn table_label(self) -> &'static str {
        match self {
            DatasetName::Mnist => "MNIST",
            DatasetName::Fashion => "FMNIST",
            DatasetName::EmnistDigits => "EMNISTD",
            DatasetName::EmnistLetters => "EMNISTL",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Ok(DatasetName::Mnist),
            "fashion" | "fashion-mnist" | "fmnist" => Ok(DatasetName::Fashion),
            "emnist-digits" | "emnistd" => Ok(DatasetName::EmnistDigits),
            "emnist-letters" | "emnistl" => Ok(DatasetName::EmnistLetters),
            other => Err(Error::Spec(format!("unknown dataset '{other}'"))),
        }
    }

    fn file_prefix(self) -> Option<&'static str> {
        match self {
            DatasetName::EmnistDigits => Some("emnist-digits"),
            DatasetName::EmnistLetters => Some("emnist-letters"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stem(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Find `<dir>/<name>/{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]`
/// (EMNIST files may also carry their `emnist-<kind>-` prefix and use
/// `test` instead of `t10k`).
pub fn locate(data_dir: &Path, name: DatasetName, split: Split) -> Result<(PathBuf, PathBuf)> {
    let dir = data_dir.join(name.key());
    let find = |kind: &str| -> Result<PathBuf> {
        let mut stems = vec![format!("{}-{kind}-ubyte", split.stem())];
        if let Some(prefix) = name.file_prefix() {
            let s = if split == Split::Test { "test" } else { "train" };
            stems.push(format!("{prefix}-{s}-{kind}-ubyte"));
        }
        let candidates: Vec<PathBuf> = stems
            .iter()
            .flat_map(|s| [dir.join(format!("{s}.gz")), dir.join(s)])
            .collect();
        candidates
            .iter()
            .find(|p| p.is_file())
            .cloned()
            .ok_or_else(|| Error::MissingPath(candidates[0].clone()))
    };
    Ok((find("images-idx3")?, find("labels-idx1")?))
}

/// Load one split; letter labels become 0-based.
pub fn load_split(data_dir: &Path, name: DatasetName, split: Split) -> Result<Dataset> {
    let (images, labels) = locate(data_dir, name, split)?;
    let ds = dataset::load_idx(images, labels)?;
    if name == DatasetName::EmnistLetters && ds.labels().iter().all(|&l| l >= 1) {
        return ds.shift_labels(1);
    }
    Ok(ds)
}

/// How pixels enter the log domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PixelConversion {
    /// Floating-point `log2`, rounded once.
    #[default]
    Exact,
    /// `⊞` over the set bits of the pixel with the general evaluator.
    Approx,
}

/// The numeric configurations reported in the results table, in column order.
pub const TABLE_COLUMNS: [&str; 7] =
    ["float", "lin12", "lin16", "log12-lut", "log16-lut", "log12-bitshift", "log16-bitshift"];

/// The configuration behind a table column name.
pub fn numeric_preset(name: &str) -> Result<NumericConfig> {
    let fixed = |i, f| NumericConfig::fixed(FixedFormat::new(i, f).expect("valid"));
    Ok(match name {
        "float" => NumericConfig::Float,
        "lin16" => fixed(4, 11),
        "lin12" => fixed(4, 7),
        "log16-lut" => NumericConfig::lns(LnsFormat::LOG16, ApproxConfig::GENERAL_LUT),
        "log12-lut" => NumericConfig::lns(LnsFormat::LOG12, ApproxConfig::GENERAL_LUT),
        "log16-bitshift" => NumericConfig::lns(LnsFormat::LOG16, ApproxConfig::BitShift),
        "log12-bitshift" => NumericConfig::lns(LnsFormat::LOG12, ApproxConfig::BitShift),
        other => return Err(Error::Spec(format!("unknown numeric preset '{other}'"))),
    })
}

/// Column name of a configuration, or a descriptive label for custom ones.
pub fn numeric_label(numeric: &NumericConfig) -> String {
    for name in TABLE_COLUMNS {
        if numeric_preset(name).ok().as_ref() == Some(numeric) {
            return name.to_string();
        }
    }
    match numeric {
        NumericConfig::Float => "float".into(),
        NumericConfig::Fixed { int_bits, frac_bits } => format!("fixed-q{int_bits}.{frac_bits}"),
        NumericConfig::Lns { int_bits, frac_bits, approx, softmax, pow2_bits } => format!(
            "lns-q{int_bits}.{frac_bits}-{}-softmax-{}-pow2-{pow2_bits}",
            approx.label(),
            softmax.label()
        ),
    }
}

/// All `<dataset>-<config>` preset names.
pub fn preset_names() -> Vec<String> {
    DatasetName::ALL
        .iter()
        .flat_map(|d| TABLE_COLUMNS.iter().map(move |c| format!("{}-{c}", d.key())))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub dataset: DatasetName,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
    pub pixels: PixelConversion,
    /// Keep only the first `n` training samples (before the validation split).
    pub train_limit: Option<usize>,
    pub val_ratio: usize,
}

impl ExperimentSpec {
    pub fn new(dataset: DatasetName, numeric: NumericConfig) -> Self {
        let name = format!("{}-{}", dataset.key(), numeric_label(&numeric));
        Self {
            out_dir: PathBuf::from("runs").join(&name),
            name,
            dataset,
            data_dir: PathBuf::from("data"),
            train: TrainConfig { numeric, ..TrainConfig::default() },
            pixels: PixelConversion::Exact,
            train_limit: None,
            val_ratio: VALIDATION_RATIO,
        }
    }

    /// `<dataset>-<config>`, e.g. `mnist-log16-lut`.
    pub fn preset(name: &str) -> Result<Self> {
        for d in DatasetName::ALL {
            if let Some(rest) = name.strip_prefix(d.key()).and_then(|r| r.strip_prefix('-')) {
                if let Ok(numeric) = numeric_preset(rest) {
                    return Ok(Self::new(d, numeric));
                }
            }
        }
        Err(Error::Spec(format!("unknown preset '{name}' (try one of: {})", preset_names().join(", "))))
    }
}

/// Everything a finished run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub dataset: DatasetName,
    pub config: String,
    pub epochs: Vec<EpochReport>,
    pub test_accuracy: f64,
    pub seconds: f64,
}

impl RunSummary {
    pub fn final_val_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.val_accuracy)
    }
}

struct Prepared {
    train: Dataset,
    val: Dataset,
    test: Dataset,
}

fn prepare(spec: &ExperimentSpec) -> Result<Prepared> {
    let mut full = load_split(&spec.data_dir, spec.dataset, Split::Train)?;
    let test = load_split(&spec.data_dir, spec.dataset, Split::Test)?;
    if let Some(n) = spec.train_limit {
        full = full.take(n);
    }
    let (train, val) = dataset::split_validation(&full, spec.val_ratio, spec.train.seed)?;
    Ok(Prepared { train, val, test })
}

/// Encode a dataset for a backend, honoring the pixel conversion mode on the
/// log-domain path.
pub fn encode_for<B: Backend>(ds: &Dataset, backend: &B, pixels: PixelConversion) -> EncodedSet<B::Scalar> {
    match pixels {
        PixelConversion::Exact => dataset::convert(ds, backend),
        PixelConversion::Approx => dataset::convert_approx(ds, backend),
    }
}

fn fmt_acc(v: f64) -> String {
    format!("{v:.2}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn train_with<B: Checkpointable>(
    spec: &ExperimentSpec,
    data: &Prepared,
    backend: B,
    on_epoch: &mut dyn FnMut(&EpochReport),
) -> Result<(RunSummary, Checkpoint)> {
    let start = Instant::now();
    let train = encode_for(&data.train, &backend, spec.pixels);
    let val = encode_for(&data.val, &backend, spec.pixels);
    let test = encode_for(&data.test, &backend, spec.pixels);
    let classes = data.train.n_classes().max(data.test.n_classes());
    let mut trainer = Trainer::new(backend, spec.train.clone(), dataset::IMAGE_DIM, classes)?;
    let epochs = trainer.fit(&train, Some(&val), |r| on_epoch(r))?;
    let model: MlpModel<B> = trainer.into_model();
    let test_accuracy = evaluate(&model, &test)?;
    let summary = RunSummary {
        name: spec.name.clone(),
        dataset: spec.dataset,
        config: numeric_label(&spec.train.numeric),
        epochs,
        test_accuracy,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((summary, Checkpoint::new(spec.train.numeric.clone(), model)))
}

/// Train, evaluate on the test split, and write the run directory.
pub fn run_train(spec: &ExperimentSpec, mut on_epoch: impl FnMut(&EpochReport)) -> Result<RunSummary> {
    spec.train.validate()?;
    let data = prepare(spec)?;
    let beta = spec.train.beta;
    let numeric = &spec.train.numeric;
    let (summary, ckpt) = match numeric {
        NumericConfig::Float => train_with(spec, &data, numeric.float_backend(beta), &mut on_epoch)?,
        NumericConfig::Fixed { .. } => train_with(spec, &data, numeric.fixed_backend(beta)?, &mut on_epoch)?,
        NumericConfig::Lns { .. } => train_with(spec, &data, numeric.lns_backend(beta)?, &mut on_epoch)?,
    };
    let out = &spec.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_file(&out.join(METRICS_FILE), &metrics_csv(&summary.epochs))?;
    write_file(&out.join(TIMING_FILE), &timing_csv(&summary.epochs))?;
    write_file(&out.join(RESULT_FILE), &result_csv(&summary))?;
    ckpt.save(out.join(CHECKPOINT_FILE))?;
    Ok(summary)
}

pub fn metrics_csv(epochs: &[EpochReport]) -> String {
    let mut s = String::from("epoch,train_acc,val_acc\n");
    for e in epochs {
        let val = e.val_accuracy.map(fmt_acc).unwrap_or_default();
        writeln!(s, "{},{},{}", e.epoch, fmt_acc(e.train_accuracy), val).expect("string write");
    }
    s
}

pub fn timing_csv(epochs: &[EpochReport]) -> String {
    let mut s = String::from("epoch,seconds\n");
    for e in epochs {
        writeln!(s, "{},{:.3}", e.epoch, e.seconds).expect("string write");
    }
    s
}

pub const RESULT_HEADER: &str = "run,dataset,config,epochs,test_acc";

pub fn result_csv(r: &RunSummary) -> String {
    format!(
        "{RESULT_HEADER}\n{},{},{},{},{:.1}\n",
        r.name,
        r.dataset.key(),
        r.config,
        r.epochs.len(),
        r.test_accuracy
    )
}

/// Accuracy (%) of a checkpoint on one split of a dataset.
pub fn eval_checkpoint(ckpt: &Checkpoint, data_dir: &Path, name: DatasetName, split: Split) -> Result<f64> {
    let ds = load_split(data_dir, name, split)?;
    let sizes = ckpt.model.sizes();
    let classes = *sizes.last().expect("non-empty");
    if sizes[0] != dataset::IMAGE_DIM || ds.n_classes() > classes {
        return Err(Error::Incompatible(format!(
            "model {sizes:?} cannot classify {} ({} classes of {} pixels)",
            name.key(),
            ds.n_classes(),
            dataset::IMAGE_DIM
        )));
    }
    match &ckpt.model {
        AnyModel::Float(m) => evaluate(m, &dataset::convert(&ds, m.backend())),
        AnyModel::Fixed(m) => evaluate(m, &dataset::convert(&ds, m.backend())),
        AnyModel::Lns(m) => evaluate(m, &dataset::convert(&ds, m.backend())),
    }
}

/// One row of a run directory's `result.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub run: String,
    pub dataset: DatasetName,
    pub config: String,
    pub epochs: usize,
    pub test_accuracy: f64,
}

/// Read `result.csv` from a run directory (or the file itself).
pub fn read_result(path: &Path) -> Result<ResultRow> {
    let file = if path.is_dir() { path.join(RESULT_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    let bad = || Error::Spec(format!("{}: not a result file", file.display()));
    let mut lines = text.lines();
    if lines.next() != Some(RESULT_HEADER) {
        return Err(bad());
    }
    let fields: Vec<&str> = lines.next().ok_or_else(bad)?.split(',').collect();
    if fields.len() != 5 {
        return Err(bad());
    }
    Ok(ResultRow {
        run: fields[0].to_string(),
        dataset: DatasetName::parse(fields[1])?,
        config: fields[2].to_string(),
        epochs: fields[3].parse().map_err(|_| bad())?,
        test_accuracy: fields[4].parse().map_err(|_| bad())?,
    })
}

/// Results-table CSV: one row per dataset, one column per numeric preset,
/// test accuracy to one decimal. Datasets without any result are omitted, so
/// no input gives just the header. Later rows win for duplicate cells.
pub fn results_table(rows: &[ResultRow]) -> String {
    let mut s = format!("dataset,{}\n", TABLE_COLUMNS.join(","));
    for d in DatasetName::ALL {
        let cells: Vec<String> = TABLE_COLUMNS
            .iter()
            .map(|c| {
                rows.iter()
                    .rev()
                    .find(|r| r.dataset == d && r.config == *c)
                    .map(|r| format!("{:.1}", r.test_accuracy))
                    .unwrap_or_default()
            })
            .collect();
        if cells.iter().any(|c| !c.is_empty()) {
            writeln!(s, "{},{}", d.table_label(), cells.join(",")).expect("string write");
        }
    }
    s
}

pub const SUMMARY_HEADER: &str = "run,dataset,config,epochs,final_train_acc,final_val_acc,best_val_acc,best_epoch,test_acc,seconds";

/// Per-run digest of a run directory: learning-curve endpoints, the best
/// validation epoch, test accuracy and total wall-clock time.
pub fn summarize_run(dir: &Path) -> Result<String> {
    let result = read_result(dir)?;
    let metrics_path = dir.join(METRICS_FILE);
    let metrics = fs::read_to_string(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let bad = || Error::Spec(format!("{}: malformed metrics", metrics_path.display()));
    let mut last = (String::new(), String::new());
    let mut best: Option<(f64, usize)> = None;
    for line in metrics.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad());
        }
        let epoch: usize = f[0].parse().map_err(|_| bad())?;
        if let Ok(v) = f[2].parse::<f64>() {
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, epoch));
            }
        }
        last = (f[1].to_string(), f[2].to_string());
    }
    let timing_path = dir.join(TIMING_FILE);
    let seconds: f64 = fs::read_to_string(&timing_path)
        .map(|t| t.lines().skip(1).filter_map(|l| l.split(',').nth(1)?.parse::<f64>().ok()).sum())
        .unwrap_or(f64::NAN);
    let (best_val, best_epoch) = best.map_or((String::new(), String::new()), |(v, e)| (fmt_acc(v), e.to_string()));
    Ok(format!(
        "{},{},{},{},{},{},{},{},{:.1},{:.1}",
        result.run,
        result.dataset.key(),
        result.config,
        result.epochs,
        last.0,
        last.1,
        best_val,
        best_epoch,
        result.test_accuracy,
        seconds
    ))
}
