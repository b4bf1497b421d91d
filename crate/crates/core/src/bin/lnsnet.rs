use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lnsnet::harness::{self, DatasetName, ExperimentSpec, PixelConversion, Split};
use lnsnet::nn::checkpoint::{self, Checkpoint};
use lnsnet::nn::{ApproxConfig, NumericConfig};
use lnsnet::{dataset, Error, FixedFormat, LnsFormat, Pow2FracTable};

#[derive(Parser)]
#[command(name = "lnsnet", version, about = "Multiplier-free MLP training in a logarithmic number system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write metrics, result and checkpoint to --out
    Train(TrainArgs),
    /// Accuracy of a checkpoint on a dataset split
    Eval(EvalArgs),
    /// Pre-encode a dataset split for a numeric backend
    ConvertDataset(ConvertArgs),
    /// Results table (datasets × numeric configurations) from run directories
    TableGen(TableArgs),
    /// One summary row per run directory
    Summarize(TableArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    #[value(alias = "float64")]
    Float,
    #[value(alias = "lin")]
    Fixed,
    #[value(alias = "log")]
    Lns,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproxArg {
    Exact,
    Lut,
    Bitshift,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

/// Numeric backend selection shared by the subcommands.
#[derive(Args, Clone)]
struct NumericArgs {
    /// float, fixed or lns
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Word width preset (16 or 12) or an explicit INT.FRAC split
    #[arg(long)]
    bits: Option<String>,
    /// Correction-term evaluator for log-domain additions
    #[arg(long, value_enum)]
    approx: Option<ApproxArg>,
    /// LUT dynamic range
    #[arg(long)]
    dmax: Option<f64>,
    /// LUT resolution, e.g. 0.5 or 1/2
    #[arg(long, value_parser = parse_fraction)]
    res: Option<f64>,
    /// Resolution of the softmax LUT
    #[arg(long, value_parser = parse_fraction)]
    softmax_res: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Named experiment, e.g. mnist-log16-lut; flags override it
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[command(flatten)]
    numeric: NumericArgs,
    /// Leak exponent of leaky ReLU (slope 2^beta)
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Weight decay constant
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Use only the first N training images
    #[arg(long)]
    train_limit: Option<usize>,
    /// Convert pixels with log-domain additions instead of log2
    #[arg(long)]
    approx_pixels: bool,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "mnist")]
    dataset: String,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// When given, must match the checkpoint's numeric settings
    #[command(flatten)]
    numeric: NumericArgs,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    /// CSV file for the result
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long, default_value = "mnist")]
    dataset: String,
    #[arg(long, value_enum, default_value = "train")]
    split: SplitArg,
    #[command(flatten)]
    numeric: NumericArgs,
    #[arg(long, allow_negative_numbers = true, default_value_t = lnsnet::nn::DEFAULT_BETA)]
    beta: f64,
    #[arg(long)]
    approx_pixels: bool,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TableArgs {
    /// Run directories (or result.csv files)
    runs: Vec<PathBuf>,
    /// CSV destination; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a positive number, got {s}"))
    }
}

fn parse_bits(bits: &str, backend: BackendArg) -> lnsnet::Result<(u32, u32)> {
    if let Some((i, f)) = bits.split_once('.') {
        let p = |s: &str| s.parse::<u32>().map_err(|_| Error::Spec(format!("bad --bits {bits}")));
        return Ok((p(i)?, p(f)?));
    }
    match (backend, bits) {
        (BackendArg::Fixed, "16") => Ok((4, 11)),
        (BackendArg::Fixed, "12") => Ok((4, 7)),
        (BackendArg::Lns, "16") => Ok((4, 10)),
        (BackendArg::Lns, "12") => Ok((4, 6)),
        _ => Err(Error::Spec(format!("--bits {bits} is not a preset width; use 16, 12 or INT.FRAC"))),
    }
}

impl NumericArgs {
    fn is_empty(&self) -> bool {
        self.backend.is_none()
            && self.bits.is_none()
            && self.approx.is_none()
            && self.dmax.is_none()
            && self.res.is_none()
            && self.softmax_res.is_none()
    }

    /// Apply the flags on top of `base`.
    fn resolve(&self, base: &NumericConfig) -> lnsnet::Result<NumericConfig> {
        let backend = self.backend.unwrap_or(match base {
            NumericConfig::Float => BackendArg::Float,
            NumericConfig::Fixed { .. } => BackendArg::Fixed,
            NumericConfig::Lns { .. } => BackendArg::Lns,
        });
        let bits = self.bits.as_deref().map(|b| parse_bits(b, backend)).transpose()?;
        Ok(match backend {
            BackendArg::Float => NumericConfig::Float,
            BackendArg::Fixed => {
                let (int_bits, frac_bits) = bits.unwrap_or(match base {
                    NumericConfig::Fixed { int_bits, frac_bits } => (*int_bits, *frac_bits),
                    _ => (4, 11),
                });
                NumericConfig::fixed(FixedFormat::new(int_bits, frac_bits)?)
            }
            BackendArg::Lns => {
                let (mut int_bits, mut frac_bits, mut approx, mut softmax, pow2_bits) = match base {
                    NumericConfig::Lns { int_bits, frac_bits, approx, softmax, pow2_bits } => {
                        (*int_bits, *frac_bits, *approx, *softmax, *pow2_bits)
                    }
                    _ => (4, 10, ApproxConfig::GENERAL_LUT, ApproxConfig::SOFTMAX_LUT, Pow2FracTable::DEFAULT_BITS),
                };
                if let Some((i, f)) = bits {
                    (int_bits, frac_bits) = (i, f);
                }
                let (base_dmax, base_res) = match approx {
                    ApproxConfig::Lut { d_max, resolution } => (d_max, resolution),
                    _ => (10.0, 0.5),
                };
                approx = match self.approx {
                    Some(ApproxArg::Exact) => ApproxConfig::Exact,
                    Some(ApproxArg::Bitshift) => ApproxConfig::BitShift,
                    Some(ApproxArg::Lut) => ApproxConfig::Lut { d_max: base_dmax, resolution: base_res },
                    None => approx,
                };
                if let ApproxConfig::Lut { d_max, resolution } = &mut approx {
                    *d_max = self.dmax.unwrap_or(*d_max);
                    *resolution = self.res.unwrap_or(*resolution);
                } else if self.dmax.is_some() || self.res.is_some() {
                    return Err(Error::Spec("--dmax/--res only apply to --approx lut".into()));
                }
                if let Some(r) = self.softmax_res {
                    let d_max = match softmax {
                        ApproxConfig::Lut { d_max, .. } => d_max,
                        _ => 10.0,
                    };
                    let d_max = self.dmax.unwrap_or(d_max);
                    softmax = ApproxConfig::Lut { d_max, resolution: r };
                }
                LnsFormat::new(int_bits, frac_bits)?;
                NumericConfig::Lns { int_bits, frac_bits, approx, softmax, pow2_bits }
            }
        })
    }
}

fn pixels(approx: bool) -> PixelConversion {
    if approx {
        PixelConversion::Approx
    } else {
        PixelConversion::Exact
    }
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> lnsnet::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io { path: path.clone(), source: e }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn train(args: TrainArgs) -> lnsnet::Result<()> {
    let mut spec = match (&args.preset, &args.dataset) {
        (Some(p), _) => ExperimentSpec::preset(p)?,
        (None, Some(d)) => ExperimentSpec::new(DatasetName::parse(d)?, NumericConfig::Float),
        (None, None) => ExperimentSpec::preset("mnist-float")?,
    };
    if let (Some(_), Some(d)) = (&args.preset, &args.dataset) {
        spec.dataset = DatasetName::parse(d)?;
    }
    spec.train.numeric = args.numeric.resolve(&spec.train.numeric)?;
    let t = &mut spec.train;
    t.beta = args.beta.unwrap_or(t.beta);
    t.learning_rate = args.lr.unwrap_or(t.learning_rate);
    t.batch_size = args.batch.unwrap_or(t.batch_size);
    t.epochs = args.epochs.unwrap_or(t.epochs);
    t.weight_decay = args.decay.unwrap_or(t.weight_decay);
    t.seed = args.seed.unwrap_or(t.seed);
    if let Some(h) = args.hidden {
        t.hidden = h;
    }
    if args.preset.is_none() || !args.numeric.is_empty() || args.dataset.is_some() {
        spec.name = format!("{}-{}", spec.dataset.key(), harness::numeric_label(&spec.train.numeric));
    }
    spec.train_limit = args.train_limit;
    spec.pixels = pixels(args.approx_pixels);
    spec.data_dir = args.data_dir;
    spec.out_dir = args.out.unwrap_or_else(|| PathBuf::from("runs").join(&spec.name));
    eprintln!("run {} -> {}", spec.name, spec.out_dir.display());
    let summary = harness::run_train(&spec, |r| {
        let val = r.val_accuracy.map_or(String::new(), |v| format!(" val {v:.2}%"));
        eprintln!("epoch {:>3}: train {:.2}%{val} ({:.1}s)", r.epoch, r.train_accuracy, r.seconds);
    })?;
    println!("test accuracy {:.1}%", summary.test_accuracy);
    Ok(())
}

fn eval(args: EvalArgs) -> lnsnet::Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    if !args.numeric.is_empty() {
        let wanted = args.numeric.resolve(&ckpt.numeric)?;
        if wanted != ckpt.numeric {
            return Err(Error::Incompatible(format!(
                "checkpoint was trained as {} but {} was requested",
                harness::numeric_label(&ckpt.numeric),
                harness::numeric_label(&wanted)
            )));
        }
    }
    let name = DatasetName::parse(&args.dataset)?;
    let split: Split = args.split.into();
    let acc = harness::eval_checkpoint(&ckpt, &args.data_dir, name, split)?;
    let split_name = if split == Split::Test { "test" } else { "train" };
    println!("accuracy {acc:.1}%");
    let csv = format!(
        "checkpoint,dataset,split,config,accuracy\n{},{},{split_name},{},{acc:.1}\n",
        args.checkpoint.display(),
        name.key(),
        harness::numeric_label(&ckpt.numeric)
    );
    if let Some(out) = &args.out {
        write_or_print(Some(out), &csv)?;
    }
    Ok(())
}

fn convert(args: ConvertArgs) -> lnsnet::Result<()> {
    let name = DatasetName::parse(&args.dataset)?;
    let ds = harness::load_split(&args.data_dir, name, args.split.into())?;
    let numeric = args.numeric.resolve(&NumericConfig::Float)?;
    let px = pixels(args.approx_pixels);
    match &numeric {
        NumericConfig::Float => {
            let b = numeric.float_backend(args.beta);
            checkpoint::save_encoded(&args.out, &numeric, &b, &harness::encode_for(&ds, &b, px))?
        }
        NumericConfig::Fixed { .. } => {
            let b = numeric.fixed_backend(args.beta)?;
            checkpoint::save_encoded(&args.out, &numeric, &b, &harness::encode_for(&ds, &b, px))?
        }
        NumericConfig::Lns { .. } => {
            let b = numeric.lns_backend(args.beta)?;
            checkpoint::save_encoded(&args.out, &numeric, &b, &harness::encode_for(&ds, &b, px))?
        }
    }
    println!(
        "wrote {} samples × {} ({}) to {}",
        ds.len(),
        dataset::IMAGE_DIM,
        harness::numeric_label(&numeric),
        args.out.display()
    );
    Ok(())
}

fn table_gen(args: TableArgs) -> lnsnet::Result<()> {
    let rows = args.runs.iter().map(|p| harness::read_result(p)).collect::<lnsnet::Result<Vec<_>>>()?;
    write_or_print(args.out.as_ref(), &harness::results_table(&rows))
}

fn summarize(args: TableArgs) -> lnsnet::Result<()> {
    let mut text = format!("{}\n", harness::SUMMARY_HEADER);
    for dir in &args.runs {
        text.push_str(&harness::summarize_run(dir)?);
        text.push('\n');
    }
    write_or_print(args.out.as_ref(), &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::ConvertDataset(a) => convert(a),
        Command::TableGen(a) => table_gen(a),
        Command::Summarize(a) => summarize(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::MissingPath(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
