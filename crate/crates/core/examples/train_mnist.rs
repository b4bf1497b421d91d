//! Train one of the preset experiments, e.g.
//! `cargo run --release --example train_mnist -- mnist-log16-lut data runs/x 5000`.
//! Arguments: preset, data directory, output directory, optional sample limit.
use lnsnet::harness::{preset_names, run_train, ExperimentSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "mnist-log16-lut".into());
    let mut spec = ExperimentSpec::preset(&preset).inspect_err(|_| eprintln!("presets: {}", preset_names().join(", ")))?;
    spec.data_dir = args.next().unwrap_or_else(|| "data".into()).into();
    spec.out_dir = args.next().unwrap_or_else(|| format!("runs/{preset}")).into();
    if let Some(limit) = args.next() {
        spec.train_limit = Some(limit.parse()?);
        spec.train.epochs = 1;
    }
    let summary = run_train(&spec, |e| {
        println!("epoch {:>2}: train {:.2}% val {:.2}% ({:.1}s)", e.epoch, e.train_accuracy, e.val_accuracy.unwrap_or(f64::NAN), e.seconds)
    })?;
    println!("{} [{}]: test accuracy {:.2}%, wrote {}", summary.name, summary.config, summary.test_accuracy, spec.out_dir.display());
    Ok(())
}
