//! Build the Δ± lookup tables and compare approximation error.
//!
//! `cargo run --example delta_tables -- table.csv` also writes the
//! general-purpose table as CSV.
use lnsnet::lns::LnsFormat;
use lnsnet::{DeltaApproximator, DeltaTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fmt = LnsFormat::LOG16;
    let general = DeltaTable::build(10.0, 0.5, fmt)?;
    let softmax = DeltaTable::build(10.0, 1.0 / 64.0, fmt)?;
    println!("general table: {} entries, softmax table: {} entries", general.len(), softmax.len());

    let span = 12.0;
    for (name, d) in [
        ("exact", DeltaApproximator::exact(fmt)),
        ("lut r=1/2", DeltaApproximator::lut(general.clone())),
        ("lut r=1/64", DeltaApproximator::lut(softmax)),
        ("bitshift", DeltaApproximator::bit_shift(fmt)),
    ] {
        let p = d.error_profile(10_000, span);
        println!(
            "{name:>10}: Δ+ max {:.4} mean {:.4} | Δ- max {:.4} mean {:.4}",
            p.plus_max, p.plus_mean, p.minus_max, p.minus_mean
        );
    }

    if let Some(path) = std::env::args().nth(1) {
        general.write_csv(std::fs::File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
