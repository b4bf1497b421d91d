//! Encode a few reals, then multiply and add them in the log domain.
use lnsnet::lns::{self, LnsFormat};
use lnsnet::DeltaApproximator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fmt = LnsFormat::LOG16;
    println!("{}-bit words, magnitudes 2^{:.3} .. 2^{:.3}, log step 2^-{}", fmt.width(), fmt.x_min(), fmt.x_max(), fmt.frac_bits());

    let evaluators = [
        ("exact", DeltaApproximator::exact(fmt)),
        ("lut", DeltaApproximator::lut_with(10.0, 0.5, fmt)?),
        ("bitshift", DeltaApproximator::bit_shift(fmt)),
    ];
    let pairs = [(3.0, 5.0), (0.75, -0.5), (-2.0, 2.0), (1e-3, 40.0)];
    for (x, y) in pairs {
        let (a, b) = (fmt.encode(x), fmt.encode(y));
        print!("x={x:>7} y={y:>7}  x*y={:>10.5}", fmt.decode(lns::mul(a, b, fmt)));
        for (name, d) in &evaluators {
            print!("  x+y[{name}]={:>9.5}", fmt.decode(lns::add(a, b, d)));
        }
        println!();
    }
    Ok(())
}
