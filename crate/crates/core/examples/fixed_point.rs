//! Fixed-point arithmetic and the log word width needed to match it.
use lnsnet::lns::{self, LnsFormat};
use lnsnet::{required_log_width, DeltaApproximator, FixedFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q = FixedFormat::new(4, 11)?;
    let (a, b) = (q.encode(1.375), q.encode(-2.25));
    println!("Q4.11: a+b={} a*b={} saturated={}", q.decode(q.add(a, b)), q.decode(q.mul(a, b)), q.decode(q.encode(100.0)));

    for (i, f, w) in [(4, 11, 16), (4, 7, 12), (8, 8, 16)] {
        println!("Q{i}.{f} in {w} bits needs a {}-bit log word", required_log_width(i, f, w));
    }

    // Q0.8 pixel 0.6640625 converted exactly and with log-domain adds only.
    let pixel = FixedFormat::new(0, 8)?;
    let v = pixel.from_code(170);
    let fmt = LnsFormat::LOG16;
    let exact = lns::fixed_to_lns_exact(v, pixel, fmt);
    let approx = lns::fixed_to_lns_approx(v, pixel, &DeltaApproximator::lut_with(10.0, 0.5, fmt)?);
    println!("170/256: exact {:.5}, approximate {:.5}", fmt.decode(exact), fmt.decode(approx));
    Ok(())
}
