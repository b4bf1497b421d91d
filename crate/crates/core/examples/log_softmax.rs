//! Softmax computed in the log domain, compared with doubles.
use lnsnet::lns::LnsFormat;
use lnsnet::nn::logdomain::{log_softmax, softmax_linear_format};
use lnsnet::{DeltaApproximator, Pow2FracTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fmt = LnsFormat::LOG16;
    let softmax = DeltaApproximator::lut_with(10.0, 1.0 / 64.0, fmt)?;
    let pow2 = Pow2FracTable::default();
    let logits = [2.0, -1.0, 0.5, 3.25, 0.0];

    let z: Vec<_> = logits.iter().map(|&v| fmt.encode(v)).collect();
    let out = log_softmax(&z, &softmax, &pow2, softmax_linear_format(fmt));

    let norm: f64 = logits.iter().map(|v| v.exp()).sum();
    println!("logit     lns p    double p");
    for (&l, &p) in logits.iter().zip(&out.probs) {
        println!("{l:>5}  {:>9.5}  {:>10.5}", fmt.decode(p), l.exp() / norm);
    }
    let total: f64 = out.probs.iter().map(|&p| fmt.decode(p)).sum();
    println!("sum of lns probabilities: {total:.5}");
    Ok(())
}
