//! A matrix-vector product as a fold of log-domain multiply-adds,
//! next to the same product in doubles.
use lnsnet::lns::LnsFormat;
use lnsnet::{tensor, DeltaApproximator, F64Arith, LnsMatrix, Matrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fmt = LnsFormat::LOG16;
    let (rows, cols) = (4, 16);
    let w: Vec<f64> = (0..rows * cols).map(|i| ((i * 37 % 23) as f64 - 11.0) / 17.0).collect();
    let x: Vec<f64> = (0..cols).map(|j| (j as f64 / 7.0).sin()).collect();

    let mut reference = vec![0.0; rows];
    tensor::gemv_into(&F64Arith, &Matrix::from_vec(rows, cols, w.clone())?, &x, None, &mut reference)?;

    let lw = LnsMatrix::from_vec(rows, cols, w.iter().map(|&v| fmt.encode(v)).collect())?;
    let lx: Vec<_> = x.iter().map(|&v| fmt.encode(v)).collect();
    for (name, d) in [
        ("exact", DeltaApproximator::exact(fmt)),
        ("lut", DeltaApproximator::lut_with(10.0, 0.5, fmt)?),
        ("bitshift", DeltaApproximator::bit_shift(fmt)),
    ] {
        let mut out = vec![lnsnet::LnsScalar::ZERO; rows];
        tensor::gemv_into(&d, &lw, &lx, None, &mut out)?;
        let got: Vec<String> = out.iter().map(|&o| format!("{:>8.4}", fmt.decode(o))).collect();
        println!("{name:>8}: {}", got.join(" "));
    }
    let want: Vec<String> = reference.iter().map(|v| format!("{v:>8.4}")).collect();
    println!("{:>8}: {}", "double", want.join(" "));
    Ok(())
}
