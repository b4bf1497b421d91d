//! Network operations expressed directly in the log domain: log-leaky ReLU,
//! softmax with its cross-entropy gradient, and weight initialization.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::delta::DeltaApproximator;
use crate::error::{Error, Result};
use crate::fixed::{round_shift, FixedFormat, FixedScalar};
use crate::lns::{self, LnsFormat, LnsScalar};
use crate::nn::backend::draw_weight;
use crate::pow2::Pow2FracTable;
use crate::tensor::LnsMatrix;

/// llReLU: positive values pass through, negative ones get `β` added to their
/// log magnitude (a multiply by `2^β`). `beta_code` is `β` in grid units.
pub fn llrelu(a: LnsScalar, beta_code: i32, fmt: LnsFormat) -> LnsScalar {
    match a.code() {
        Some(c) if !a.is_positive() => fmt.from_code(c as i64 + beta_code as i64, false),
        _ => a,
    }
}

/// Derivative path of llReLU: `δ` unchanged where the pre-activation was
/// positive (or zero), otherwise `δ ⊡ 2^β`.
pub fn llrelu_backward(delta: LnsScalar, pre: LnsScalar, beta_code: i32, fmt: LnsFormat) -> LnsScalar {
    if pre.is_positive() {
        return delta;
    }
    match delta.code() {
        Some(c) => fmt.from_code(c as i64 + beta_code as i64, delta.is_positive()),
        None => delta,
    }
}

/// Linear fixed-point format used inside the softmax: wide enough for
/// `2^X_max` and four guard bits below the log grid.
pub fn softmax_linear_format(fmt: LnsFormat) -> FixedFormat {
    let int_bits = ((1u32 << fmt.int_bits()) + 1).min(30);
    let frac_bits = (fmt.frac_bits() + 4).min(62 - int_bits);
    FixedFormat::new(int_bits, frac_bits).expect("bounded by construction")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogSoftmax {
    /// `log2 p_j` in the linear format.
    pub log2_p: Vec<FixedScalar>,
    /// `p_j` as positive log-domain scalars.
    pub probs: Vec<LnsScalar>,
}

/// Softmax of log-domain activations.
///
/// Each activation is brought to linear fixed point (`a_j`), scaled by
/// `log2 e` so that `e^{a_j} = 2^{t_j}`, and the normalizer
/// `log2 Σ_j 2^{t_j}` is a `⊞` fold over the positive scalars `(t_j, 1)` using
/// the softmax evaluator. Then `log2 p_j = t_j - log2 Σ`. The largest `t` is
/// subtracted first (an integer subtract) so the fold never saturates.
pub fn log_softmax(
    z: &[LnsScalar],
    softmax: &DeltaApproximator,
    pow2: &Pow2FracTable,
    linear: FixedFormat,
) -> LogSoftmax {
    let fmt = softmax.format();
    let log2e = linear.encode(std::f64::consts::LOG2_E);
    let t: Vec<FixedScalar> = z
        .iter()
        .map(|&a| linear.mul(lns::to_fixed(a, fmt, linear, pow2), log2e))
        .collect();
    let t_max = t.iter().map(|v| v.0).max().unwrap_or(0);
    let guard = linear.frac_bits() as i32 - fmt.frac_bits() as i32;
    // shifted exponents on the log grid, all <= 0
    let u: Vec<i64> = t
        .iter()
        .map(|v| round_shift((v.0 - t_max) as i128, guard) as i64)
        .collect();
    let norm = u
        .iter()
        .fold(LnsScalar::ZERO, |acc, &c| lns::add(acc, fmt.from_code(c, true), softmax));
    let norm_code = norm.code().unwrap_or(0) as i64;
    let log2_p: Vec<i64> = u.iter().map(|&c| c - norm_code).collect();
    LogSoftmax {
        probs: log2_p.iter().map(|&c| fmt.from_code(c, true)).collect(),
        log2_p: log2_p
            .iter()
            .map(|&c| linear.saturate(round_shift(c as i128, -guard)))
            .collect(),
    }
}

/// Cross-entropy gradient `δ_j = P_j ⊟ y_j` for a one-hot label: one at the
/// label, zero elsewhere.
pub fn ce_grad_init(probs: &[LnsScalar], label: usize, delta: &DeltaApproximator) -> Result<Vec<LnsScalar>> {
    if label >= probs.len() {
        return Err(Error::Label { label, classes: probs.len() });
    }
    let one = delta.format().one();
    Ok(probs
        .iter()
        .enumerate()
        .map(|(j, &p)| if j == label { lns::sub(p, one, delta) } else { p })
        .collect())
}

/// Glorot-style bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Weights drawn in the log domain: sign ~ Bernoulli(1/2) and
/// `X = log2(a) + log2(u)` with `u ~ U(0, 1]`, so `|w| = 2^X ~ U(0, a]`.
/// The matrix is `fan_out × fan_in`.
pub fn init_weights(fan_in: usize, fan_out: usize, seed: u64, fmt: LnsFormat) -> Result<LnsMatrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::Shape(format!("layer {fan_in} -> {fan_out}")));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let bound = glorot_bound(fan_in, fan_out).log2();
    let data = (0..fan_in * fan_out)
        .map(|_| {
            let (positive, u) = draw_weight(&mut rng);
            fmt.from_log(bound + u.log2(), positive)
        })
        .collect();
    LnsMatrix::from_vec(fan_out, fan_in, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f16() -> LnsFormat {
        LnsFormat::LOG16
    }

    #[test]
    fn llrelu_branches() {
        let f = f16();
        let beta = f.quantize(-7.0) as i32;
        let neg = f.from_log(3.0, false);
        let out = llrelu(neg, beta, f);
        assert_eq!((out.log_mag(f), out.is_positive()), (Some(-4.0), false));
        let pos = f.from_log(3.0, true);
        assert_eq!(llrelu(pos, beta, f), pos);
        assert!(llrelu(LnsScalar::ZERO, beta, f).is_zero());
        // flush when the shifted magnitude leaves the grid
        assert!(llrelu(f.from_log(-12.0, false), beta, f).is_zero());
    }

    #[test]
    fn llrelu_derivative() {
        let f = f16();
        let beta = f.quantize(-7.0) as i32;
        let d = f.from_log(-2.0, false);
        assert_eq!(llrelu_backward(d, f.encode(1.0), beta, f), d);
        assert_eq!(llrelu_backward(d, f.encode(-1.0), beta, f).log_mag(f), Some(-9.0));
        assert_eq!(llrelu_backward(d, LnsScalar::ZERO, beta, f), d);
        assert!(llrelu_backward(LnsScalar::ZERO, f.encode(-1.0), beta, f).is_zero());
    }

    fn softmax_ctx() -> (LnsFormat, DeltaApproximator, Pow2FracTable, FixedFormat) {
        let f = f16();
        (
            f,
            DeltaApproximator::lut_with(10.0, 1.0 / 64.0, f).unwrap(),
            Pow2FracTable::default(),
            softmax_linear_format(f),
        )
    }

    #[test]
    fn softmax_two_equal() {
        let (f, d, p, lin) = softmax_ctx();
        let z = [f.encode(0.7), f.encode(0.7)];
        let s = log_softmax(&z, &d, &p, lin);
        for j in 0..2 {
            assert_eq!(lin.decode(s.log2_p[j]), -1.0);
            assert_eq!(f.decode(s.probs[j]), 0.5);
        }
    }

    #[test]
    fn softmax_dominant() {
        let (f, d, p, lin) = softmax_ctx();
        let z = [f.encode(12.0), f.encode(-1.0), f.encode(0.0)];
        let s = log_softmax(&z, &d, &p, lin);
        assert_eq!(lin.decode(s.log2_p[0]), 0.0);
        assert_eq!(f.decode(s.probs[0]), 1.0);
    }

    #[test]
    fn softmax_three_against_double() {
        let (f, d, p, lin) = softmax_ctx();
        let a = [1.0f64, 0.0, -1.0];
        let z: Vec<_> = a.iter().map(|&v| f.encode(v)).collect();
        let s = log_softmax(&z, &d, &p, lin);
        let sum: f64 = a.iter().map(|v| v.exp()).sum();
        for j in 0..3 {
            let want = a[j].exp() / sum;
            let got = f.decode(s.probs[j]);
            assert!((got - want).abs() <= 2f64.powi(-8), "{j}: {got} vs {want}");
        }
    }

    #[test]
    fn softmax_large_logits_do_not_saturate() {
        let (f, d, p, lin) = softmax_ctx();
        // t = 15000 · log2 e is far beyond X_max; only differences matter
        let z = [f.encode(15000.0), f.encode(15000.0)];
        let s = log_softmax(&z, &d, &p, lin);
        assert_eq!(f.decode(s.probs[0]), 0.5);
        // with a fine 2^F table the result tracks the double softmax
        let fine = Pow2FracTable::new(20);
        let z = [f.encode(40.0), f.encode(39.0)];
        let s = log_softmax(&z, &d, &fine, lin);
        let want = 1.0 / (1.0 + (-1f64).exp());
        assert!((f.decode(s.probs[0]) - want).abs() < 2f64.powi(-6));
    }

    #[test]
    fn ce_gradient() {
        let f = f16();
        let d = DeltaApproximator::exact(f);
        let onehot = [LnsScalar::ZERO, f.one(), LnsScalar::ZERO];
        assert!(ce_grad_init(&onehot, 1, &d).unwrap().iter().all(|s| s.is_zero()));
        let p = [f.encode(0.25), f.encode(0.5), f.encode(0.25)];
        let g = ce_grad_init(&p, 1, &d).unwrap();
        assert_eq!(g[0], p[0]);
        assert_eq!(g[2], p[2]);
        assert_eq!((g[1].log_mag(f), g[1].is_positive()), (Some(-1.0), false));
        assert!(ce_grad_init(&p, 3, &d).is_err());
    }

    #[test]
    fn init_bounds_and_signs() {
        let f = f16();
        let w = init_weights(784, 100, 1, f).unwrap();
        assert_eq!((w.rows(), w.cols()), (100, 784));
        let cap = f.quantize(glorot_bound(784, 100).log2()) as i32;
        // draws with tiny u flush to zero; everything else stays under the bound
        assert!(w.as_slice().iter().all(|s| s.code().is_none_or(|c| c <= cap)));
        let pos = w.as_slice().iter().filter(|s| s.is_positive()).count() as f64;
        let n = w.as_slice().len() as f64;
        assert!((pos / n - 0.5).abs() <= 3.0 * (0.25 / n).sqrt());
        assert_eq!(init_weights(784, 100, 1, f).unwrap(), w);
        assert!(init_weights(0, 3, 1, f).is_err());
    }
}
