//! Independent double-precision oracles shared by the integration tests and
//! the acceptance runner. Nothing here calls into the crate's own rounding or
//! correction-term code: references are recomputed from the definitions.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use lnsnet::lns::{self, LnsFormat, LnsScalar};
use lnsnet::nn::{Backend, FloatBackend, LnsBackend, MlpModel};
use lnsnet::{DeltaApproximator, Pow2FracTable};

/// Reference description of a correction-term evaluator.
#[derive(Debug, Clone, Copy)]
pub enum RefMode {
    Exact,
    Lut { d_max: f64, r: f64 },
    BitShift,
}

impl RefMode {
    pub fn build(self, fmt: LnsFormat) -> DeltaApproximator {
        match self {
            RefMode::Exact => DeltaApproximator::exact(fmt),
            RefMode::Lut { d_max, r } => DeltaApproximator::lut_with(d_max, r, fmt).unwrap(),
            RefMode::BitShift => DeltaApproximator::bit_shift(fmt),
        }
    }
}

/// `(code, positive)` with zero as `(None, true)`.
pub type Repr = (Option<i64>, bool);

pub fn repr(s: LnsScalar) -> Repr {
    match s.code() {
        Some(c) => (Some(c as i64), s.is_positive()),
        None => (None, true),
    }
}

fn scale(fmt: LnsFormat) -> f64 {
    2f64.powi(fmt.frac_bits() as i32)
}

fn min_code(fmt: LnsFormat) -> i64 {
    -(1i64 << (fmt.int_bits() + fmt.frac_bits())) + 1
}

fn max_code(fmt: LnsFormat) -> i64 {
    (1i64 << (fmt.int_bits() + fmt.frac_bits())) - 1
}

/// Saturate above the grid, flush below it.
pub fn ref_clamp(code: i64, positive: bool, fmt: LnsFormat) -> Repr {
    if code < min_code(fmt) {
        (None, true)
    } else {
        (Some(code.min(max_code(fmt))), positive)
    }
}

/// `Δ±(d)` in grid units; `None` means minus infinity.
pub fn ref_delta(mode: RefMode, d: f64, plus: bool, fmt: LnsFormat) -> Option<i64> {
    let curve = |x: f64| {
        let t = 2f64.powf(-x);
        if plus {
            (1.0 + t).log2()
        } else {
            (1.0 - t).log2()
        }
    };
    let grid = |v: f64| (v * scale(fmt)).round_ties_even() as i64;
    match mode {
        RefMode::Exact => {
            if !plus && d == 0.0 {
                None
            } else {
                Some(grid(curve(d)))
            }
        }
        RefMode::Lut { d_max, r } => {
            if d >= d_max {
                return Some(0);
            }
            let size = (d_max / r).round() as i64;
            let k = ((d / r + 0.5).floor() as i64).min(size - 1);
            if !plus && k == 0 {
                None
            } else {
                Some(grid(curve(k as f64 * r)))
            }
        }
        RefMode::BitShift => {
            let s = (d + 0.5).floor();
            if !plus && s == 0.0 {
                None
            } else if plus {
                Some(grid(2f64.powf(-s)))
            } else {
                Some(grid(-1.5 * 2f64.powf(-s)))
            }
        }
    }
}

pub fn ref_mul(a: Repr, b: Repr, fmt: LnsFormat) -> Repr {
    match (a.0, b.0) {
        (Some(x), Some(y)) => ref_clamp(x + y, a.1 == b.1, fmt),
        _ => (None, true),
    }
}

/// `max(X, Y) + Δ±(|X − Y|)` with the larger operand's sign; equal
/// magnitudes take `b`'s sign.
pub fn ref_add(a: Repr, b: Repr, mode: RefMode, fmt: LnsFormat) -> Repr {
    let (x, y) = match (a.0, b.0) {
        (None, _) => return b,
        (_, None) => return a,
        (Some(x), Some(y)) => (x, y),
    };
    let (hi, sign) = if x > y { (x, a.1) } else { (y, b.1) };
    let d = (x - y).abs() as f64 / scale(fmt);
    match ref_delta(mode, d, a.1 == b.1, fmt) {
        None => (None, true),
        Some(c) => ref_clamp(hi + c, sign, fmt),
    }
}

pub fn ref_sub(a: Repr, b: Repr, mode: RefMode, fmt: LnsFormat) -> Repr {
    let nb = match b.0 {
        None => b,
        Some(_) => (b.0, !b.1),
    };
    ref_add(a, nb, mode, fmt)
}

/// Zero and every code of both signs.
pub fn all_scalars(fmt: LnsFormat) -> Vec<LnsScalar> {
    let mut v = vec![LnsScalar::ZERO];
    for c in min_code(fmt)..=max_code(fmt) {
        for s in [true, false] {
            v.push(fmt.from_code(c, s));
        }
    }
    v
}

/// Every operand pair through `⊞`, `⊡`, `⊟` against the reference.
/// Returns the number of comparisons.
pub fn exhaustive_oracle(fmt: LnsFormat, mode: RefMode) -> Result<usize, String> {
    let d = mode.build(fmt);
    let all = all_scalars(fmt);
    let mut n = 0;
    for &a in &all {
        for &b in &all {
            let (ra, rb) = (repr(a), repr(b));
            let checks = [
                ("add", repr(lns::add(a, b, &d)), ref_add(ra, rb, mode, fmt)),
                ("sub", repr(lns::sub(a, b, &d)), ref_sub(ra, rb, mode, fmt)),
                ("mul", repr(lns::mul(a, b, fmt)), ref_mul(ra, rb, fmt)),
            ];
            for (op, got, want) in checks {
                if got != want {
                    return Err(format!("{op}({a:?}, {b:?}) = {got:?}, reference {want:?} ({mode:?})"));
                }
                n += 1;
            }
        }
    }
    Ok(n)
}

/// Worst `|Z − log2|x + y||` over `n` random nonzero pairs at the given
/// format with exact Δ, skipping saturated or flushed results. Returns
/// (worst error, pairs checked).
pub fn random_add_accuracy(fmt: LnsFormat, n: usize, seed: u64) -> (f64, usize) {
    let d = DeltaApproximator::exact(fmt);
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let span = 2f64.powi(fmt.int_bits() as i32);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..n {
        // operands well inside the range so that their sum cannot saturate
        let a = fmt.from_log(rng.random_range(-span + 1.0..span - 2.0), rng.random());
        let b = fmt.from_log(rng.random_range(-span + 1.0..span - 2.0), rng.random());
        let z = lns::add(a, b, &d);
        let exact = lns::decode(a, fmt) + lns::decode(b, fmt);
        if exact == 0.0 || z.is_zero() {
            continue;
        }
        let want = exact.abs().log2();
        if want <= fmt.x_min() || want >= fmt.x_max() {
            continue;
        }
        assert_eq!(z.is_positive(), exact > 0.0, "sign of {a:?} + {b:?}");
        worst = worst.max((z.log_mag(fmt).unwrap() - want).abs());
        checked += 1;
    }
    (worst, checked)
}

/// Log-domain backend with exact Δ everywhere, suitable for comparing against
/// double precision.
pub fn fine_lns_backend(fmt: LnsFormat) -> LnsBackend {
    LnsBackend::new(
        DeltaApproximator::exact(fmt),
        DeltaApproximator::exact(fmt),
        Pow2FracTable::new(fmt.frac_bits()),
        -7.0,
    )
    .unwrap()
}

pub fn fine_format() -> LnsFormat {
    LnsFormat::new(5, 20).unwrap()
}

fn set_param<B: Backend>(m: &mut MlpModel<B>, mut idx: usize, v: f64) {
    let enc = m.backend().encode(v);
    for layer in m.layers_mut() {
        let nw = layer.weights.as_slice().len();
        if idx < nw {
            layer.weights.as_mut_slice()[idx] = enc;
            return;
        }
        idx -= nw;
        if idx < layer.bias.len() {
            layer.bias[idx] = enc;
            return;
        }
        idx -= layer.bias.len();
    }
    panic!("parameter index out of range");
}

/// Gradients of a 2-8-3 network from the log-domain backward pass (q_f = 20,
/// exact Δ) against central finite differences of the double-precision loss.
/// Returns the worst relative error over coordinates with |g| > 1e-4 and the
/// number of such coordinates.
pub fn gradient_check(seed: u64) -> (f64, usize) {
    let mut float = MlpModel::new(FloatBackend::default(), &[2, 8, 3], seed).unwrap();
    // nonzero biases so that every coordinate is exercised
    let n_params = float.decoded_parameters().len();
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0x5eed);
    for layer in float.layers_mut() {
        for b in layer.bias.iter_mut() {
            *b = rng.random_range(-0.3..0.3);
        }
    }
    let lns_model = float.convert(fine_lns_backend(fine_format()));
    // evaluate finite differences on the parameters the log model actually holds
    let base: Vec<f64> = lns_model.decoded_parameters();
    let mut reference = float.clone();
    for (i, &v) in base.iter().enumerate() {
        set_param(&mut reference, i, v);
    }
    let x_f = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
    let label = rng.random_range(0..3usize);

    let x_l: Vec<LnsScalar> = x_f.iter().map(|&v| lns_model.backend().encode(v)).collect();
    let x_f: Vec<f64> = x_l.iter().map(|&v| lns_model.backend().decode(v)).collect();
    let mut act = lns_model.activations();
    let mut grads = lns_model.gradients();
    lns_model.forward(&x_l, &mut act).unwrap();
    lns_model.backward(&x_l, &mut act, label, &mut grads).unwrap();
    let b = lns_model.backend();
    let analytic: Vec<f64> = grads
        .layers
        .iter()
        .flat_map(|(gw, gb)| gw.as_slice().iter().chain(gb.iter()))
        .map(|&g| b.decode(g))
        .collect();
    assert_eq!(analytic.len(), n_params);

    let h = 1e-5;
    let mut fact = reference.activations();
    let mut worst = 0.0f64;
    let mut counted = 0;
    for i in 0..n_params {
        let mut plus = reference.clone();
        set_param(&mut plus, i, base[i] + h);
        let mut minus = reference.clone();
        set_param(&mut minus, i, base[i] - h);
        let fd = (plus.loss(&x_f, label, &mut fact).unwrap() - minus.loss(&x_f, label, &mut fact).unwrap()) / (2.0 * h);
        if fd.abs() > 1e-4 {
            worst = worst.max((analytic[i] - fd).abs() / fd.abs());
            counted += 1;
        }
    }
    (worst, counted)
}

/// One SGD step on a 2-8-3 network in both the double and the fine log
/// backend; worst relative difference of the decoded parameters.
pub fn backend_step_equivalence(seed: u64) -> f64 {
    let mut float = MlpModel::new(FloatBackend::default(), &[2, 8, 3], seed).unwrap();
    let mut log = float.convert(fine_lns_backend(fine_format()));
    // start both from the identical (log-representable) parameters
    let start = log.decoded_parameters();
    for (i, &v) in start.iter().enumerate() {
        set_param(&mut float, i, v);
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed.wrapping_add(17));
    let lb = log.backend().clone();
    let samples: Vec<([f64; 2], usize)> = (0..5)
        .map(|_| {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            // inputs on the log grid so both backends see the same data
            (x.map(|v| lb.decode(lb.encode(v))), rng.random_range(0..3))
        })
        .collect();
    let (lr, decay) = (0.05 / 5.0, 1e-4);

    let mut fa = float.activations();
    let mut fg = float.gradients();
    let mut la = log.activations();
    let mut lg = log.gradients();
    for (x, label) in &samples {
        float.forward(x, &mut fa).unwrap();
        float.backward(x, &mut fa, *label, &mut fg).unwrap();
        let xl: Vec<LnsScalar> = x.iter().map(|&v| lb.encode(v)).collect();
        log.forward(&xl, &mut la).unwrap();
        log.backward(&xl, &mut la, *label, &mut lg).unwrap();
    }
    float.sgd_step(&mut fg, lr, decay);
    log.sgd_step(&mut lg, lb.encode(lr), lb.encode(decay));
    float
        .decoded_parameters()
        .iter()
        .zip(log.decoded_parameters())
        .map(|(&f, l)| (f - l).abs() / f.abs().max(1e-6))
        .fold(0.0, f64::max)
}
