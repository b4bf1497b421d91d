mod common;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Uniform};

use lnsnet::lns::{self, LnsFormat, LnsScalar};
use lnsnet::nn::logdomain::{glorot_bound, log_softmax, softmax_linear_format};
use lnsnet::nn::{ApproxConfig, FloatBackend, MlpModel, NumericConfig, TrainConfig, Trainer};
use lnsnet::tensor::{self, F64Arith};
use lnsnet::{DeltaApproximator, EncodedSet, LnsMatrix, Pow2FracTable};

#[test]
fn gradient_check_two_eight_three() {
    for seed in [1, 2, 3] {
        let (worst, counted) = common::gradient_check(seed);
        assert!(counted > 10, "seed {seed}: only {counted} coordinates above threshold");
        assert!(worst <= 1e-2, "seed {seed}: worst relative error {worst}");
    }
}

#[test]
fn one_step_matches_float_backend() {
    for seed in [4, 5] {
        let worst = common::backend_step_equivalence(seed);
        assert!(worst <= 1e-3, "seed {seed}: {worst}");
    }
}

#[test]
fn gemv_matches_double_matmul() {
    let fmt = common::fine_format();
    let d = DeltaApproximator::exact(fmt);
    let mut rng = Xoshiro256StarStar::seed_from_u64(8);
    let (rows, n) = (7, 33);
    let w: Vec<f64> = (0..rows * n).map(|_| rng.random_range(-8.0..8.0)).collect();
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0..8.0)).collect();
    let wl = LnsMatrix::from_vec(rows, n, w.iter().map(|&v| fmt.encode(v)).collect()).unwrap();
    let xl: Vec<LnsScalar> = x.iter().map(|&v| fmt.encode(v)).collect();
    let mut got = vec![LnsScalar::ZERO; rows];
    tensor::gemv_into(&d, &wl, &xl, None, &mut got).unwrap();
    let mut want = vec![0.0; rows];
    let wf = lnsnet::Matrix::from_vec(rows, n, w.clone()).unwrap();
    tensor::gemv_into(&F64Arith, &wf, &x, None, &mut want).unwrap();
    let tol = 10.0 * n as f64 * 2f64.powi(-20);
    for r in 0..rows {
        let g = fmt.decode(got[r]);
        let scale: f64 = (0..n).map(|c| (w[r * n + c] * x[c]).abs()).sum();
        // relative to the magnitude of the summands; cancellation can make
        // the result itself arbitrarily small
        assert!((g - want[r]).abs() <= tol * scale, "row {r}: {g} vs {}", want[r]);
    }
}

#[test]
fn softmax_probabilities_sum_to_one() {
    let fmt = LnsFormat::LOG16;
    let sm = DeltaApproximator::lut_with(10.0, 1.0 / 64.0, fmt).unwrap();
    let pow2 = Pow2FracTable::default();
    let lin = softmax_linear_format(fmt);
    let mut rng = Xoshiro256StarStar::seed_from_u64(2);
    for _ in 0..500 {
        let z: Vec<LnsScalar> = (0..10).map(|_| fmt.encode(rng.random_range(-6.0..6.0))).collect();
        let p = log_softmax(&z, &sm, &pow2, lin).probs;
        let total = p.iter().fold(LnsScalar::ZERO, |acc, &v| lns::add(acc, v, &sm));
        assert!(total.log_mag(fmt).unwrap().abs() <= 2f64.powi(-6), "{total:?}");
    }
}

/// Kolmogorov–Smirnov statistic of `samples` against a continuous CDF.
fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn initial_weights_are_uniform_with_fair_signs() {
    let (fan_in, fan_out) = (784, 100);
    let bound = glorot_bound(fan_in, fan_out);
    let unit = Uniform::new(0.0, 1.0).unwrap();
    let numeric = NumericConfig::lns(LnsFormat::LOG16, ApproxConfig::GENERAL_LUT);
    let lns_b = numeric.lns_backend(-7.0).unwrap();
    let float = MlpModel::new(FloatBackend::default(), &[fan_in, fan_out], 21).unwrap();
    let log = MlpModel::new(lns_b.clone(), &[fan_in, fan_out], 21).unwrap();
    // α = 0.001 critical value of the one-sample KS test
    let crit = 1.95 / (fan_in as f64 * fan_out as f64).sqrt();
    for params in [float.decoded_parameters(), log.decoded_parameters()] {
        let weights = &params[..fan_in * fan_out];
        let mags: Vec<f64> = weights.iter().map(|w| w.abs() / bound).collect();
        let d = ks_statistic(mags, |x| unit.cdf(x));
        // log-grid quantization moves each magnitude by at most 2^-11 relative
        assert!(d < crit + 1e-3, "KS statistic {d} vs {crit}");
        let positive = weights.iter().filter(|&&w| w > 0.0).count() as u64;
        let n = weights.len() as u64;
        let binom = Binomial::new(0.5, n).unwrap();
        let p_low = binom.cdf(positive);
        let p_high = 1.0 - binom.cdf(positive.saturating_sub(1));
        assert!(2.0 * p_low.min(p_high) > 1e-3, "{positive} positive of {n}");
    }
}

fn toy_set(seed: u64, n: usize) -> EncodedSet<f64> {
    // two Gaussian blobs in 4 dimensions
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let c = (i % 2) as u8;
        let centre = if c == 0 { -1.0 } else { 1.0 };
        inputs.extend((0..4).map(|_| centre + rng.random_range(-0.8..0.8)));
        labels.push(c);
    }
    EncodedSet::new(inputs, labels, 4, 2).unwrap()
}

fn encode_set(set: &EncodedSet<f64>, fmt: LnsFormat) -> EncodedSet<LnsScalar> {
    EncodedSet::new(set.inputs().iter().map(|&v| fmt.encode(v)).collect(), set.labels().to_vec(), set.dim(), set.classes())
        .unwrap()
}

#[test]
fn log_training_learns_a_separable_problem() {
    let numeric = NumericConfig::lns(LnsFormat::LOG16, ApproxConfig::GENERAL_LUT);
    let backend = numeric.lns_backend(-7.0).unwrap();
    let cfg = TrainConfig { epochs: 5, hidden: vec![8], numeric, learning_rate: 0.05, ..TrainConfig::default() };
    let train = encode_set(&toy_set(1, 400), LnsFormat::LOG16);
    let test = encode_set(&toy_set(2, 200), LnsFormat::LOG16);
    let mut t = Trainer::new(backend, cfg, 4, 2).unwrap();
    t.fit(&train, None, |_| {}).unwrap();
    assert!(lnsnet::nn::evaluate(t.model(), &test).unwrap() >= 95.0);
}

#[test]
fn training_is_bit_reproducible() {
    let run = || {
        let numeric = NumericConfig::lns(LnsFormat::LOG12, ApproxConfig::BitShift);
        let cfg = TrainConfig { epochs: 2, hidden: vec![6], numeric: numeric.clone(), ..TrainConfig::default() };
        let set = encode_set(&toy_set(3, 120), LnsFormat::LOG12);
        let mut t = Trainer::new(numeric.lns_backend(-7.0).unwrap(), cfg, 4, 2).unwrap();
        let reports = t.fit(&set, Some(&set), |_| {}).unwrap();
        let acc: Vec<_> = reports.iter().map(|r| (r.train_accuracy, r.val_accuracy)).collect();
        (t.into_model().layers().to_vec(), acc)
    };
    assert_eq!(run(), run());
}

#[test]
fn trainer_rejects_mismatched_data() {
    let cfg = TrainConfig { epochs: 1, hidden: vec![3], ..TrainConfig::default() };
    let mut t = Trainer::new(FloatBackend::default(), cfg, 5, 2).unwrap();
    assert!(t.train_epoch(&toy_set(1, 10)).is_err());
}
