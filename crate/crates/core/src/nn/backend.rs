//! Numeric backends the MLP trainer is generic over.

use rand::RngCore;

use crate::delta::DeltaApproximator;
use crate::error::Result;
use crate::fixed::{FixedFormat, FixedScalar};
use crate::lns::{self, LnsFormat, LnsScalar};
use crate::nn::logdomain;
use crate::pow2::Pow2FracTable;
use crate::tensor::{Arith, F64Arith};

/// Leak exponent of (log-)leaky ReLU: negative inputs are scaled by `2^β`.
pub const DEFAULT_BETA: f64 = -7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Float,
    Fixed(FixedFormat),
    Lns(LnsFormat),
}

/// Everything the trainer needs beyond [`Arith`]: conversions, the
/// activation, the softmax/cross-entropy head and weight sampling.
pub trait Backend: Arith + Clone + Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Leak exponent in log2 units.
    fn beta(&self) -> f64;

    fn encode(&self, v: f64) -> Self::Scalar;

    fn decode(&self, a: Self::Scalar) -> f64;

    /// Pixel intensity `p / 256`.
    fn encode_pixel(&self, p: u8) -> Self::Scalar {
        self.encode(p as f64 / 256.0)
    }

    /// Pixel encoding that avoids a floating-point logarithm where the
    /// backend has one; the default is [`encode_pixel`](Self::encode_pixel).
    fn encode_pixel_approx(&self, p: u8) -> Self::Scalar {
        self.encode_pixel(p)
    }

    fn activate(&self, pre: Self::Scalar) -> Self::Scalar;

    /// Scale an upstream gradient by the activation's derivative at `pre`.
    fn activate_backward(&self, delta: Self::Scalar, pre: Self::Scalar) -> Self::Scalar;

    /// Softmax of `logits` into `probs` and the cross-entropy gradient
    /// `p - onehot(label)` into `delta`.
    fn softmax_grad(
        &self,
        logits: &[Self::Scalar],
        label: usize,
        probs: &mut [Self::Scalar],
        delta: &mut [Self::Scalar],
    ) -> Result<()>;

    /// Weight with the given sign and magnitude `bound · u`, `u ∈ (0, 1]`.
    fn weight_from_draw(&self, positive: bool, u: f64, bound: f64) -> Self::Scalar {
        let m = bound * u;
        self.encode(if positive { m } else { -m })
    }

    /// Serialized word, `word_bytes()` wide.
    fn to_word(&self, a: Self::Scalar) -> u64;
    fn from_word(&self, w: u64) -> Self::Scalar;
    fn word_bytes(&self) -> usize;
}

/// Draw the sign (Bernoulli 1/2) and a uniform `u ∈ (0, 1]`.
pub fn draw_weight<R: RngCore + ?Sized>(rng: &mut R) -> (bool, f64) {
    let positive = rng.next_u64() >> 63 == 1;
    let u = ((rng.next_u64() >> 11) + 1) as f64 * (-53f64).exp2();
    (positive, u)
}

fn one_hot_check(label: usize, n: usize) -> Result<()> {
    if label >= n {
        Err(crate::Error::Label { label, classes: n })
    } else {
        Ok(())
    }
}

fn softmax_f64(logits: &[f64], probs: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, &z) in probs.iter_mut().zip(logits) {
        *p = (z - m).exp();
        sum += *p;
    }
    probs.iter_mut().for_each(|p| *p /= sum);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloatBackend {
    beta: f64,
    slope: f64,
}

impl FloatBackend {
    pub fn new(beta: f64) -> Self {
        Self { beta, slope: beta.exp2() }
    }
}

impl Default for FloatBackend {
    fn default() -> Self {
        Self::new(DEFAULT_BETA)
    }
}

impl Arith for FloatBackend {
    type Scalar = f64;
    fn zero(&self) -> f64 {
        0.0
    }
    #[inline]
    fn is_zero(&self, a: f64) -> bool {
        a == 0.0
    }
    #[inline]
    fn mul(&self, a: f64, b: f64) -> f64 {
        F64Arith.mul(a, b)
    }
    #[inline]
    fn add(&self, a: f64, b: f64) -> f64 {
        a + b
    }
    #[inline]
    fn sub(&self, a: f64, b: f64) -> f64 {
        a - b
    }
}

impl Backend for FloatBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Float
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn encode(&self, v: f64) -> f64 {
        v
    }

    fn decode(&self, a: f64) -> f64 {
        a
    }

    fn activate(&self, pre: f64) -> f64 {
        if pre >= 0.0 {
            pre
        } else {
            pre * self.slope
        }
    }

    fn activate_backward(&self, delta: f64, pre: f64) -> f64 {
        if pre >= 0.0 {
            delta
        } else {
            delta * self.slope
        }
    }

    fn softmax_grad(&self, logits: &[f64], label: usize, probs: &mut [f64], delta: &mut [f64]) -> Result<()> {
        one_hot_check(label, logits.len())?;
        softmax_f64(logits, probs);
        for (j, (d, &p)) in delta.iter_mut().zip(probs.iter()).enumerate() {
            *d = if j == label { p - 1.0 } else { p };
        }
        Ok(())
    }

    fn to_word(&self, a: f64) -> u64 {
        a.to_bits()
    }

    fn from_word(&self, w: u64) -> f64 {
        f64::from_bits(w)
    }

    fn word_bytes(&self) -> usize {
        8
    }
}

/// Linear two's-complement fixed point with saturating arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedBackend {
    fmt: FixedFormat,
    beta: f64,
    slope: FixedScalar,
}

impl FixedBackend {
    pub fn new(fmt: FixedFormat, beta: f64) -> Self {
        Self { fmt, beta, slope: fmt.encode(beta.exp2()) }
    }

    pub fn format(&self) -> FixedFormat {
        self.fmt
    }
}

impl Arith for FixedBackend {
    type Scalar = FixedScalar;
    fn zero(&self) -> FixedScalar {
        FixedScalar::ZERO
    }
    #[inline]
    fn is_zero(&self, a: FixedScalar) -> bool {
        a.0 == 0
    }
    #[inline]
    fn mul(&self, a: FixedScalar, b: FixedScalar) -> FixedScalar {
        self.fmt.mul(a, b)
    }
    #[inline]
    fn add(&self, a: FixedScalar, b: FixedScalar) -> FixedScalar {
        self.fmt.add(a, b)
    }
    #[inline]
    fn sub(&self, a: FixedScalar, b: FixedScalar) -> FixedScalar {
        self.fmt.sub(a, b)
    }
}

impl Backend for FixedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Fixed(self.fmt)
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn encode(&self, v: f64) -> FixedScalar {
        self.fmt.encode(v)
    }

    fn decode(&self, a: FixedScalar) -> f64 {
        self.fmt.decode(a)
    }

    fn activate(&self, pre: FixedScalar) -> FixedScalar {
        if pre.0 >= 0 {
            pre
        } else {
            self.fmt.mul(pre, self.slope)
        }
    }

    fn activate_backward(&self, delta: FixedScalar, pre: FixedScalar) -> FixedScalar {
        if pre.0 >= 0 {
            delta
        } else {
            self.fmt.mul(delta, self.slope)
        }
    }

    /// The exponentials are evaluated in double precision from the decoded
    /// logits; probabilities and the gradient are quantized to the format.
    fn softmax_grad(
        &self,
        logits: &[FixedScalar],
        label: usize,
        probs: &mut [FixedScalar],
        delta: &mut [FixedScalar],
    ) -> Result<()> {
        one_hot_check(label, logits.len())?;
        let z: Vec<f64> = logits.iter().map(|&a| self.fmt.decode(a)).collect();
        let mut p = vec![0.0; z.len()];
        softmax_f64(&z, &mut p);
        let one = self.fmt.encode(1.0);
        for j in 0..z.len() {
            probs[j] = self.fmt.encode(p[j]);
            delta[j] = if j == label { self.fmt.sub(probs[j], one) } else { probs[j] };
        }
        Ok(())
    }

    fn to_word(&self, a: FixedScalar) -> u64 {
        a.0 as u32 as u64
    }

    fn from_word(&self, w: u64) -> FixedScalar {
        FixedScalar(w as u32 as i32 as i64)
    }

    fn word_bytes(&self) -> usize {
        4
    }
}

/// Log-domain arithmetic with two correction-term evaluators: a coarse one for
/// every `⊞` in the network and a finer one reserved for the softmax.
#[derive(Debug, Clone)]
pub struct LnsBackend {
    general: DeltaApproximator,
    softmax: DeltaApproximator,
    pow2: Pow2FracTable,
    linear: FixedFormat,
    beta: f64,
    beta_code: i32,
}

impl LnsBackend {
    pub fn new(
        general: DeltaApproximator,
        softmax: DeltaApproximator,
        pow2: Pow2FracTable,
        beta: f64,
    ) -> Result<Self> {
        let fmt = general.format();
        if softmax.format() != fmt {
            return Err(crate::Error::Incompatible(format!(
                "softmax evaluator serves {} but the network uses {}",
                softmax.format(),
                fmt
            )));
        }
        if beta >= 0.0 {
            return Err(crate::Error::Spec(format!("leak exponent must be negative, got {beta}")));
        }
        Ok(Self {
            linear: logdomain::softmax_linear_format(fmt),
            beta_code: fmt.quantize(beta) as i32,
            general,
            softmax,
            pow2,
            beta,
        })
    }

    pub fn format(&self) -> LnsFormat {
        self.general.format()
    }

    pub fn general(&self) -> &DeltaApproximator {
        &self.general
    }

    pub fn softmax(&self) -> &DeltaApproximator {
        &self.softmax
    }

    pub fn pow2(&self) -> &Pow2FracTable {
        &self.pow2
    }

    pub fn beta_code(&self) -> i32 {
        self.beta_code
    }
}

impl Arith for LnsBackend {
    type Scalar = LnsScalar;
    fn zero(&self) -> LnsScalar {
        LnsScalar::ZERO
    }
    #[inline]
    fn is_zero(&self, a: LnsScalar) -> bool {
        a.is_zero()
    }
    #[inline]
    fn mul(&self, a: LnsScalar, b: LnsScalar) -> LnsScalar {
        lns::mul(a, b, self.general.format())
    }
    #[inline]
    fn add(&self, a: LnsScalar, b: LnsScalar) -> LnsScalar {
        lns::add(a, b, &self.general)
    }
    #[inline]
    fn sub(&self, a: LnsScalar, b: LnsScalar) -> LnsScalar {
        lns::sub(a, b, &self.general)
    }
}

impl Backend for LnsBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Lns(self.format())
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn encode(&self, v: f64) -> LnsScalar {
        lns::encode(v, self.format())
    }

    fn decode(&self, a: LnsScalar) -> f64 {
        lns::decode(a, self.format())
    }

    fn encode_pixel_approx(&self, p: u8) -> LnsScalar {
        crate::dataset::pixel_to_lns_approx(p, &self.general)
    }

    fn activate(&self, pre: LnsScalar) -> LnsScalar {
        logdomain::llrelu(pre, self.beta_code, self.format())
    }

    fn activate_backward(&self, delta: LnsScalar, pre: LnsScalar) -> LnsScalar {
        logdomain::llrelu_backward(delta, pre, self.beta_code, self.format())
    }

    fn softmax_grad(
        &self,
        logits: &[LnsScalar],
        label: usize,
        probs: &mut [LnsScalar],
        delta: &mut [LnsScalar],
    ) -> Result<()> {
        one_hot_check(label, logits.len())?;
        let sm = logdomain::log_softmax(logits, &self.softmax, &self.pow2, self.linear);
        probs.copy_from_slice(&sm.probs);
        let g = logdomain::ce_grad_init(&sm.probs, label, &self.general)?;
        delta.copy_from_slice(&g);
        Ok(())
    }

    /// `X = log2(bound) + log2(u)`, rounded once onto the grid.
    fn weight_from_draw(&self, positive: bool, u: f64, bound: f64) -> LnsScalar {
        self.format().from_log(bound.log2() + u.log2(), positive)
    }

    fn to_word(&self, a: LnsScalar) -> u64 {
        self.format().to_word(a) as u64
    }

    fn from_word(&self, w: u64) -> LnsScalar {
        self.format().from_word(w as u32)
    }

    fn word_bytes(&self) -> usize {
        4
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256StarStar;

    #[test]
    fn float_leaky_relu() {
        let b = FloatBackend::default();
        assert_eq!(b.activate(2.0), 2.0);
        assert_eq!(b.activate(-128.0), -1.0);
        assert_eq!(b.activate_backward(1.0, -3.0), 1.0 / 128.0);
        assert_eq!(b.activate_backward(1.0, 0.0), 1.0);
    }

    #[test]
    fn fixed_leaky_relu_is_a_shift() {
        let f = FixedFormat::new(4, 11).unwrap();
        let b = FixedBackend::new(f, -7.0);
        assert_eq!(b.decode(b.activate(b.encode(-2.0))), -2.0 / 128.0);
        assert_eq!(b.activate(b.encode(1.5)), b.encode(1.5));
    }

    #[test]
    fn float_softmax_gradient_sums_to_zero() {
        let b = FloatBackend::default();
        let mut p = [0.0; 3];
        let mut d = [0.0; 3];
        b.softmax_grad(&[1.0, 0.0, -1.0], 1, &mut p, &mut d).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.iter().sum::<f64>().abs() < 1e-12);
        assert!(b.softmax_grad(&[1.0, 0.0], 2, &mut [0.0; 2], &mut [0.0; 2]).is_err());
    }

    #[test]
    fn weight_draws_share_distribution_across_backends() {
        let f = LnsFormat::LOG16;
        let lns_b = LnsBackend::new(
            DeltaApproximator::exact(f),
            DeltaApproximator::exact(f),
            Pow2FracTable::default(),
            -7.0,
        )
        .unwrap();
        let fl = FloatBackend::default();
        let mut rng = Xoshiro256StarStar::seed_from_u64(3);
        for _ in 0..1000 {
            let (s, u) = draw_weight(&mut rng);
            assert!(u > 0.0 && u <= 1.0);
            let a = fl.weight_from_draw(s, u, 0.08);
            let b = lns_b.decode(lns_b.weight_from_draw(s, u, 0.08));
            assert!((a - b).abs() <= a.abs() * 1e-3 + 1e-9);
        }
    }

    #[test]
    fn lns_backend_rejects_mismatched_formats() {
        let a = DeltaApproximator::exact(LnsFormat::LOG16);
        let b = DeltaApproximator::exact(LnsFormat::LOG12);
        assert!(LnsBackend::new(a.clone(), b, Pow2FracTable::default(), -7.0).is_err());
        assert!(LnsBackend::new(a.clone(), a, Pow2FracTable::default(), 1.0).is_err());
    }

    #[test]
    fn fixed_word_round_trip() {
        let b = FixedBackend::new(FixedFormat::new(4, 11).unwrap(), -7.0);
        for v in [-16.0, -0.001, 0.0, 3.25, 15.9] {
            let a = b.encode(v);
            assert_eq!(b.from_word(b.to_word(a)), a);
        }
    }
}
