//! Fixed-point logarithmic number system.
//!
//! A real `v` is stored as its sign and `X = log2|v|`, with `X` quantized to a
//! two's-complement grid of `q_i` integer and `q_f` fraction bits. One word is
//! `2 + q_i + q_f` bits wide. The most negative log code is reserved for zero;
//! anything that rounds below the smallest magnitude flushes to it.
//!
//! Multiplication is an integer add of log codes. Addition needs the
//! correction term `log2(1 ± 2^-d)`, which is supplied by a
//! [`DeltaApproximator`].

use std::fmt;

use crate::delta::DeltaApproximator;
use crate::error::{Error, Result};
use crate::fixed::{round_shift, FixedFormat, FixedScalar};
use crate::pow2::Pow2FracTable;

/// Internal code for zero. Serialization maps it to the format's sentinel.
const ZERO_CODE: i32 = i32::MIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LnsFormat {
    int_bits: u32,
    frac_bits: u32,
}

impl LnsFormat {
    /// 16-bit word: sign, log sign, 4 integer and 10 fraction bits.
    pub const LOG16: LnsFormat = LnsFormat { int_bits: 4, frac_bits: 10 };
    /// 12-bit word with 6 fraction bits.
    pub const LOG12: LnsFormat = LnsFormat { int_bits: 4, frac_bits: 6 };

    pub fn new(int_bits: u32, frac_bits: u32) -> Result<Self> {
        if int_bits < 1 || frac_bits < 1 {
            return Err(Error::Format(format!(
                "log format needs q_i >= 1 and q_f >= 1, got q_i={int_bits} q_f={frac_bits}"
            )));
        }
        if int_bits + frac_bits > 30 {
            return Err(Error::Format(format!(
                "log format q_i={int_bits} q_f={frac_bits} does not fit a 32-bit word"
            )));
        }
        Ok(Self { int_bits, frac_bits })
    }

    pub fn int_bits(&self) -> u32 {
        self.int_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// `W_log = 2 + q_i + q_f`.
    pub fn width(&self) -> u32 {
        2 + self.int_bits + self.frac_bits
    }

    /// Code of `X = 1.0`.
    pub fn unit_code(&self) -> i32 {
        1 << self.frac_bits
    }

    /// The reserved most-negative code.
    pub fn sentinel_code(&self) -> i32 {
        -(1 << (self.int_bits + self.frac_bits))
    }

    pub fn min_code(&self) -> i32 {
        self.sentinel_code() + 1
    }

    pub fn max_code(&self) -> i32 {
        (1 << (self.int_bits + self.frac_bits)) - 1
    }

    pub fn x_min(&self) -> f64 {
        self.code_to_log(self.min_code())
    }

    pub fn x_max(&self) -> f64 {
        self.code_to_log(self.max_code())
    }

    pub fn step(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn code_to_log(&self, code: i32) -> f64 {
        code as f64 * self.step()
    }

    /// Round a real log value onto the grid (ties to even), without range checks.
    pub fn quantize(&self, x: f64) -> i64 {
        let v = (x * (self.frac_bits as f64).exp2()).round_ties_even();
        v.clamp(i64::MIN as f64 / 2.0, i64::MAX as f64 / 2.0) as i64
    }

    /// Saturate above the range, flush to zero below it.
    pub fn from_code(&self, code: i64, positive: bool) -> LnsScalar {
        if code < self.min_code() as i64 {
            LnsScalar::ZERO
        } else {
            LnsScalar {
                code: code.min(self.max_code() as i64) as i32,
                positive,
            }
        }
    }

    /// Scalar with log magnitude `x` (rounded to the grid).
    pub fn from_log(&self, x: f64, positive: bool) -> LnsScalar {
        self.from_code(self.quantize(x), positive)
    }

    /// The value one: `(X = 0, s = 1)`.
    pub fn one(&self) -> LnsScalar {
        LnsScalar { code: 0, positive: true }
    }

    pub fn encode(&self, v: f64) -> LnsScalar {
        encode(v, *self)
    }

    pub fn decode(&self, a: LnsScalar) -> f64 {
        decode(a, *self)
    }

    pub fn mul(&self, a: LnsScalar, b: LnsScalar) -> LnsScalar {
        mul(a, b, *self)
    }

    /// Serialized word: low `q_i + q_f + 1` bits hold the two's-complement
    /// log code, the next bit holds the sign (1 = positive).
    pub fn to_word(&self, a: LnsScalar) -> u32 {
        let n = self.int_bits + self.frac_bits + 1;
        let code = if a.is_zero() { self.sentinel_code() } else { a.code };
        let mask = (1u32 << n) - 1;
        (code as u32 & mask) | ((a.positive as u32) << n)
    }

    pub fn from_word(&self, word: u32) -> LnsScalar {
        let n = self.int_bits + self.frac_bits + 1;
        let raw = word & ((1u32 << n) - 1);
        // sign-extend the n-bit field
        let code = ((raw << (32 - n)) as i32) >> (32 - n);
        if code == self.sentinel_code() {
            LnsScalar::ZERO
        } else {
            LnsScalar { code, positive: (word >> n) & 1 == 1 }
        }
    }
}

impl fmt::Display for LnsFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "log{}(q_i={}, q_f={})", self.width(), self.int_bits, self.frac_bits)
    }
}

/// A sign bit and a quantized log magnitude. Zero has a single canonical
/// representation with the sign bit set.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LnsScalar {
    code: i32,
    positive: bool,
}

impl LnsScalar {
    pub const ZERO: LnsScalar = LnsScalar { code: ZERO_CODE, positive: true };

    pub fn is_zero(self) -> bool {
        self.code == ZERO_CODE
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    /// Sign bit `s_x`: 1 for positive values and zero.
    pub fn sign_bit(self) -> u8 {
        self.positive as u8
    }

    /// Log code in units of `2^-q_f`, or `None` for zero.
    pub fn code(self) -> Option<i32> {
        (!self.is_zero()).then_some(self.code)
    }

    pub fn log_mag(self, fmt: LnsFormat) -> Option<f64> {
        self.code().map(|c| fmt.code_to_log(c))
    }

    pub fn negate(self) -> LnsScalar {
        if self.is_zero() {
            self
        } else {
            LnsScalar { code: self.code, positive: !self.positive }
        }
    }

}

impl fmt::Debug for LnsScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "LnsScalar(0)")
        } else {
            write!(
                f,
                "LnsScalar({}2^[{}])",
                if self.positive { "+" } else { "-" },
                self.code
            )
        }
    }
}

/// Encode a finite real. Log magnitudes round to nearest (ties to even),
/// saturate at `X_max` and flush to zero below the grid.
pub fn encode(v: f64, fmt: LnsFormat) -> LnsScalar {
    if v == 0.0 || v.is_nan() {
        return LnsScalar::ZERO;
    }
    if v.is_infinite() {
        return fmt.from_code(i64::MAX, v > 0.0);
    }
    fmt.from_log(v.abs().log2(), v > 0.0)
}

pub fn decode(a: LnsScalar, fmt: LnsFormat) -> f64 {
    match a.code() {
        None => 0.0,
        Some(c) => {
            let m = fmt.code_to_log(c).exp2();
            if a.positive {
                m
            } else {
                -m
            }
        }
    }
}

/// `a ⊡ b`: add log codes, XNOR the signs.
pub fn mul(a: LnsScalar, b: LnsScalar, fmt: LnsFormat) -> LnsScalar {
    if a.is_zero() || b.is_zero() {
        return LnsScalar::ZERO;
    }
    fmt.from_code(a.code as i64 + b.code as i64, a.positive == b.positive)
}

/// `a ⊞ b`: `max(X, Y) + Δ±(|X - Y|)`, sign of the larger operand (ties take
/// `b`'s sign). The correction is a grid value supplied by `delta`; adding it
/// happens on the grid. Cancellation and underflow give canonical zero.
pub fn add(a: LnsScalar, b: LnsScalar, delta: &DeltaApproximator) -> LnsScalar {
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    let (hi, lo) = if a.code > b.code { (a, b) } else { (b, a) };
    let d = (hi.code as i64 - lo.code as i64) as u64;
    let corr = if a.positive == b.positive {
        delta.plus_code(d)
    } else {
        match delta.minus_code(d) {
            Some(c) => c,
            None => return LnsScalar::ZERO,
        }
    };
    delta.format().from_code(hi.code as i64 + corr as i64, hi.positive)
}

/// `a ⊟ b = a ⊞ (Y, !s_y)`.
pub fn sub(a: LnsScalar, b: LnsScalar, delta: &DeltaApproximator) -> LnsScalar {
    add(a, b.negate(), delta)
}

/// `x^y` for a positive radix `x`: the log magnitude becomes `y · X`, computed
/// with a linear fixed-point product and rounded onto the grid. The result is
/// always positive; a zero radix gives zero.
pub fn exp_posradix(
    radix: LnsScalar,
    exponent: FixedScalar,
    exp_fmt: FixedFormat,
    fmt: LnsFormat,
) -> LnsScalar {
    if radix.is_zero() {
        return LnsScalar::ZERO;
    }
    let wide = radix.code as i128 * exponent.0 as i128;
    let code = round_shift(wide, exp_fmt.frac_bits() as i32);
    fmt.from_code(code.clamp(i64::MIN as i128, i64::MAX as i128) as i64, true)
}

/// Linear value `s · 2^X` in a fixed-point format. `X` splits into an integer
/// part (a shift) and a fraction whose power of two comes from `pow2`.
pub fn to_fixed(
    a: LnsScalar,
    fmt: LnsFormat,
    out: FixedFormat,
    pow2: &Pow2FracTable,
) -> FixedScalar {
    let Some(code) = a.code() else {
        return FixedScalar::ZERO;
    };
    let q_f = fmt.frac_bits();
    let int_part = code >> q_f;
    let frac = (code & ((1 << q_f) - 1)) as u32;
    let (mant, carry) = pow2.lookup(frac, q_f);
    let shift = Pow2FracTable::MANTISSA_BITS as i32 - (int_part + carry as i32) - out.frac_bits() as i32;
    let mag = round_shift(mant as i128, shift);
    out.saturate(if a.positive { mag } else { -mag })
}

/// Exact conversion: decode the fixed-point value, then encode it.
pub fn fixed_to_lns_exact(a: FixedScalar, from: FixedFormat, fmt: LnsFormat) -> LnsScalar {
    encode(from.decode(a), fmt)
}

/// Conversion with log-domain arithmetic only: `log2(Σ 2^i)` over the set bits
/// of `|a|`, folded with `⊞` from the most significant bit down.
pub fn fixed_to_lns_approx(
    a: FixedScalar,
    from: FixedFormat,
    delta: &DeltaApproximator,
) -> LnsScalar {
    let fmt = delta.format();
    let mag = a.0.unsigned_abs();
    let mut acc = LnsScalar::ZERO;
    for bit in (0..64).rev().filter(|&b| mag >> b & 1 == 1) {
        let exp = bit as i64 - from.frac_bits() as i64;
        let term = fmt.from_code(exp << fmt.frac_bits(), true);
        acc = add(acc, term, delta);
    }
    if a.0 < 0 {
        acc.negate()
    } else {
        acc
    }
}
