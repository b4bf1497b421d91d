//! Linear-domain two's-complement fixed point.
//!
//! A [`FixedFormat`] with `b_i` integer bits and `b_f` fraction bits spans
//! `[-2^b_i, 2^b_i - 2^-b_f]` on a grid of step `2^-b_f`, plus one sign bit.
//! All arithmetic saturates; products round to nearest, ties to even.

use crate::error::{Error, Result};

/// Raw code in units of `2^-b_f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FixedScalar(pub i64);

impl FixedScalar {
    pub const ZERO: FixedScalar = FixedScalar(0);

    pub fn code(self) -> i64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedFormat {
    int_bits: u32,
    frac_bits: u32,
}

impl FixedFormat {
    pub fn new(int_bits: u32, frac_bits: u32) -> Result<Self> {
        if int_bits + frac_bits > 62 {
            return Err(Error::Format(format!(
                "fixed format Q{int_bits}.{frac_bits} exceeds 63 bits"
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

    /// `W_lin = 1 + b_i + b_f`.
    pub fn width(&self) -> u32 {
        1 + self.int_bits + self.frac_bits
    }

    pub fn max_code(&self) -> i64 {
        (1i64 << (self.int_bits + self.frac_bits)) - 1
    }

    pub fn min_code(&self) -> i64 {
        -(1i64 << (self.int_bits + self.frac_bits))
    }

    pub fn max_value(&self) -> f64 {
        self.decode(FixedScalar(self.max_code()))
    }

    pub fn min_value(&self) -> f64 {
        self.decode(FixedScalar(self.min_code()))
    }

    pub fn step(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn saturate(&self, code: i128) -> FixedScalar {
        FixedScalar(code.clamp(self.min_code() as i128, self.max_code() as i128) as i64)
    }

    pub fn from_code(&self, code: i64) -> FixedScalar {
        self.saturate(code as i128)
    }

    /// Round-to-nearest-even, saturating. NaN maps to zero.
    pub fn encode(&self, v: f64) -> FixedScalar {
        if v.is_nan() {
            return FixedScalar::ZERO;
        }
        let scaled = (v * (self.frac_bits as f64).exp2()).round_ties_even();
        if scaled >= self.max_code() as f64 {
            FixedScalar(self.max_code())
        } else if scaled <= self.min_code() as f64 {
            FixedScalar(self.min_code())
        } else {
            FixedScalar(scaled as i64)
        }
    }

    pub fn decode(&self, a: FixedScalar) -> f64 {
        a.0 as f64 * self.step()
    }

    pub fn add(&self, a: FixedScalar, b: FixedScalar) -> FixedScalar {
        self.saturate(a.0 as i128 + b.0 as i128)
    }

    pub fn sub(&self, a: FixedScalar, b: FixedScalar) -> FixedScalar {
        self.saturate(a.0 as i128 - b.0 as i128)
    }

    pub fn neg(&self, a: FixedScalar) -> FixedScalar {
        self.saturate(-(a.0 as i128))
    }

    pub fn mul(&self, a: FixedScalar, b: FixedScalar) -> FixedScalar {
        let wide = a.0 as i128 * b.0 as i128;
        self.saturate(round_shift(wide, self.frac_bits as i32))
    }

    /// Multiply by `2^exp` with rounding; a pure shift in hardware.
    pub fn scale_pow2(&self, a: FixedScalar, exp: i32) -> FixedScalar {
        self.saturate(round_shift(a.0 as i128, -exp))
    }
}

/// `v / 2^shift` rounded to nearest, ties to even. Negative `shift` is a left shift.
pub(crate) fn round_shift(v: i128, shift: i32) -> i128 {
    if shift <= 0 {
        let s = (-shift) as u32;
        return v.checked_shl(s).filter(|r| r >> s == v).unwrap_or(if v < 0 {
            i128::MIN
        } else {
            i128::MAX
        });
    }
    if shift >= 127 {
        return 0;
    }
    let floor = v >> shift;
    let rem = v - (floor << shift);
    let half = 1i128 << (shift - 1);
    if rem > half || (rem == half && floor & 1 == 1) {
        floor + 1
    } else {
        floor
    }
}

fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Smallest log-domain word width that matches the range and precision of a
/// linear fixed-point format with `b_i` integer bits, `b_f` fraction bits and
/// total width `w_lin`:
///
/// `W_log >= 1 + max(ceil(log2(b_i + 1)), ceil(log2(b_f))) + W_lin`
pub fn required_log_width(int_bits: u32, frac_bits: u32, w_lin: u32) -> u32 {
    1 + ceil_log2(int_bits as u64 + 1).max(ceil_log2(frac_bits as u64)) + w_lin
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_bound_worked_instances() {
        assert_eq!(required_log_width(4, 11, 16), 21);
        assert_eq!(required_log_width(0, 1, 2), 3);
        assert_eq!(required_log_width(1, 2, 4), 6);
    }

    #[test]
    fn width_bound_monotone() {
        for bi in 0..20 {
            for bf in 1..20 {
                let w = 1 + bi + bf;
                let r = required_log_width(bi, bf, w);
                assert!(required_log_width(bi + 1, bf, w) >= r);
                assert!(required_log_width(bi, bf + 1, w) >= r);
                assert!(required_log_width(bi, bf, w + 1) >= r);
            }
        }
    }

    #[test]
    fn half_times_half() {
        let f = FixedFormat::new(4, 11).unwrap();
        let h = f.encode(0.5);
        assert_eq!(f.decode(f.mul(h, h)), 0.25);
    }

    #[test]
    fn saturates() {
        let f = FixedFormat::new(4, 11).unwrap();
        let m = FixedScalar(f.max_code());
        assert_eq!(f.add(m, m), m);
        assert_eq!(f.sub(FixedScalar(f.min_code()), m).0, f.min_code());
        assert_eq!(f.encode(1e9).0, f.max_code());
        assert_eq!(f.encode(-1e9).0, f.min_code());
        assert_eq!(f.mul(f.encode(15.0), f.encode(15.0)).0, f.max_code());
    }

    #[test]
    fn product_close_to_reference() {
        let f = FixedFormat::new(4, 11).unwrap();
        let p = f.decode(f.mul(f.encode(1.3), f.encode(2.7)));
        assert!((p - 3.51).abs() <= 2f64.powi(-11), "{p}");
    }

    #[test]
    fn round_shift_ties_to_even() {
        assert_eq!(round_shift(3, 1), 2); // 1.5 -> 2
        assert_eq!(round_shift(5, 1), 2); // 2.5 -> 2
        assert_eq!(round_shift(-3, 1), -2); // -1.5 -> -2
        assert_eq!(round_shift(-5, 1), -2); // -2.5 -> -2
        assert_eq!(round_shift(7, 2), 2); // 1.75 -> 2
        assert_eq!(round_shift(3, -2), 12);
    }

    #[test]
    fn exhaustive_small_format_matches_reference() {
        // W_lin = 6
        let f = FixedFormat::new(2, 3).unwrap();
        for a in f.min_code()..=f.max_code() {
            for b in f.min_code()..=f.max_code() {
                let (x, y) = (FixedScalar(a), FixedScalar(b));
                let (xv, yv) = (f.decode(x), f.decode(y));
                assert_eq!(f.mul(x, y), f.encode(xv * yv), "{xv} * {yv}");
                assert_eq!(f.add(x, y), f.encode(xv + yv));
                assert_eq!(f.sub(x, y), f.encode(xv - yv));
            }
        }
    }
}
