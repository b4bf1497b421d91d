//! Correction terms for log-domain addition.
//!
//! `Δ+(d) = log2(1 + 2^-d)` and `Δ-(d) = log2(1 - 2^-d)` for `d >= 0`. Three
//! evaluators are provided:
//!
//! * `Exact`: the formula in double precision, rounded to the log grid.
//! * `Lut`: a uniform table with `d_max / r` samples per curve, indexed by the
//!   nearest sample `round(d / r)`. Differences at or beyond `d_max` give 0.
//! * `BitShift`: `Δ+(d) ≈ 2^-round(d)` and `Δ-(d) ≈ -1.5 · 2^-round(d)`.
//!
//! `Δ-(0)` is minus infinity; every evaluator reports it as the sentinel
//! (`None` from [`DeltaApproximator::minus_code`]), and `⊞` turns it into zero.
//!
//! Whatever the mode, results for every reachable on-grid difference are
//! expanded once into a dense array indexed by the difference code, so the
//! hot path of `⊞` is one load.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fixed::round_shift;
use crate::lns::LnsFormat;

/// Dense expansion is skipped when it would need more entries than this.
const DENSE_LIMIT: u64 = 1 << 21;
const NO_VALUE: i32 = i32::MIN;

fn exact_plus(d: f64) -> f64 {
    (-d).exp2().ln_1p() * std::f64::consts::LOG2_E
}

fn exact_minus(d: f64) -> f64 {
    (-(-d).exp2()).ln_1p() * std::f64::consts::LOG2_E
}

/// Nearest sample index; ties round up.
fn nearest_index(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

/// Uniformly sampled, grid-quantized `Δ±` curves.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    fmt: LnsFormat,
    d_max: f64,
    resolution: f64,
    plus: Vec<i32>,
    minus: Vec<i32>,
}

impl DeltaTable {
    /// Sample both curves at `k · r` for `k = 0 .. d_max / r`. The `Δ-` entry at
    /// `k = 0` holds the format's most negative code.
    pub fn build(d_max: f64, resolution: f64, fmt: LnsFormat) -> Result<Self> {
        let size = Self::checked_size(d_max, resolution)?;
        let mut plus = Vec::with_capacity(size);
        let mut minus = Vec::with_capacity(size);
        for k in 0..size {
            let d = k as f64 * resolution;
            plus.push(fmt.quantize(exact_plus(d)) as i32);
            minus.push(if k == 0 {
                fmt.sentinel_code()
            } else {
                fmt.quantize(exact_minus(d)).max(fmt.sentinel_code() as i64) as i32
            });
        }
        Ok(Self { fmt, d_max, resolution, plus, minus })
    }

    /// The bit-shift rule written out as a table with `r = 1` spanning every
    /// difference the format can produce.
    pub fn bit_shift(fmt: LnsFormat) -> Self {
        let size = 1usize << (fmt.int_bits() + 1);
        let plus = (0..size).map(|k| bit_shift_plus(k as u64, fmt)).collect();
        let minus = (0..size)
            .map(|k| bit_shift_minus(k as u64, fmt).unwrap_or(fmt.sentinel_code()))
            .collect();
        Self { fmt, d_max: size as f64, resolution: 1.0, plus, minus }
    }

    fn checked_size(d_max: f64, resolution: f64) -> Result<usize> {
        let bad = Error::TableSize { d_max, resolution };
        if !(d_max > 0.0 && resolution > 0.0) || !d_max.is_finite() || !resolution.is_finite() {
            return Err(bad);
        }
        let ratio = d_max / resolution;
        let size = ratio.round();
        if (ratio - size).abs() > 1e-9 * ratio.max(1.0) || size < 1.0 {
            return Err(bad);
        }
        Ok(size as usize)
    }

    pub fn format(&self) -> LnsFormat {
        self.fmt
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    pub fn plus_entries(&self) -> &[i32] {
        &self.plus
    }

    pub fn minus_entries(&self) -> &[i32] {
        &self.minus
    }

    fn index(&self, d: f64) -> Option<usize> {
        if d >= self.d_max {
            None
        } else {
            Some((nearest_index(d / self.resolution) as usize).min(self.len() - 1))
        }
    }

    /// CSV with columns `k,d,delta_plus,delta_minus` (log units).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,d,delta_plus,delta_minus")?;
        for k in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{}",
                k,
                k as f64 * self.resolution,
                self.fmt.code_to_log(self.plus[k]),
                self.fmt.code_to_log(self.minus[k])
            )?;
        }
        Ok(())
    }
}

fn bit_shift_plus(shift: u64, fmt: LnsFormat) -> i32 {
    round_shift(1i128 << fmt.frac_bits(), shift.min(120) as i32) as i32
}

fn bit_shift_minus(shift: u64, fmt: LnsFormat) -> Option<i32> {
    (shift > 0).then(|| -(round_shift(3i128 << fmt.frac_bits(), shift.min(120) as i32 + 1) as i32))
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeltaMode {
    Exact,
    Lut(DeltaTable),
    BitShift,
}

#[derive(Debug)]
struct Dense {
    plus: Vec<i32>,
    minus: Vec<i32>,
}

/// Evaluates `Δ±` on the grid of one [`LnsFormat`].
#[derive(Debug, Clone)]
pub struct DeltaApproximator {
    fmt: LnsFormat,
    mode: DeltaMode,
    dense: Option<Arc<Dense>>,
}

impl PartialEq for DeltaApproximator {
    fn eq(&self, other: &Self) -> bool {
        self.fmt == other.fmt && self.mode == other.mode
    }
}

impl DeltaApproximator {
    pub fn exact(fmt: LnsFormat) -> Self {
        Self::with_mode(fmt, DeltaMode::Exact)
    }

    pub fn bit_shift(fmt: LnsFormat) -> Self {
        Self::with_mode(fmt, DeltaMode::BitShift)
    }

    pub fn lut(table: DeltaTable) -> Self {
        Self::with_mode(table.format(), DeltaMode::Lut(table))
    }

    /// Shorthand for `lut(DeltaTable::build(d_max, r, fmt)?)`.
    pub fn lut_with(d_max: f64, resolution: f64, fmt: LnsFormat) -> Result<Self> {
        Ok(Self::lut(DeltaTable::build(d_max, resolution, fmt)?))
    }

    fn with_mode(fmt: LnsFormat, mode: DeltaMode) -> Self {
        let mut approx = Self { fmt, mode, dense: None };
        approx.dense = approx.expand().map(Arc::new);
        approx
    }

    /// Differences at or past this code give 0 on both curves.
    fn vanishing_code(&self) -> u64 {
        let q_f = self.fmt.frac_bits() as u64;
        let limit = match &self.mode {
            DeltaMode::Exact => (q_f + 3) << q_f,
            DeltaMode::BitShift => (q_f + 2) << q_f,
            DeltaMode::Lut(t) => (t.d_max * (q_f as f64).exp2()).ceil() as u64,
        };
        // largest reachable difference is max_code - min_code
        let reach = (self.fmt.max_code() as i64 - self.fmt.min_code() as i64) as u64 + 1;
        limit.min(reach)
    }

    fn expand(&self) -> Option<Dense> {
        let len = self.vanishing_code();
        if len > DENSE_LIMIT {
            return None;
        }
        let plus = (0..len).map(|d| self.eval_plus(d)).collect();
        let minus = (0..len).map(|d| self.eval_minus(d).unwrap_or(NO_VALUE)).collect();
        Some(Dense { plus, minus })
    }

    pub fn format(&self) -> LnsFormat {
        self.fmt
    }

    pub fn mode(&self) -> &DeltaMode {
        &self.mode
    }

    pub fn table(&self) -> Option<&DeltaTable> {
        match &self.mode {
            DeltaMode::Lut(t) => Some(t),
            _ => None,
        }
    }

    /// `Δ+` for a difference given as a grid code.
    #[inline]
    pub fn plus_code(&self, d: u64) -> i32 {
        match &self.dense {
            Some(t) => t.plus.get(d as usize).copied().unwrap_or(0),
            None => self.eval_plus(d),
        }
    }

    /// `Δ-` for a difference given as a grid code; `None` is the sentinel.
    #[inline]
    pub fn minus_code(&self, d: u64) -> Option<i32> {
        match &self.dense {
            Some(t) => match t.minus.get(d as usize) {
                Some(&NO_VALUE) => None,
                Some(&c) => Some(c),
                None => Some(0),
            },
            None => self.eval_minus(d),
        }
    }

    fn eval_plus(&self, d: u64) -> i32 {
        self.plus_at(d as f64 * self.fmt.step())
    }

    fn eval_minus(&self, d: u64) -> Option<i32> {
        self.minus_at(d as f64 * self.fmt.step())
    }

    fn plus_at(&self, d: f64) -> i32 {
        match &self.mode {
            DeltaMode::Exact => self.fmt.quantize(exact_plus(d)) as i32,
            DeltaMode::Lut(t) => t.index(d).map_or(0, |k| t.plus[k]),
            DeltaMode::BitShift => bit_shift_plus(nearest_index(d), self.fmt),
        }
    }

    fn minus_at(&self, d: f64) -> Option<i32> {
        match &self.mode {
            DeltaMode::Exact => {
                (d > 0.0).then(|| self.fmt.quantize(exact_minus(d)).max(i32::MIN as i64 + 1) as i32)
            }
            DeltaMode::Lut(t) => match t.index(d) {
                None => Some(0),
                Some(0) => None,
                Some(k) => Some(t.minus[k]),
            },
            DeltaMode::BitShift => bit_shift_minus(nearest_index(d), self.fmt),
        }
    }

    /// `Δ+(d)` in log units for a real difference `d >= 0`.
    pub fn delta_plus(&self, d: f64) -> Result<f64> {
        if d.is_nan() || d < 0.0 {
            return Err(Error::NegativeDifference(d));
        }
        Ok(self.fmt.code_to_log(self.plus_at(d)))
    }

    /// `Δ-(d)` in log units; the sentinel reads as the format's most negative
    /// log value.
    pub fn delta_minus(&self, d: f64) -> Result<f64> {
        if d.is_nan() || d < 0.0 {
            return Err(Error::NegativeDifference(d));
        }
        Ok(self
            .fmt
            .code_to_log(self.minus_at(d).unwrap_or(self.fmt.sentinel_code())))
    }

    /// Default sweep width for [`error_profile`](Self::error_profile): twice the
    /// table range, or twice the range where the curves vanish.
    pub fn default_span(&self) -> f64 {
        match &self.mode {
            DeltaMode::Lut(t) => 2.0 * t.d_max,
            _ => 2.0 * (self.vanishing_code() as f64 * self.fmt.step()),
        }
    }

    /// Absolute error against the unquantized formulas, sampled at
    /// `n_samples` evenly spaced points of `[0, span]`. Points where `Δ-`
    /// returns the sentinel are left out of the `Δ-` statistics.
    pub fn error_profile(&self, n_samples: usize, span: f64) -> ErrorProfile {
        let n = n_samples.max(2);
        let mut p = ErrorProfile::default();
        let mut minus_count = 0usize;
        for i in 0..n {
            let d = span * i as f64 / (n - 1) as f64;
            let ep = (self.fmt.code_to_log(self.plus_at(d)) - exact_plus(d)).abs();
            p.plus_max = p.plus_max.max(ep);
            p.plus_mean += ep;
            if let Some(c) = self.minus_at(d) {
                let em = (self.fmt.code_to_log(c) - exact_minus(d)).abs();
                p.minus_max = p.minus_max.max(em);
                p.minus_mean += em;
                minus_count += 1;
            }
        }
        p.plus_mean /= n as f64;
        if minus_count > 0 {
            p.minus_mean /= minus_count as f64;
        }
        p.samples = n;
        p
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorProfile {
    pub samples: usize,
    pub plus_max: f64,
    pub plus_mean: f64,
    pub minus_max: f64,
    pub minus_mean: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f16() -> LnsFormat {
        LnsFormat::new(4, 10).unwrap()
    }

    #[test]
    fn table_sizes() {
        let f = f16();
        assert_eq!(DeltaTable::build(10.0, 0.5, f).unwrap().len(), 20);
        assert_eq!(DeltaTable::build(10.0, 1.0 / 64.0, f).unwrap().len(), 640);
        assert!(DeltaTable::build(10.0, 0.3, f).is_err());
        assert!(DeltaTable::build(0.0, 0.5, f).is_err());
        assert!(DeltaTable::build(10.0, -0.5, f).is_err());
    }

    #[test]
    fn table_contents() {
        let f = f16();
        let t = DeltaTable::build(10.0, 0.5, f).unwrap();
        assert_eq!(t.plus_entries()[0], f.unit_code());
        assert_eq!(t.minus_entries()[0], f.sentinel_code());
        assert!(t.plus_entries().windows(2).all(|w| w[0] > w[1]));
        assert!(t.minus_entries().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t.plus_entries()[2], f.quantize(0.5849625007211562) as i32);
    }

    #[test]
    fn fine_table_is_monotone() {
        let t = DeltaTable::build(10.0, 1.0 / 64.0, f16()).unwrap();
        assert!(t.plus_entries().windows(2).all(|w| w[0] >= w[1]));
        assert!(t.minus_entries().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn delta_at_zero() {
        let f = f16();
        for a in [
            DeltaApproximator::exact(f),
            DeltaApproximator::bit_shift(f),
            DeltaApproximator::lut_with(10.0, 0.5, f).unwrap(),
        ] {
            assert_eq!(a.delta_plus(0.0).unwrap(), 1.0);
            assert_eq!(a.plus_code(0), f.unit_code());
            assert_eq!(a.minus_code(0), None);
            assert_eq!(a.delta_minus(0.0).unwrap(), f.code_to_log(f.sentinel_code()));
        }
    }

    #[test]
    fn exact_values() {
        let f = f16();
        let a = DeltaApproximator::exact(f);
        assert_eq!(a.delta_plus(1.0).unwrap(), f.code_to_log(f.quantize(0.5849625007211562) as i32));
        assert_eq!(a.delta_minus(1.0).unwrap(), -1.0);
        assert!(a.delta_plus(-0.1).is_err());
        assert!(a.delta_minus(f64::NAN).is_err());
    }

    #[test]
    fn bit_shift_values() {
        let a = DeltaApproximator::bit_shift(f16());
        assert_eq!(a.delta_plus(3.0).unwrap(), 0.125);
        assert_eq!(a.delta_minus(3.0).unwrap(), -0.1875);
        assert_eq!(a.delta_plus(1.0).unwrap(), 0.5);
        assert_eq!(a.delta_minus(1.0).unwrap(), -0.75);
    }

    #[test]
    fn lut_out_of_range_is_zero() {
        let f = f16();
        let a = DeltaApproximator::lut_with(10.0, 0.5, f).unwrap();
        assert_eq!(a.delta_plus(10.0).unwrap(), 0.0);
        assert_eq!(a.delta_minus(12.5).unwrap(), 0.0);
        assert_eq!(a.plus_code(20 << 10), 0);
        assert_eq!(a.minus_code(20 << 10), Some(0));
        // just below d_max reads the last sample
        let last = a.table().unwrap().plus_entries()[19];
        assert_eq!(a.plus_code((10 << 10) - 1), last);
    }

    #[test]
    fn dense_matches_direct_evaluation() {
        let f = LnsFormat::new(3, 6).unwrap();
        for a in [
            DeltaApproximator::exact(f),
            DeltaApproximator::bit_shift(f),
            DeltaApproximator::lut_with(10.0, 0.5, f).unwrap(),
            DeltaApproximator::lut_with(4.0, 0.25, f).unwrap(),
        ] {
            assert!(a.dense.is_some());
            let reach = (f.max_code() - f.min_code()) as u64;
            for d in 0..=reach {
                assert_eq!(a.plus_code(d), a.eval_plus(d), "{:?} {d}", a.mode);
                assert_eq!(a.minus_code(d), a.eval_minus(d), "{:?} {d}", a.mode);
            }
        }
    }

    #[test]
    fn wide_format_skips_dense_expansion() {
        let f = LnsFormat::new(6, 20).unwrap();
        let a = DeltaApproximator::exact(f);
        assert!(a.dense.is_none());
        assert_eq!(a.plus_code(0), f.unit_code());
        assert_eq!(a.minus_code(1 << 20), Some(-(1 << 20)));
    }

    #[test]
    fn error_profiles() {
        let f = f16();
        let exact = DeltaApproximator::exact(f).error_profile(4001, 20.0);
        assert!(exact.plus_max <= f.step() / 2.0 + 1e-12);
        assert!(exact.minus_max <= f.step() / 2.0 + 1e-12);
        let lut = DeltaApproximator::lut_with(10.0, 0.5, f).unwrap();
        let p = lut.error_profile(4001, 10.0);
        assert!(p.plus_max <= 0.18, "{p:?}");
        let bs = DeltaApproximator::bit_shift(f);
        assert_eq!((bs.delta_plus(0.0).unwrap() - exact_plus(0.0)).abs(), 0.0);
    }

    #[test]
    fn bit_shift_equals_unit_resolution_table() {
        let f = LnsFormat::new(3, 5).unwrap();
        let bs = DeltaApproximator::bit_shift(f);
        let lut = DeltaApproximator::lut(DeltaTable::bit_shift(f));
        let reach = (f.max_code() - f.min_code()) as u64;
        for d in 0..=reach {
            assert_eq!(bs.plus_code(d), lut.plus_code(d));
            assert_eq!(bs.minus_code(d), lut.minus_code(d));
        }
    }

    #[test]
    fn csv_export() {
        let t = DeltaTable::build(10.0, 0.5, f16()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 21);
        assert_eq!(lines[0], "k,d,delta_plus,delta_minus");
        assert_eq!(lines[1], "0,0,1,-16");
        assert!(lines[2].starts_with("1,0.5,"));
    }
}
