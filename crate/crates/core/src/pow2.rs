//! Uniform table of `2^F` for `F ∈ [0, 1)`, used to bring log-domain values
//! back to a linear fixed-point format.

/// `2^bits` entries of `2^(i / 2^bits)` as unsigned fixed point with
/// [`Pow2FracTable::MANTISSA_BITS`] fraction bits. Entries lie in `[1, 2)` and
/// strictly increase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pow2FracTable {
    bits: u32,
    entries: Vec<u64>,
}

impl Pow2FracTable {
    pub const MANTISSA_BITS: u32 = 52;
    /// Resolution 1/64, matching the softmax correction table.
    pub const DEFAULT_BITS: u32 = 6;

    /// Table with resolution `2^-bits`.
    pub fn new(bits: u32) -> Self {
        assert!(bits <= 24, "pow2 table resolution 2^-{bits} is too fine");
        let n = 1usize << bits;
        let scale = (Self::MANTISSA_BITS as f64).exp2();
        let entries = (0..n)
            .map(|i| ((i as f64 / n as f64).exp2() * scale).round() as u64)
            .collect();
        Self { bits, entries }
    }

    pub fn resolution_bits(&self) -> u32 {
        self.bits
    }

    pub fn resolution(&self) -> f64 {
        (-(self.bits as f64)).exp2()
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    /// Nearest entry for the fraction `frac / 2^frac_bits`. Returns the
    /// mantissa and a carry (1 when the fraction rounds up to the next
    /// integer, in which case the mantissa is `1.0`).
    pub fn lookup(&self, frac: u32, frac_bits: u32) -> (u64, u32) {
        let idx = if self.bits >= frac_bits {
            (frac as u64) << (self.bits - frac_bits)
        } else {
            let s = frac_bits - self.bits;
            let floor = (frac >> s) as u64;
            let rem = frac & ((1 << s) - 1);
            let half = 1u32 << (s - 1);
            if rem > half || (rem == half && floor & 1 == 1) {
                floor + 1
            } else {
                floor
            }
        };
        if idx as usize == self.entries.len() {
            (self.entries[0], 1)
        } else {
            (self.entries[idx as usize], 0)
        }
    }
}

impl Default for Pow2FracTable {
    fn default() -> Self {
        Self::new(Self::DEFAULT_BITS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_in_unit_octave_and_increasing() {
        let t = Pow2FracTable::default();
        assert_eq!(t.entries().len(), 64);
        let one = 1u64 << Pow2FracTable::MANTISSA_BITS;
        assert_eq!(t.entries()[0], one);
        assert!(t.entries().iter().all(|&e| e >= one && e < 2 * one));
        assert!(t.entries().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn lookup_rounds_and_carries() {
        let t = Pow2FracTable::new(2);
        // 10 fraction bits: 0.5 -> index 2
        assert_eq!(t.lookup(512, 10), (t.entries()[2], 0));
        // 0.99 rounds to 1.0 -> carry
        assert_eq!(t.lookup(1020, 10), (t.entries()[0], 1));
        // finer table than the input grid: exact index
        let fine = Pow2FracTable::new(12);
        assert_eq!(fine.lookup(3, 10), (fine.entries()[12], 0));
    }
}
