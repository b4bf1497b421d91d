use crate::delta::DeltaApproximator;
use crate::error::{Error, Result};
use crate::fixed::FixedFormat;
use crate::lns::LnsFormat;
use crate::nn::backend::{FixedBackend, FloatBackend, LnsBackend, DEFAULT_BETA};
use crate::pow2::Pow2FracTable;

/// How `Δ±` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApproxConfig {
    Exact,
    Lut { d_max: f64, resolution: f64 },
    BitShift,
}

impl ApproxConfig {
    /// `d_max = 10`, `r = 1/2`: 20 entries per curve.
    pub const GENERAL_LUT: ApproxConfig = ApproxConfig::Lut { d_max: 10.0, resolution: 0.5 };
    /// `d_max = 10`, `r = 1/64`: 640 entries per curve.
    pub const SOFTMAX_LUT: ApproxConfig = ApproxConfig::Lut { d_max: 10.0, resolution: 1.0 / 64.0 };

    pub fn build(&self, fmt: LnsFormat) -> Result<DeltaApproximator> {
        Ok(match *self {
            ApproxConfig::Exact => DeltaApproximator::exact(fmt),
            ApproxConfig::BitShift => DeltaApproximator::bit_shift(fmt),
            ApproxConfig::Lut { d_max, resolution } => DeltaApproximator::lut_with(d_max, resolution, fmt)?,
        })
    }

    pub fn label(&self) -> String {
        match self {
            ApproxConfig::Exact => "exact".into(),
            ApproxConfig::BitShift => "bitshift".into(),
            ApproxConfig::Lut { d_max, resolution } => format!("lut(d_max={d_max},r={resolution})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NumericConfig {
    Float,
    Fixed {
        int_bits: u32,
        frac_bits: u32,
    },
    Lns {
        int_bits: u32,
        frac_bits: u32,
        approx: ApproxConfig,
        softmax: ApproxConfig,
        /// Resolution of the `2^F` table is `2^-pow2_bits`.
        pow2_bits: u32,
    },
}

impl NumericConfig {
    pub fn lns(fmt: LnsFormat, approx: ApproxConfig) -> Self {
        NumericConfig::Lns {
            int_bits: fmt.int_bits(),
            frac_bits: fmt.frac_bits(),
            approx,
            softmax: ApproxConfig::SOFTMAX_LUT,
            pow2_bits: Pow2FracTable::DEFAULT_BITS,
        }
    }

    pub fn fixed(fmt: FixedFormat) -> Self {
        NumericConfig::Fixed { int_bits: fmt.int_bits(), frac_bits: fmt.frac_bits() }
    }

    pub fn float_backend(&self, beta: f64) -> FloatBackend {
        FloatBackend::new(beta)
    }

    pub fn fixed_backend(&self, beta: f64) -> Result<FixedBackend> {
        match *self {
            NumericConfig::Fixed { int_bits, frac_bits } => {
                let fmt = FixedFormat::new(int_bits, frac_bits)?;
                if fmt.width() > 32 {
                    return Err(Error::Spec(format!("fixed format wider than 32 bits: {}", fmt.width())));
                }
                Ok(FixedBackend::new(fmt, beta))
            }
            _ => Err(Error::Spec("not a fixed-point configuration".into())),
        }
    }

    pub fn lns_backend(&self, beta: f64) -> Result<LnsBackend> {
        match *self {
            NumericConfig::Lns { int_bits, frac_bits, approx, softmax, pow2_bits } => {
                let fmt = LnsFormat::new(int_bits, frac_bits)?;
                LnsBackend::new(approx.build(fmt)?, softmax.build(fmt)?, Pow2FracTable::new(pow2_bits), beta)
            }
            _ => Err(Error::Spec("not a log-domain configuration".into())),
        }
    }
}

/// The training recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Coupled weight decay `λ`; the gradient becomes `g + λ w`.
    pub weight_decay: f64,
    pub seed: u64,
    /// Leak exponent of (log-)leaky ReLU.
    pub beta: f64,
    pub hidden: Vec<usize>,
    pub numeric: NumericConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 5,
            epochs: 20,
            weight_decay: 1e-4,
            seed: 1,
            beta: DEFAULT_BETA,
            hidden: vec![100],
            numeric: NumericConfig::Float,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Spec(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Spec("batch size must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Spec(format!("weight decay must be nonnegative, got {}", self.weight_decay)));
        }
        if !(self.beta < 0.0) {
            return Err(Error::Spec(format!("leak exponent must be negative, got {}", self.beta)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Spec("hidden layers must be non-empty".into()));
        }
        Ok(())
    }

    /// Step scale applied to summed mini-batch gradients: `lr / batch`.
    pub fn step_scale(&self) -> f64 {
        self.learning_rate / self.batch_size as f64
    }
}
