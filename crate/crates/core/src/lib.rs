//! Multiplier-free neural-network training in a fixed-point logarithmic
//! number system (LNS).
//!
//! Every multiply is an integer add of log codes; every add is a max plus a
//! correction term read from a small table or produced by a bit shift. The
//! crate provides the scalar formats, the correction-term evaluators, dense
//! log-domain kernels, an MLP trainer generic over LNS / linear fixed point /
//! double float, an IDX dataset reader, and an experiment harness.
//!
//! ```
//! use lnsnet::{DeltaApproximator, LnsFormat};
//!
//! let fmt = LnsFormat::LOG16;
//! let a = fmt.encode(3.0);
//! let b = fmt.encode(-1.25);
//! let exact = lnsnet::lns::add(a, b, &DeltaApproximator::exact(fmt));
//! assert!((fmt.decode(exact) - 1.75).abs() < 1e-3);
//! // a 20-entry table reads Δ at the nearest half-integer difference
//! let lut = DeltaApproximator::lut_with(10.0, 0.5, fmt).unwrap();
//! assert!((fmt.decode(lnsnet::lns::add(a, b, &lut)) - 1.75).abs() < 0.25);
//! assert_eq!(fmt.decode(fmt.mul(fmt.encode(4.0), fmt.encode(0.5))), 2.0);
//! ```

pub mod dataset;
pub mod delta;
pub mod error;
pub mod fixed;
pub mod harness;
pub mod lns;
pub mod nn;
pub mod pow2;
pub mod tensor;

pub use dataset::{Dataset, EncodedSet};
pub use delta::{DeltaApproximator, DeltaMode, DeltaTable, ErrorProfile};
pub use error::{Error, Result};
pub use fixed::{required_log_width, FixedFormat, FixedScalar};
pub use lns::{LnsFormat, LnsScalar};
pub use pow2::Pow2FracTable;
pub use tensor::{Arith, F64Arith, LnsMatrix, LnsVector, Matrix, Vector};
