//! The multilayer perceptron, its numeric backends and the SGD trainer.

pub mod backend;
pub mod checkpoint;
pub mod config;
pub mod logdomain;
pub mod model;
pub mod train;

pub use backend::{Backend, BackendKind, FixedBackend, FloatBackend, LnsBackend, DEFAULT_BETA};
pub use checkpoint::{AnyModel, Checkpoint, Checkpointable};
pub use config::{ApproxConfig, NumericConfig, TrainConfig};
pub use model::{Activation, Activations, Gradients, Layer, MlpModel};
pub use train::{evaluate, EpochReport, Trainer};
