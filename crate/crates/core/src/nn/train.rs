use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::dataset::EncodedSet;
use crate::error::{Error, Result};
use crate::nn::backend::Backend;
use crate::nn::config::TrainConfig;
use crate::nn::model::{argmax, Activations, Gradients, MlpModel};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    /// Accuracy (%) of the predictions made while training on the epoch.
    pub train_accuracy: f64,
    /// Validation accuracy (%), when a validation set was supplied.
    pub val_accuracy: Option<f64>,
    pub seconds: f64,
}

/// Mini-batch SGD over an encoded dataset. Weight init and the per-epoch
/// shuffles come from one seeded xoshiro256** generator; the shuffle stream
/// is the init stream advanced by the generator's published `jump`.
pub struct Trainer<B: Backend> {
    model: MlpModel<B>,
    config: TrainConfig,
    rng: Xoshiro256StarStar,
    scale: B::Scalar,
    decay: B::Scalar,
    act: Activations<B::Scalar>,
    grads: Gradients<B::Scalar>,
    epoch: usize,
}

impl<B: Backend> Trainer<B> {
    pub fn new(backend: B, config: TrainConfig, input_dim: usize, classes: usize) -> Result<Self> {
        config.validate()?;
        let mut sizes = vec![input_dim];
        sizes.extend(&config.hidden);
        sizes.push(classes);
        let mut rng = Xoshiro256StarStar::seed_from_u64(config.seed);
        let model = MlpModel::with_rng(backend, &sizes, &mut rng.clone())?;
        rng.jump();
        Ok(Self::assemble(model, config, rng))
    }

    /// Continue from an existing model; only the shuffle stream is seeded.
    pub fn from_model(model: MlpModel<B>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Xoshiro256StarStar::seed_from_u64(config.seed);
        rng.jump();
        Ok(Self::assemble(model, config, rng))
    }

    fn assemble(model: MlpModel<B>, config: TrainConfig, rng: Xoshiro256StarStar) -> Self {
        let b = model.backend();
        let scale = b.encode(config.step_scale());
        let decay = b.encode(config.weight_decay);
        let act = model.activations();
        let grads = model.gradients();
        Self { model, config, rng, scale, decay, act, grads, epoch: 0 }
    }

    pub fn model(&self) -> &MlpModel<B> {
        &self.model
    }

    pub fn into_model(self) -> MlpModel<B> {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// The encoded `lr / batch` constant.
    pub fn step_scale(&self) -> B::Scalar {
        self.scale
    }

    fn check_set(&self, set: &EncodedSet<B::Scalar>) -> Result<()> {
        if set.dim() != self.model.input_dim() {
            return Err(Error::Shape(format!(
                "dataset has {} features, model expects {}",
                set.dim(),
                self.model.input_dim()
            )));
        }
        if set.classes() > self.model.classes() {
            return Err(Error::Shape(format!(
                "dataset has {} classes, model has {} outputs",
                set.classes(),
                self.model.classes()
            )));
        }
        Ok(())
    }

    /// One pass over `train` in a fresh random order. Returns the running
    /// training accuracy in percent.
    pub fn train_epoch(&mut self, train: &EncodedSet<B::Scalar>) -> Result<f64> {
        self.check_set(train)?;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut correct = 0usize;
        for batch in order.chunks(self.config.batch_size) {
            for &i in batch {
                let x = train.input(i);
                let label = train.label(i) as usize;
                let logits = self.model.forward(x, &mut self.act)?;
                if argmax(logits.iter().map(|&v| self.model.backend().decode(v))) == label {
                    correct += 1;
                }
                self.model.backward(x, &mut self.act, label, &mut self.grads)?;
            }
            self.model.sgd_step(&mut self.grads, self.scale, self.decay);
        }
        self.epoch += 1;
        Ok(percent(correct, train.len()))
    }

    /// Train for the configured number of epochs, reporting after each.
    pub fn fit(
        &mut self,
        train: &EncodedSet<B::Scalar>,
        val: Option<&EncodedSet<B::Scalar>>,
        mut on_epoch: impl FnMut(&EpochReport),
    ) -> Result<Vec<EpochReport>> {
        let mut reports = Vec::with_capacity(self.config.epochs);
        for _ in 0..self.config.epochs {
            let start = Instant::now();
            let train_accuracy = self.train_epoch(train)?;
            let val_accuracy = val.map(|v| evaluate(&self.model, v)).transpose()?;
            let report = EpochReport {
                epoch: self.epoch,
                train_accuracy,
                val_accuracy,
                seconds: start.elapsed().as_secs_f64(),
            };
            on_epoch(&report);
            reports.push(report);
        }
        Ok(reports)
    }
}

fn percent(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

/// Classification accuracy in percent.
pub fn evaluate<B: Backend>(model: &MlpModel<B>, set: &EncodedSet<B::Scalar>) -> Result<f64> {
    if set.dim() != model.input_dim() {
        return Err(Error::Shape(format!("dataset has {} features, model expects {}", set.dim(), model.input_dim())));
    }
    let mut act = model.activations();
    let mut correct = 0;
    for i in 0..set.len() {
        if model.predict(set.input(i), &mut act)? == set.label(i) as usize {
            correct += 1;
        }
    }
    Ok(percent(correct, set.len()))
}
