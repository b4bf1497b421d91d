//! Multi-layer perceptron: leaky-ReLU hidden layers and a softmax output,
//! trained with cross-entropy and plain SGD with coupled weight decay.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::nn::backend::{draw_weight, Backend};
use crate::nn::logdomain::glorot_bound;
use crate::tensor::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// (log-)leaky ReLU with the backend's leak exponent.
    LeakyRelu,
    /// Softmax head trained against cross-entropy.
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<S> {
    /// `out × in`, row-major.
    pub weights: Matrix<S>,
    pub bias: Vec<S>,
    pub activation: Activation,
}

impl<S: Copy> Layer<S> {
    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Debug, Clone)]
pub struct MlpModel<B: Backend> {
    backend: B,
    layers: Vec<Layer<B::Scalar>>,
}

/// Per-sample buffers filled by [`MlpModel::forward`].
#[derive(Debug, Clone)]
pub struct Activations<S> {
    /// Pre-activation of each layer; the last entry holds the logits.
    pub pre: Vec<Vec<S>>,
    /// Post-activation of each hidden layer.
    pub post: Vec<Vec<S>>,
    pub probs: Vec<S>,
    delta: Vec<Vec<S>>,
}

/// Gradients summed over a mini-batch.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    pub layers: Vec<(Matrix<S>, Vec<S>)>,
    pub samples: usize,
}

impl<B: Backend> MlpModel<B> {
    /// Layer sizes `[input, hidden.., classes]`, Glorot-uniform weights with
    /// random signs, zero biases.
    pub fn new(backend: B, sizes: &[usize], seed: u64) -> Result<Self> {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        Self::with_rng(backend, sizes, &mut rng)
    }

    pub(crate) fn with_rng(backend: B, sizes: &[usize], rng: &mut Xoshiro256StarStar) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (l, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = glorot_bound(fan_in, fan_out);
            let data = (0..fan_in * fan_out)
                .map(|_| {
                    let (positive, u) = draw_weight(rng);
                    backend.weight_from_draw(positive, u, bound)
                })
                .collect();
            let activation = if l + 2 == sizes.len() { Activation::Softmax } else { Activation::LeakyRelu };
            layers.push(Layer {
                weights: Matrix::from_vec(fan_out, fan_in, data)?,
                bias: vec![backend.zero(); fan_out],
                activation,
            });
        }
        Ok(Self { backend, layers })
    }

    pub fn from_layers(backend: B, layers: Vec<Layer<B::Scalar>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("model needs at least one layer".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.outputs() {
                return Err(Error::Shape(format!("layer {l}: bias of {} for {} outputs", layer.bias.len(), layer.outputs())));
            }
            if l > 0 && layers[l - 1].outputs() != layer.inputs() {
                return Err(Error::Shape(format!("layer {l} expects {} inputs, previous layer gives {}", layer.inputs(), layers[l - 1].outputs())));
            }
        }
        Ok(Self { backend, layers })
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn layers(&self) -> &[Layer<B::Scalar>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<B::Scalar>] {
        &mut self.layers
    }

    /// `[input, hidden.., classes]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs())
            .chain(self.layers.iter().map(|l| l.outputs()))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs())
    }

    pub fn activations(&self) -> Activations<B::Scalar> {
        let z = self.backend.zero();
        Activations {
            pre: self.layers.iter().map(|l| vec![z; l.outputs()]).collect(),
            post: self.layers[..self.layers.len() - 1].iter().map(|l| vec![z; l.outputs()]).collect(),
            probs: vec![z; self.classes()],
            delta: self.layers.iter().map(|l| vec![z; l.outputs()]).collect(),
        }
    }

    pub fn gradients(&self) -> Gradients<B::Scalar> {
        let z = self.backend.zero();
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| (Matrix::filled(l.outputs(), l.inputs(), z), vec![z; l.outputs()]))
                .collect(),
            samples: 0,
        }
    }

    /// Fill the pre/post activations for one input. Returns the logits.
    pub fn forward<'a>(&self, x: &[B::Scalar], act: &'a mut Activations<B::Scalar>) -> Result<&'a [B::Scalar]> {
        let b = &self.backend;
        for (l, layer) in self.layers.iter().enumerate() {
            let (input, pre) = if l == 0 {
                (x, &mut act.pre[0])
            } else {
                (act.post[l - 1].as_slice(), &mut act.pre[l])
            };
            tensor::gemv_into(b, &layer.weights, input, Some(&layer.bias), pre)?;
            if layer.activation == Activation::LeakyRelu {
                for (o, &p) in act.post[l].iter_mut().zip(act.pre[l].iter()) {
                    *o = b.activate(p);
                }
            }
        }
        Ok(act.pre.last().expect("at least one layer"))
    }

    /// Index of the largest logit (first on ties).
    pub fn predict(&self, x: &[B::Scalar], act: &mut Activations<B::Scalar>) -> Result<usize> {
        let logits = self.forward(x, act)?;
        Ok(argmax(logits.iter().map(|&v| self.backend.decode(v))))
    }

    /// Back-propagate the cross-entropy gradient of the sample last passed to
    /// [`forward`](Self::forward) and add it to `grads`.
    pub fn backward(
        &self,
        x: &[B::Scalar],
        act: &mut Activations<B::Scalar>,
        label: usize,
        grads: &mut Gradients<B::Scalar>,
    ) -> Result<()> {
        let b = &self.backend;
        let last = self.layers.len() - 1;
        {
            let Activations { pre, probs, delta, .. } = act;
            b.softmax_grad(&pre[last], label, probs, &mut delta[last])?;
        }
        for l in (0..=last).rev() {
            let input = if l == 0 { x } else { act.post[l - 1].as_slice() };
            let (gw, gb) = &mut grads.layers[l];
            tensor::accumulate_outer(b, gw, &act.delta[l], input)?;
            tensor::accumulate(b, gb, &act.delta[l])?;
            if l > 0 {
                let (lower, upper) = act.delta.split_at_mut(l);
                let below = &mut lower[l - 1];
                tensor::gemv_transpose_into(b, &self.layers[l].weights, &upper[0], below)?;
                for (d, &p) in below.iter_mut().zip(act.pre[l - 1].iter()) {
                    *d = b.activate_backward(*d, p);
                }
            }
        }
        grads.samples += 1;
        Ok(())
    }

    /// `g' = g ⊞ (λ ⊡ w)`, `w ← w ⊟ (scale ⊡ g')` for every parameter, then
    /// clear the gradients. `scale` is `lr / batch` encoded in the backend.
    pub fn sgd_step(&mut self, grads: &mut Gradients<B::Scalar>, scale: B::Scalar, decay: B::Scalar) {
        let b = &self.backend;
        let zero = b.zero();
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grads.layers.iter_mut()) {
            let params = layer.weights.as_mut_slice().iter_mut().chain(layer.bias.iter_mut());
            let gs = gw.as_mut_slice().iter_mut().chain(gb.iter_mut());
            for (w, g) in params.zip(gs) {
                let gd = if b.is_zero(decay) { *g } else { b.add(*g, b.mul(decay, *w)) };
                if !b.is_zero(gd) {
                    *w = b.sub(*w, b.mul(scale, gd));
                }
                *g = zero;
            }
        }
        grads.samples = 0;
    }

    /// Cross-entropy (natural log) of one sample, evaluated from the decoded
    /// logits in double precision.
    pub fn loss(&self, x: &[B::Scalar], label: usize, act: &mut Activations<B::Scalar>) -> Result<f64> {
        let logits: Vec<f64> = self.forward(x, act)?.iter().map(|&v| self.backend.decode(v)).collect();
        if label >= logits.len() {
            return Err(Error::Label { label, classes: logits.len() });
        }
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
        Ok(lse - logits[label])
    }

    /// All parameters decoded to `f64`, layer by layer (weights then bias).
    pub fn decoded_parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(l.bias.iter()))
            .map(|&v| self.backend.decode(v))
            .collect()
    }

    /// Same architecture with parameters decoded and re-encoded in `target`.
    pub fn convert<T: Backend>(&self, target: T) -> MlpModel<T> {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                weights: Matrix::from_vec(
                    l.weights.rows(),
                    l.weights.cols(),
                    l.weights.as_slice().iter().map(|&v| target.encode(self.backend.decode(v))).collect(),
                )
                .expect("same shape"),
                bias: l.bias.iter().map(|&v| target.encode(self.backend.decode(v))).collect(),
                activation: l.activation,
            })
            .collect();
        MlpModel { backend: target, layers }
    }
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::backend::FloatBackend;

    #[test]
    fn shapes() {
        let m = MlpModel::new(FloatBackend::default(), &[4, 3, 2], 1).unwrap();
        assert_eq!(m.sizes(), vec![4, 3, 2]);
        assert_eq!(m.layers()[0].activation, Activation::LeakyRelu);
        assert_eq!(m.layers()[1].activation, Activation::Softmax);
        assert!(MlpModel::new(FloatBackend::default(), &[4], 1).is_err());
        assert!(MlpModel::new(FloatBackend::default(), &[4, 0, 2], 1).is_err());
        let mut act = m.activations();
        assert!(m.forward(&[1.0, 2.0], &mut act).is_err());
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut m = MlpModel::new(FloatBackend::default(), &[3, 4, 2], 5).unwrap();
        let before = m.decoded_parameters();
        let mut g = m.gradients();
        m.sgd_step(&mut g, 0.01, 0.0);
        assert_eq!(m.decoded_parameters(), before);
    }

    #[test]
    fn single_step_reduces_loss() {
        let mut m = MlpModel::new(FloatBackend::default(), &[1, 2], 2).unwrap();
        let x = [1.0];
        let mut act = m.activations();
        let before = m.loss(&x, 0, &mut act).unwrap();
        let mut g = m.gradients();
        m.forward(&x, &mut act).unwrap();
        m.backward(&x, &mut act, 0, &mut g).unwrap();
        m.sgd_step(&mut g, 0.1, 0.0);
        assert!(m.loss(&x, 0, &mut act).unwrap() < before);
    }

    #[test]
    fn from_layers_checks_chain() {
        let m = MlpModel::new(FloatBackend::default(), &[3, 4, 2], 5).unwrap();
        let mut layers = m.layers().to_vec();
        layers.swap(0, 1);
        assert!(MlpModel::from_layers(FloatBackend::default(), layers).is_err());
    }
}
