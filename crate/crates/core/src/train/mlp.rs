use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{axpy, dot, Matrix};

/// Layer sizes of a fully connected network with ReLU hidden layers and a
/// linear output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
}

impl Architecture {
    fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim];
        s.extend(&self.hidden);
        s.push(self.embedding_dim);
        s
    }
}

/// Weights `out × in` and bias of one affine layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Matrix<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub arch: Architecture,
    pub layers: Vec<Layer>,
}

/// Activations kept for the backward pass: the input and every layer output
/// (after ReLU for hidden layers).
pub struct ForwardCache {
    outputs: Vec<Matrix<f64>>,
}

impl ForwardCache {
    pub fn embeddings(&self) -> &Matrix<f64> {
        self.outputs.last().expect("at least the input")
    }
}

impl MlpParams {
    /// He-normal weights, zero biases.
    pub fn init(arch: Architecture, rng: &mut impl Rng) -> Result<Self> {
        let sizes = arch.sizes();
        if sizes.contains(&0) {
            return Err(Error::InvalidParameter(
                "layer sizes must be positive".into(),
            ));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = (2.0 / fan_in as f64).sqrt();
                Layer {
                    w: Matrix::from_fn(fan_out, fan_in, |_, _| {
                        let g: f64 = StandardNormal.sample(rng);
                        std * g
                    }),
                    b: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self { arch, layers })
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            arch: self.arch.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    w: Matrix::zeros(l.w.rows(), l.w.cols()),
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }

    pub fn forward(&self, x: &Matrix<f64>) -> Result<ForwardCache> {
        if x.cols() != self.arch.input_dim {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.arch.input_dim
            )));
        }
        let last = self.layers.len() - 1;
        let mut outputs = vec![x.clone()];
        for (li, layer) in self.layers.iter().enumerate() {
            let mut h = outputs[li].matmul_t(&layer.w)?;
            for r in 0..h.rows() {
                for (v, &b) in h.row_mut(r).iter_mut().zip(&layer.b) {
                    *v += b;
                    if li < last && *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            outputs.push(h);
        }
        Ok(ForwardCache { outputs })
    }

    pub fn embed(&self, x: &Matrix<f64>) -> Result<Matrix<f64>> {
        Ok(self.forward(x)?.outputs.pop().expect("non-empty"))
    }

    /// Parameter gradients given `∂L/∂(embeddings)`.
    pub fn backward(&self, cache: &ForwardCache, dz: &Matrix<f64>) -> Self {
        let mut grads = self.zeros_like();
        let mut delta = dz.clone();
        for li in (0..self.layers.len()).rev() {
            let input = &cache.outputs[li];
            let g = &mut grads.layers[li];
            for r in 0..delta.rows() {
                let dr = delta.row(r);
                for (o, &d) in dr.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, input.row(r), g.w.row_mut(o));
                        g.b[o] += d;
                    }
                }
            }
            if li == 0 {
                break;
            }
            // through the affine map, then the ReLU of the layer below
            let w = &self.layers[li].w;
            let mut next = Matrix::zeros(delta.rows(), w.cols());
            for r in 0..delta.rows() {
                for (o, &d) in delta.row(r).iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, w.row(o), next.row_mut(r));
                    }
                }
                for (v, &a) in next.row_mut(r).iter_mut().zip(input.row(r)) {
                    if a <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
            delta = next;
        }
        grads
    }

    /// Visits `(weights, is_bias)` slices of `self` and `other` in lockstep.
    pub fn zip_mut(&mut self, other: &Self, mut f: impl FnMut(&mut [f64], &[f64], bool)) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            f(a.w.data_mut(), b.w.data(), false);
            f(&mut a.b, &b.b, true);
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.data().len() + l.b.len())
            .sum()
    }

    /// Squared norm of the weights (biases excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| dot(l.w.data(), l.w.data()))
            .sum()
    }
}
