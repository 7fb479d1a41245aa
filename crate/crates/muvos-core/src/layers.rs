//! Convolution layer parameters shared by the learned sub-networks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::{conv2d, Tensor};

/// Weights and bias of one 2-D convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor, // C_out x C_in x k x k
    pub bias: Tensor,   // C_out
}

impl ConvLayer {
    /// Fan-in scaled uniform initialization, reproducible for a fixed RNG
    /// stream: weights and biases in `[-1/sqrt(c_in k^2), 1/sqrt(c_in k^2)]`.
    pub fn init(c_in: usize, c_out: usize, kernel: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / ((c_in * kernel * kernel) as f64).sqrt();
        let wlen = c_out * c_in * kernel * kernel;
        let weight: Vec<f64> = (0..wlen).map(|_| rng.gen_range(-bound..bound)).collect();
        let bias: Vec<f64> = (0..c_out).map(|_| rng.gen_range(-bound..bound)).collect();
        ConvLayer {
            weight: Tensor::new(vec![c_out, c_in, kernel, kernel], weight).unwrap(),
            bias: Tensor::new(vec![c_out], bias).unwrap(),
        }
    }

    pub fn zeros(c_in: usize, c_out: usize, kernel: usize) -> Self {
        ConvLayer {
            weight: Tensor::zeros(&[c_out, c_in, kernel, kernel]),
            bias: Tensor::zeros(&[c_out]),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn forward(&self, input: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
        conv2d(input, &self.weight, &self.bias, stride, pad)
    }

    /// Forward with the padding that preserves spatial extents at stride 1.
    pub fn forward_same(&self, input: &Tensor) -> Result<Tensor> {
        self.forward(input, 1, self.kernel() / 2)
    }
}
