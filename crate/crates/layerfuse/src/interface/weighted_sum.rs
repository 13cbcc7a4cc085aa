//! Baseline interface: one scalar weight per layer, summed dimension-wise.

use super::{LayerStack, Normalize};
use crate::numerics::{softmax_slice, softmax_slice_backward, Tensor};

#[derive(Debug, Clone)]
pub(crate) struct Params {
    weights: Tensor, // [L]
}

pub(crate) struct Cache {
    alpha: Vec<f64>,
    stack: Tensor, // [L, T, D]
}

impl Params {
    /// Raw weights start at zero: uniform layer mixing under softmax.
    pub fn init(num_layers: usize) -> Self {
        Params {
            weights: Tensor::zeros(&[num_layers]),
        }
    }

    pub fn trainable(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("w", &self.weights)]
    }

    pub fn trainable_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("w", &mut self.weights)]
    }

    pub fn forward(&self, stack: &LayerStack, normalize: Normalize) -> (Tensor, Cache) {
        let (l, t, d) = (stack.num_layers(), stack.num_frames(), stack.dim());
        let alpha = match normalize {
            Normalize::Softmax => softmax_slice(self.weights.data()),
            Normalize::Raw => self.weights.data().to_vec(),
        };
        let data = stack.values().data();
        let mut out = vec![0.0; t * d];
        for (layer, &a) in alpha.iter().enumerate().take(l) {
            let base = layer * t * d;
            for i in 0..t * d {
                out[i] += a * data[base + i];
            }
        }
        (
            Tensor::new(vec![t, d], out).expect("shape matches"),
            Cache {
                alpha,
                stack: stack.values().clone(),
            },
        )
    }

    pub fn backward(
        &self,
        cache: &Cache,
        grad_out: &Tensor,
        normalize: Normalize,
    ) -> (Vec<Tensor>, Tensor) {
        let l = cache.alpha.len();
        let frame_block = grad_out.numel(); // T*D
        let stack = cache.stack.data();
        let go = grad_out.data();
        // d(loss)/d(alpha_l) = <grad_out, h_l>; d(loss)/d(h_l) = alpha_l * grad_out
        let mut grad_alpha = vec![0.0; l];
        let mut grad_input = vec![0.0; l * frame_block];
        for (layer, slot) in grad_alpha.iter_mut().enumerate() {
            let base = layer * frame_block;
            let mut acc = 0.0;
            for i in 0..frame_block {
                acc += go[i] * stack[base + i];
                grad_input[base + i] = cache.alpha[layer] * go[i];
            }
            *slot = acc;
        }
        let grad_w = match normalize {
            Normalize::Softmax => softmax_slice_backward(&cache.alpha, &grad_alpha),
            Normalize::Raw => grad_alpha,
        };
        (
            vec![Tensor::new(vec![l], grad_w).expect("weight shape")],
            Tensor::new(cache.stack.shape().to_vec(), grad_input).expect("stack shape"),
        )
    }
}
