//! Grouped weighted sums: an independent softmax-weighted sum inside each
//! contiguous subset of layers, concatenated and projected back to D.

use super::{group_ranges, normal_tensor, LayerStack};
use crate::error::Result;
use crate::numerics::{affine, affine_backward, softmax_slice, softmax_slice_backward, Prng, Tensor};

#[derive(Debug, Clone)]
pub(crate) struct Params {
    weights: Tensor, // [L], softmaxed within each group
    proj: Tensor,    // [G*D, D]
    bias: Tensor,    // [D]
    num_groups: usize,
}

pub(crate) struct Cache {
    alphas: Vec<Vec<f64>>, // per group
    concat: Tensor,        // [T, G*D]
    stack: Tensor,         // [L, T, D]
}

impl Params {
    pub fn init(num_layers: usize, dim: usize, num_groups: usize, rng: &mut Prng) -> Self {
        let fan_in = num_groups * dim;
        Params {
            weights: Tensor::zeros(&[num_layers]),
            proj: normal_tensor(rng, &[fan_in, dim], (1.0 / fan_in as f64).sqrt()),
            bias: Tensor::zeros(&[dim]),
            num_groups,
        }
    }

    pub fn trainable(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("w", &self.weights), ("proj", &self.proj), ("bias", &self.bias)]
    }

    pub fn trainable_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("w", &mut self.weights),
            ("proj", &mut self.proj),
            ("bias", &mut self.bias),
        ]
    }

    pub fn forward(&self, stack: &LayerStack) -> Result<(Tensor, Cache)> {
        let (l, t, d) = (stack.num_layers(), stack.num_frames(), stack.dim());
        let g = self.num_groups;
        let ranges = group_ranges(l, g);
        let data = stack.values().data();
        let mut alphas = Vec::with_capacity(g);
        let mut concat = vec![0.0; t * g * d];
        for (gi, range) in ranges.iter().enumerate() {
            let alpha = softmax_slice(&self.weights.data()[range.clone()]);
            for (ai, layer) in range.clone().enumerate() {
                let a = alpha[ai];
                let base = layer * t * d;
                for frame in 0..t {
                    for feat in 0..d {
                        concat[(frame * g + gi) * d + feat] += a * data[base + frame * d + feat];
                    }
                }
            }
            alphas.push(alpha);
        }
        let concat = Tensor::new(vec![t, g * d], concat)?;
        let out = affine(&concat, &self.proj, &self.bias)?;
        Ok((
            out,
            Cache {
                alphas,
                concat,
                stack: stack.values().clone(),
            },
        ))
    }

    pub fn backward(&self, cache: &Cache, grad_out: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        let shape = cache.stack.shape().to_vec();
        let (l, t, d) = (shape[0], shape[1], shape[2]);
        let g = self.num_groups;
        let (grad_concat, grad_proj, grad_bias) =
            affine_backward(&cache.concat, &self.proj, grad_out)?;
        let ranges = group_ranges(l, g);
        let stack = cache.stack.data();
        let gc = grad_concat.data();
        let mut grad_w = vec![0.0; l];
        let mut grad_input = vec![0.0; l * t * d];
        for (gi, range) in ranges.iter().enumerate() {
            let alpha = &cache.alphas[gi];
            let mut grad_alpha = vec![0.0; alpha.len()];
            for (ai, layer) in range.clone().enumerate() {
                let base = layer * t * d;
                let mut acc = 0.0;
                for frame in 0..t {
                    for feat in 0..d {
                        let gcv = gc[(frame * g + gi) * d + feat];
                        acc += gcv * stack[base + frame * d + feat];
                        grad_input[base + frame * d + feat] = alpha[ai] * gcv;
                    }
                }
                grad_alpha[ai] = acc;
            }
            let gw = softmax_slice_backward(alpha, &grad_alpha);
            grad_w[range.clone()].copy_from_slice(&gw);
        }
        Ok((
            vec![Tensor::new(vec![l], grad_w)?, grad_proj, grad_bias],
            Tensor::new(shape, grad_input)?,
        ))
    }
}
