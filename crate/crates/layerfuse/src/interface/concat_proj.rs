//! Concatenate all layers along the feature axis (layer-major order) and
//! project back to the upstream dimension.

use super::{normal_tensor, LayerStack};
use crate::error::Result;
use crate::numerics::{affine, affine_backward, Prng, Tensor};

#[derive(Debug, Clone)]
pub(crate) struct Params {
    proj: Tensor, // [L*D, D]
    bias: Tensor, // [D]
}

pub(crate) struct Cache {
    flat: Tensor, // [T, L*D], feature index = l*D + d
}

impl Params {
    pub fn init(num_layers: usize, dim: usize, rng: &mut Prng) -> Self {
        let fan_in = num_layers * dim;
        Params {
            proj: normal_tensor(rng, &[fan_in, dim], (1.0 / fan_in as f64).sqrt()),
            bias: Tensor::zeros(&[dim]),
        }
    }

    pub fn trainable(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("proj", &self.proj), ("bias", &self.bias)]
    }

    pub fn trainable_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("proj", &mut self.proj), ("bias", &mut self.bias)]
    }

    pub fn forward(&self, stack: &LayerStack) -> Result<(Tensor, Cache)> {
        let flat = flatten_layer_major(stack);
        let out = affine(&flat, &self.proj, &self.bias)?;
        Ok((out, Cache { flat }))
    }

    pub fn backward(&self, cache: &Cache, grad_out: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        let (grad_flat, grad_proj, grad_bias) = affine_backward(&cache.flat, &self.proj, grad_out)?;
        let t = cache.flat.shape()[0];
        let ld = cache.flat.shape()[1];
        let d = grad_out.shape()[1];
        let l = ld / d;
        let gf = grad_flat.data();
        let mut grad_input = vec![0.0; l * t * d];
        for frame in 0..t {
            for layer in 0..l {
                for feat in 0..d {
                    grad_input[(layer * t + frame) * d + feat] = gf[frame * ld + layer * d + feat];
                }
            }
        }
        Ok((
            vec![grad_proj, grad_bias],
            Tensor::new(vec![l, t, d], grad_input)?,
        ))
    }
}

/// (L, T, D) -> (T, L*D) with the layer index major in the feature axis.
fn flatten_layer_major(stack: &LayerStack) -> Tensor {
    let (l, t, d) = (stack.num_layers(), stack.num_frames(), stack.dim());
    let data = stack.values().data();
    let mut flat = vec![0.0; t * l * d];
    for layer in 0..l {
        for frame in 0..t {
            let src = (layer * t + frame) * d;
            let dst = frame * l * d + layer * d;
            flat[dst..dst + d].copy_from_slice(&data[src..src + d]);
        }
    }
    Tensor::new(vec![t, l * d], flat).expect("shape matches")
}
