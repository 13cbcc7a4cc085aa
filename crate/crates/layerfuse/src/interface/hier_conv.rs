//! Hierarchical convolution over the layer axis: max(1, floor(log3 L))
//! identical kernel-5 / stride-3 / padding-1 conv layers collapse the L
//! layer positions toward a single vector per frame, gelu between
//! consecutive layers, mean-pooling any residual positions.

use super::{normal_tensor, LayerStack, CONV_KERNEL, CONV_PADDING, CONV_STRIDE};
use crate::error::Result;
use crate::numerics::{
    conv1d_layer_axis, conv1d_layer_axis_backward, conv1d_output_len, gelu, gelu_backward, Prng,
    Tensor,
};

/// Collapse schedule of the convolutional stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierConvPlan {
    /// Number of identical conv layers: max(1, floor(log3 L)).
    pub depth: usize,
    /// Layer extents starting at L, one entry per stage (depth + 1 entries).
    pub schedule: Vec<usize>,
}

/// Compute the collapse schedule, rejecting stacks too shallow for one
/// kernel-5 window (L < 3).
pub(crate) fn plan(num_layers: usize) -> Result<HierConvPlan> {
    let depth = floor_log3(num_layers).max(1);
    let mut schedule = vec![num_layers];
    let mut extent = num_layers;
    for _ in 0..depth {
        extent = conv1d_output_len(extent, CONV_KERNEL, CONV_STRIDE, CONV_PADDING)?;
        if extent == 0 {
            return Err(crate::error::Error::Shape(format!(
                "degenerate window: extent collapses to 0 within the stack (L={num_layers})"
            )));
        }
        schedule.push(extent);
    }
    Ok(HierConvPlan { depth, schedule })
}

fn floor_log3(n: usize) -> usize {
    let mut e = 0;
    let mut p = 3usize;
    while p <= n {
        e += 1;
        p *= 3;
    }
    e
}

#[derive(Debug, Clone)]
pub(crate) struct Params {
    stages: Vec<ConvStage>,
    plan: HierConvPlan,
}

#[derive(Debug, Clone)]
struct ConvStage {
    kernels: Tensor, // [K, D, D]
    bias: Tensor,    // [D]
}

pub(crate) struct Cache {
    per_frame: Vec<FrameCache>,
    final_extent: usize,
}

struct FrameCache {
    conv_inputs: Vec<Tensor>, // input of each stage, [extent_i, D]
    pre_acts: Vec<Tensor>,    // conv outputs that feed gelu (depth - 1 of them)
}

impl Params {
    pub fn init(num_layers: usize, dim: usize, rng: &mut Prng) -> Result<Self> {
        let plan = plan(num_layers)?;
        let sd = (1.0 / (CONV_KERNEL * dim) as f64).sqrt();
        let stages = (0..plan.depth)
            .map(|_| ConvStage {
                kernels: normal_tensor(rng, &[CONV_KERNEL, dim, dim], sd),
                bias: Tensor::zeros(&[dim]),
            })
            .collect();
        Ok(Params { stages, plan })
    }

    pub fn trainable(&self) -> Vec<(&'static str, &Tensor)> {
        const NAMES: &[(&str, &str)] = &[
            ("conv0.kernels", "conv0.bias"),
            ("conv1.kernels", "conv1.bias"),
            ("conv2.kernels", "conv2.bias"),
            ("conv3.kernels", "conv3.bias"),
        ];
        self.stages
            .iter()
            .zip(NAMES)
            .flat_map(|(s, (nk, nb))| [(*nk, &s.kernels), (*nb, &s.bias)])
            .collect()
    }

    pub fn trainable_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        const NAMES: &[(&str, &str)] = &[
            ("conv0.kernels", "conv0.bias"),
            ("conv1.kernels", "conv1.bias"),
            ("conv2.kernels", "conv2.bias"),
            ("conv3.kernels", "conv3.bias"),
        ];
        self.stages
            .iter_mut()
            .zip(NAMES)
            .flat_map(|(s, (nk, nb))| [(*nk, &mut s.kernels), (*nb, &mut s.bias)])
            .collect()
    }

    pub fn forward(&self, stack: &LayerStack) -> Result<(Tensor, Cache)> {
        let (t, d) = (stack.num_frames(), stack.dim());
        let depth = self.stages.len();
        let final_extent = *self.plan.schedule.last().expect("non-empty schedule");
        let mut out = vec![0.0; t * d];
        let mut per_frame = Vec::with_capacity(t);
        for frame in 0..t {
            let mut conv_inputs = Vec::with_capacity(depth);
            let mut pre_acts = Vec::with_capacity(depth.saturating_sub(1));
            let mut x = stack.frame(frame); // [L, D]
            for (i, stage) in self.stages.iter().enumerate() {
                let y = conv1d_layer_axis(&x, &stage.kernels, &stage.bias, CONV_STRIDE, CONV_PADDING)?;
                conv_inputs.push(x);
                if i + 1 < depth {
                    let next = gelu(&y);
                    pre_acts.push(y);
                    x = next;
                } else {
                    x = y;
                }
            }
            // mean-pool any residual layer positions down to a single vector
            let extent = x.shape()[0];
            debug_assert_eq!(extent, final_extent);
            let xd = x.data();
            for feat in 0..d {
                let mut acc = 0.0;
                for p in 0..extent {
                    acc += xd[p * d + feat];
                }
                out[frame * d + feat] = acc / extent as f64;
            }
            per_frame.push(FrameCache {
                conv_inputs,
                pre_acts,
            });
        }
        Ok((
            Tensor::new(vec![t, d], out)?,
            Cache {
                per_frame,
                final_extent,
            },
        ))
    }

    pub fn backward(&self, cache: &Cache, grad_out: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        let t = cache.per_frame.len();
        let d = grad_out.shape()[1];
        let depth = self.stages.len();
        let l = cache.per_frame[0].conv_inputs[0].shape()[0];
        let mut grad_stages: Vec<(Tensor, Tensor)> = self
            .stages
            .iter()
            .map(|s| (Tensor::zeros(s.kernels.shape()), Tensor::zeros(&[d])))
            .collect();
        let mut grad_input = Tensor::zeros(&[l, t, d]);
        for frame in 0..t {
            let fc = &cache.per_frame[frame];
            // mean-pool backward: spread the frame gradient over positions
            let extent = cache.final_extent;
            let mut grad_y = Tensor::zeros(&[extent, d]);
            for p in 0..extent {
                for feat in 0..d {
                    grad_y.data_mut()[p * d + feat] =
                        grad_out.data()[frame * d + feat] / extent as f64;
                }
            }
            for i in (0..depth).rev() {
                let (gk, gb, gx) = conv1d_layer_axis_backward(
                    &fc.conv_inputs[i],
                    &self.stages[i].kernels,
                    &grad_y,
                    CONV_STRIDE,
                    CONV_PADDING,
                )?;
                for (dst, src) in grad_stages[i].0.data_mut().iter_mut().zip(gk.data()) {
                    *dst += src;
                }
                for (dst, src) in grad_stages[i].1.data_mut().iter_mut().zip(gb.data()) {
                    *dst += src;
                }
                if i > 0 {
                    grad_y = gelu_backward(&fc.pre_acts[i - 1], &gx);
                } else {
                    // gx is the gradient of this frame's [L, D] slice
                    for layer in 0..l {
                        for feat in 0..d {
                            grad_input.data_mut()[(layer * t + frame) * d + feat] =
                                gx.data()[layer * d + feat];
                        }
                    }
                }
            }
        }
        let tensors = grad_stages
            .into_iter()
            .flat_map(|(k, b)| [k, b])
            .collect();
        Ok((tensors, grad_input))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_examples() {
        let p = plan(13).unwrap();
        assert_eq!(p.depth, 2);
        assert_eq!(p.schedule, vec![13, 4, 1]);

        let p = plan(25).unwrap();
        assert_eq!(p.depth, 2);
        assert_eq!(p.schedule, vec![25, 8, 2]);

        let p = plan(3).unwrap();
        assert_eq!(p.depth, 1);
        assert_eq!(p.schedule, vec![3, 1]);
    }

    #[test]
    fn plan_rejects_shallow_stacks() {
        assert!(plan(1).is_err());
        assert!(plan(2).is_err());
    }

    #[test]
    fn schedule_matches_length_recursion() {
        for l in 3..=64 {
            let p = plan(l).unwrap();
            assert_eq!(p.schedule.len(), p.depth + 1);
            assert_eq!(p.schedule[0], l);
            for w in p.schedule.windows(2) {
                assert_eq!(w[1], (w[0] + 2 * CONV_PADDING - CONV_KERNEL) / CONV_STRIDE + 1);
            }
            assert!(*p.schedule.last().unwrap() >= 1);
        }
    }

    #[test]
    fn floor_log3_values() {
        assert_eq!(floor_log3(1), 0);
        assert_eq!(floor_log3(2), 0);
        assert_eq!(floor_log3(3), 1);
        assert_eq!(floor_log3(8), 1);
        assert_eq!(floor_log3(9), 2);
        assert_eq!(floor_log3(26), 2);
        assert_eq!(floor_log3(27), 3);
    }
}
