//! CLS pooling over the layer dimension: at each timestep the L layer
//! vectors plus a learnable CLS token form a sequence (no position
//! embeddings), one post-norm transformer encoder layer aggregates them,
//! and the CLS position is the output.

use super::{normal_tensor, LayerStack, LAYER_NORM_EPS};
use crate::error::Result;
use crate::numerics::kernels::LayerNormCache;
use crate::numerics::{
    affine, affine_backward, gelu, gelu_backward, layer_norm, layer_norm_backward, softmax_slice,
    softmax_slice_backward, Prng, Tensor,
};

#[derive(Debug, Clone)]
pub(crate) struct Params {
    cls: Tensor, // [D]
    wq: Tensor,  // [D, D]
    bq: Tensor,
    wk: Tensor,
    bk: Tensor,
    wv: Tensor,
    bv: Tensor,
    wo: Tensor,
    bo: Tensor,
    w1: Tensor, // [D, F]
    b1: Tensor,
    w2: Tensor, // [F, D]
    b2: Tensor,
    ln1_gamma: Tensor,
    ln1_beta: Tensor,
    ln2_gamma: Tensor,
    ln2_beta: Tensor,
    heads: usize,
}

pub(crate) struct Cache {
    per_frame: Vec<FrameCache>,
}

struct FrameCache {
    tokens: Tensor, // [S, D] with row 0 = CLS
    q: Tensor,
    k: Tensor,
    v: Tensor,
    attn: Vec<Tensor>,   // per-head softmax weights [S, S]
    heads_out: Tensor,   // concatenated head outputs [S, D]
    ln1: LayerNormCache,
    normed1: Tensor,     // [S, D]
    ffn_pre: Tensor,     // [S, F]
    ffn_act: Tensor,     // gelu(ffn_pre)
    ln2: LayerNormCache,
}

impl Params {
    pub fn init(dim: usize, heads: usize, ffn_dim: usize, rng: &mut Prng) -> Self {
        let attn_sd = (1.0 / dim as f64).sqrt();
        Params {
            cls: normal_tensor(rng, &[dim], 0.02),
            wq: normal_tensor(rng, &[dim, dim], attn_sd),
            bq: Tensor::zeros(&[dim]),
            wk: normal_tensor(rng, &[dim, dim], attn_sd),
            bk: Tensor::zeros(&[dim]),
            wv: normal_tensor(rng, &[dim, dim], attn_sd),
            bv: Tensor::zeros(&[dim]),
            wo: normal_tensor(rng, &[dim, dim], attn_sd),
            bo: Tensor::zeros(&[dim]),
            w1: normal_tensor(rng, &[dim, ffn_dim], attn_sd),
            b1: Tensor::zeros(&[ffn_dim]),
            w2: normal_tensor(rng, &[ffn_dim, dim], (1.0 / ffn_dim as f64).sqrt()),
            b2: Tensor::zeros(&[dim]),
            ln1_gamma: Tensor::full(&[dim], 1.0),
            ln1_beta: Tensor::zeros(&[dim]),
            ln2_gamma: Tensor::full(&[dim], 1.0),
            ln2_beta: Tensor::zeros(&[dim]),
            heads,
        }
    }

    pub fn trainable(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("cls", &self.cls),
            ("wq", &self.wq),
            ("bq", &self.bq),
            ("wk", &self.wk),
            ("bk", &self.bk),
            ("wv", &self.wv),
            ("bv", &self.bv),
            ("wo", &self.wo),
            ("bo", &self.bo),
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
            ("ln1_gamma", &self.ln1_gamma),
            ("ln1_beta", &self.ln1_beta),
            ("ln2_gamma", &self.ln2_gamma),
            ("ln2_beta", &self.ln2_beta),
        ]
    }

    pub fn trainable_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("cls", &mut self.cls),
            ("wq", &mut self.wq),
            ("bq", &mut self.bq),
            ("wk", &mut self.wk),
            ("bk", &mut self.bk),
            ("wv", &mut self.wv),
            ("bv", &mut self.bv),
            ("wo", &mut self.wo),
            ("bo", &mut self.bo),
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
            ("ln1_gamma", &mut self.ln1_gamma),
            ("ln1_beta", &mut self.ln1_beta),
            ("ln2_gamma", &mut self.ln2_gamma),
            ("ln2_beta", &mut self.ln2_beta),
        ]
    }

    pub fn forward(&self, stack: &LayerStack) -> Result<(Tensor, Cache)> {
        let (l, t, d) = (stack.num_layers(), stack.num_frames(), stack.dim());
        let s = l + 1;
        let mut out = vec![0.0; t * d];
        let mut per_frame = Vec::with_capacity(t);
        for frame in 0..t {
            let mut tokens = Tensor::zeros(&[s, d]);
            tokens.data_mut()[..d].copy_from_slice(self.cls.data());
            for layer in 0..l {
                let src = (layer * t + frame) * d;
                tokens.data_mut()[(layer + 1) * d..(layer + 2) * d]
                    .copy_from_slice(&stack.values().data()[src..src + d]);
            }
            let q = affine(&tokens, &self.wq, &self.bq)?;
            let k = affine(&tokens, &self.wk, &self.bk)?;
            let v = affine(&tokens, &self.wv, &self.bv)?;
            let (attn, heads_out) = self.attention_forward(&q, &k, &v);
            let attn_proj = affine(&heads_out, &self.wo, &self.bo)?;
            let residual1 = tokens.axpy(1.0, &attn_proj)?;
            let (normed1, ln1) = layer_norm(&residual1, &self.ln1_gamma, &self.ln1_beta, LAYER_NORM_EPS)?;
            let ffn_pre = affine(&normed1, &self.w1, &self.b1)?;
            let ffn_act = gelu(&ffn_pre);
            let ffn_out = affine(&ffn_act, &self.w2, &self.b2)?;
            let residual2 = normed1.axpy(1.0, &ffn_out)?;
            let (normed2, ln2) = layer_norm(&residual2, &self.ln2_gamma, &self.ln2_beta, LAYER_NORM_EPS)?;
            out[frame * d..(frame + 1) * d].copy_from_slice(&normed2.data()[..d]);
            per_frame.push(FrameCache {
                tokens,
                q,
                k,
                v,
                attn,
                heads_out,
                ln1,
                normed1,
                ffn_pre,
                ffn_act,
                ln2,
            });
        }
        Ok((Tensor::new(vec![t, d], out)?, Cache { per_frame }))
    }

    fn attention_forward(&self, q: &Tensor, k: &Tensor, v: &Tensor) -> (Vec<Tensor>, Tensor) {
        let s = q.shape()[0];
        let d = q.shape()[1];
        let h = self.heads;
        let dh = d / h;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut attn = Vec::with_capacity(h);
        let mut heads_out = Tensor::zeros(&[s, d]);
        for head in 0..h {
            let cols = head * dh..(head + 1) * dh;
            let mut weights = Tensor::zeros(&[s, s]);
            for i in 0..s {
                let mut row = vec![0.0; s];
                for (j, r) in row.iter_mut().enumerate() {
                    let mut dot = 0.0;
                    for c in cols.clone() {
                        dot += q.data()[i * d + c] * k.data()[j * d + c];
                    }
                    *r = dot * scale;
                }
                let soft = softmax_slice(&row);
                weights.data_mut()[i * s..(i + 1) * s].copy_from_slice(&soft);
            }
            for i in 0..s {
                for c in cols.clone() {
                    let mut acc = 0.0;
                    for j in 0..s {
                        acc += weights.data()[i * s + j] * v.data()[j * d + c];
                    }
                    heads_out.data_mut()[i * d + c] = acc;
                }
            }
            attn.push(weights);
        }
        (attn, heads_out)
    }

    pub fn backward(&self, cache: &Cache, grad_out: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        let t = cache.per_frame.len();
        let d = grad_out.shape()[1];
        let s = cache.per_frame[0].tokens.shape()[0];
        let l = s - 1;
        let h = self.heads;
        let dh = d / h;
        let scale = 1.0 / (dh as f64).sqrt();

        let mut grads: Vec<Tensor> = self
            .trainable()
            .iter()
            .map(|(_, p)| Tensor::zeros(p.shape()))
            .collect();
        let mut grad_input = Tensor::zeros(&[l, t, d]);

        for frame in 0..t {
            let fc = &cache.per_frame[frame];
            // only the CLS row of the block output reaches the loss
            let mut d_normed2 = Tensor::zeros(&[s, d]);
            d_normed2.data_mut()[..d].copy_from_slice(&grad_out.data()[frame * d..(frame + 1) * d]);

            let (d_residual2, d_g2, d_b2ln) =
                layer_norm_backward(&fc.ln2, &self.ln2_gamma, &d_normed2);
            let (d_act, d_w2, d_b2) = affine_backward(&fc.ffn_act, &self.w2, &d_residual2)?;
            let d_ffn_pre = gelu_backward(&fc.ffn_pre, &d_act);
            let (d_normed1_ffn, d_w1, d_b1) = affine_backward(&fc.normed1, &self.w1, &d_ffn_pre)?;
            let d_normed1 = d_residual2.axpy(1.0, &d_normed1_ffn)?;
            let (d_residual1, d_g1, d_b1ln) =
                layer_norm_backward(&fc.ln1, &self.ln1_gamma, &d_normed1);
            let (d_heads_out, d_wo, d_bo) = affine_backward(&fc.heads_out, &self.wo, &d_residual1)?;

            // attention backward, head by head
            let mut d_q = Tensor::zeros(&[s, d]);
            let mut d_k = Tensor::zeros(&[s, d]);
            let mut d_v = Tensor::zeros(&[s, d]);
            for head in 0..h {
                let cols = head * dh..(head + 1) * dh;
                let weights = &fc.attn[head];
                // d_weights[i][j] = sum_c d_heads_out[i,c] * v[j,c]
                for i in 0..s {
                    let mut d_row = vec![0.0; s];
                    for (j, dr) in d_row.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for c in cols.clone() {
                            acc += d_heads_out.data()[i * d + c] * fc.v.data()[j * d + c];
                        }
                        *dr = acc;
                    }
                    let w_row = &weights.data()[i * s..(i + 1) * s];
                    let d_scores = softmax_slice_backward(w_row, &d_row);
                    for (j, ds) in d_scores.iter().enumerate() {
                        let g = ds * scale;
                        for c in cols.clone() {
                            d_q.data_mut()[i * d + c] += g * fc.k.data()[j * d + c];
                            d_k.data_mut()[j * d + c] += g * fc.q.data()[i * d + c];
                        }
                    }
                }
                // d_v[j,c] = sum_i weights[i,j] * d_heads_out[i,c]
                for j in 0..s {
                    for c in cols.clone() {
                        let mut acc = 0.0;
                        for i in 0..s {
                            acc += weights.data()[i * s + j] * d_heads_out.data()[i * d + c];
                        }
                        d_v.data_mut()[j * d + c] += acc;
                    }
                }
            }

            let (d_tokens_q, d_wq, d_bq) = affine_backward(&fc.tokens, &self.wq, &d_q)?;
            let (d_tokens_k, d_wk, d_bk) = affine_backward(&fc.tokens, &self.wk, &d_k)?;
            let (d_tokens_v, d_wv, d_bv) = affine_backward(&fc.tokens, &self.wv, &d_v)?;
            let mut d_tokens = d_residual1; // residual path into the tokens
            d_tokens = d_tokens.axpy(1.0, &d_tokens_q)?;
            d_tokens = d_tokens.axpy(1.0, &d_tokens_k)?;
            d_tokens = d_tokens.axpy(1.0, &d_tokens_v)?;

            // scatter into parameter slots: canonical order of trainable()
            accumulate(&mut grads[0], &Tensor::new(vec![d], d_tokens.data()[..d].to_vec())?);
            accumulate(&mut grads[1], &d_wq);
            accumulate(&mut grads[2], &d_bq);
            accumulate(&mut grads[3], &d_wk);
            accumulate(&mut grads[4], &d_bk);
            accumulate(&mut grads[5], &d_wv);
            accumulate(&mut grads[6], &d_bv);
            accumulate(&mut grads[7], &d_wo);
            accumulate(&mut grads[8], &d_bo);
            accumulate(&mut grads[9], &d_w1);
            accumulate(&mut grads[10], &d_b1);
            accumulate(&mut grads[11], &d_w2);
            accumulate(&mut grads[12], &d_b2);
            accumulate(&mut grads[13], &d_g1);
            accumulate(&mut grads[14], &d_b1ln);
            accumulate(&mut grads[15], &d_g2);
            accumulate(&mut grads[16], &d_b2ln);

            for layer in 0..l {
                let src = (layer + 1) * d;
                let dst = (layer * t + frame) * d;
                for feat in 0..d {
                    grad_input.data_mut()[dst + feat] += d_tokens.data()[src + feat];
                }
            }
        }
        Ok((grads, grad_input))
    }
}

fn accumulate(dst: &mut Tensor, src: &Tensor) {
    debug_assert_eq!(dst.shape(), src.shape());
    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += s;
    }
}
