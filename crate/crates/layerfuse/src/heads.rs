//! Minimal downstream prediction heads and losses for toy tasks: a linear
//! (optionally one-hidden-layer) classifier over frame features or over the
//! mean-pooled utterance feature.

use crate::error::{Error, Result};
use crate::interface::TimeFeatures;
use crate::numerics::{
    affine, affine_backward, gelu, gelu_backward, normal_cdf, softmax_slice, Prng, Tensor,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    /// Logits per frame, [T, C].
    Frame,
    /// Mean-pool over frames, then one affine map, [1, C].
    Utterance,
}

impl HeadKind {
    pub fn name(&self) -> &'static str {
        match self {
            HeadKind::Frame => "frame",
            HeadKind::Utterance => "utterance",
        }
    }
}

/// Head configuration: hidden width None means a plain linear head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub kind: HeadKind,
    pub input_dim: usize,
    pub num_classes: usize,
    pub hidden_dim: Option<usize>,
}

impl HeadSpec {
    pub fn linear(kind: HeadKind, input_dim: usize, num_classes: usize) -> Self {
        HeadSpec {
            kind,
            input_dim,
            num_classes,
            hidden_dim: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "a classifier needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.input_dim == 0 || self.hidden_dim == Some(0) {
            return Err(Error::Config("head dims must be >= 1".to_string()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        match self.hidden_dim {
            None => self.input_dim * self.num_classes + self.num_classes,
            Some(h) => {
                self.input_dim * h + h + h * self.num_classes + self.num_classes
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeadParams {
    spec: HeadSpec,
    tensors: Vec<Tensor>, // [w, b] or [w1, b1, w2, b2]
}

pub struct HeadCache {
    features: Tensor,            // the rows fed to the first affine ([T or 1, D_in])
    pooled_from: Option<usize>,  // number of frames the pool averaged over
    hidden_pre: Option<Tensor>,  // pre-gelu hidden activations
    hidden_act: Option<Tensor>,
}

impl HeadParams {
    pub fn init(spec: HeadSpec, rng: &mut Prng) -> Result<Self> {
        spec.validate()?;
        let d = spec.input_dim;
        let c = spec.num_classes;
        let tensors = match spec.hidden_dim {
            None => vec![
                crate::interface::normal_init(rng, &[d, c], d),
                Tensor::zeros(&[c]),
            ],
            Some(h) => vec![
                crate::interface::normal_init(rng, &[d, h], d),
                Tensor::zeros(&[h]),
                crate::interface::normal_init(rng, &[h, c], h),
                Tensor::zeros(&[c]),
            ],
        };
        Ok(HeadParams { spec, tensors })
    }

    pub fn spec(&self) -> &HeadSpec {
        &self.spec
    }

    pub fn trainable(&self) -> Vec<(&'static str, &Tensor)> {
        match self.spec.hidden_dim {
            None => vec![("head.w", &self.tensors[0]), ("head.b", &self.tensors[1])],
            Some(_) => vec![
                ("head.w1", &self.tensors[0]),
                ("head.b1", &self.tensors[1]),
                ("head.w2", &self.tensors[2]),
                ("head.b2", &self.tensors[3]),
            ],
        }
    }

    pub fn trainable_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut it = self.tensors.iter_mut();
        match self.spec.hidden_dim {
            None => {
                vec![
                    ("head.w", it.next().unwrap()),
                    ("head.b", it.next().unwrap()),
                ]
            }
            Some(_) => vec![
                ("head.w1", it.next().unwrap()),
                ("head.b1", it.next().unwrap()),
                ("head.w2", it.next().unwrap()),
                ("head.b2", it.next().unwrap()),
            ],
        }
    }

    pub fn allocated_param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    /// Logits: [T, C] for frame heads, [1, C] for utterance heads.
    pub fn forward(&self, z: &TimeFeatures) -> Result<(Tensor, HeadCache)> {
        if z.dim() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "head expects {} features, got {}",
                self.spec.input_dim,
                z.dim()
            )));
        }
        let (features, pooled_from) = match self.spec.kind {
            HeadKind::Frame => (z.values().clone(), None),
            HeadKind::Utterance => {
                let t = z.num_frames();
                let d = z.dim();
                let mut pooled = vec![0.0; d];
                for frame in 0..t {
                    let row = &z.values().data()[frame * d..(frame + 1) * d];
                    for (p, v) in pooled.iter_mut().zip(row) {
                        *p += v;
                    }
                }
                for v in &mut pooled {
                    *v /= t as f64;
                }
                (Tensor::new(vec![1, d], pooled)?, Some(t))
            }
        };
        match self.spec.hidden_dim {
            None => {
                let logits = affine(&features, &self.tensors[0], &self.tensors[1])?;
                Ok((
                    logits,
                    HeadCache {
                        features,
                        pooled_from,
                        hidden_pre: None,
                        hidden_act: None,
                    },
                ))
            }
            Some(_) => {
                let pre = affine(&features, &self.tensors[0], &self.tensors[1])?;
                let act = gelu(&pre);
                let logits = affine(&act, &self.tensors[2], &self.tensors[3])?;
                Ok((
                    logits,
                    HeadCache {
                        features,
                        pooled_from,
                        hidden_pre: Some(pre),
                        hidden_act: Some(act),
                    },
                ))
            }
        }
    }

    /// Gradients for the head tensors (canonical order) and for the
    /// interface output z.
    pub fn backward(&self, cache: &HeadCache, grad_logits: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        let (grads, grad_features) = match self.spec.hidden_dim {
            None => {
                let (gf, gw, gb) = affine_backward(&cache.features, &self.tensors[0], grad_logits)?;
                (vec![gw, gb], gf)
            }
            Some(_) => {
                let act = cache.hidden_act.as_ref().expect("hidden cache present");
                let pre = cache.hidden_pre.as_ref().expect("hidden cache present");
                let (g_act, gw2, gb2) = affine_backward(act, &self.tensors[2], grad_logits)?;
                let g_pre = gelu_backward(pre, &g_act);
                let (gf, gw1, gb1) = affine_backward(&cache.features, &self.tensors[0], &g_pre)?;
                (vec![gw1, gb1, gw2, gb2], gf)
            }
        };
        let grad_z = match cache.pooled_from {
            None => grad_features,
            Some(t) => {
                // mean-pool backward: spread evenly over the frames
                let d = grad_features.numel();
                let mut gz = vec![0.0; t * d];
                for frame in 0..t {
                    for feat in 0..d {
                        gz[frame * d + feat] = grad_features.data()[feat] / t as f64;
                    }
                }
                Tensor::new(vec![t, d], gz)?
            }
        };
        Ok((grads, grad_z))
    }
}

/// Mean softmax cross-entropy over all label positions plus dL/dlogits.
pub fn ce_loss_grad(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (rows, classes) = match logits.shape() {
        [r, c] => (*r, *c),
        s => return Err(Error::Shape(format!("logits must be 2-D, got {s:?}"))),
    };
    if labels.len() != rows {
        return Err(Error::Data(format!(
            "{rows} logit rows but {} labels",
            labels.len()
        )));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; rows * classes];
    for (row, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::Data(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let slice = &logits.data()[row * classes..(row + 1) * classes];
        // log-sum-exp form: finite for any finite logits, NaN propagates so
        // divergence is detectable upstream
        let max = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = slice.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss += max + lse - slice[label];
        let probs = softmax_slice(slice);
        for c in 0..classes {
            grad[row * classes + c] =
                (probs[c] - f64::from(u8::from(c == label))) / rows as f64;
        }
    }
    Ok((
        loss / rows as f64,
        Tensor::new(vec![rows, classes], grad)?,
    ))
}

/// Count of argmax matches; ties break toward the lowest class index.
pub fn correct_count(logits: &Tensor, labels: &[usize]) -> Result<usize> {
    let (rows, classes) = match logits.shape() {
        [r, c] => (*r, *c),
        s => return Err(Error::Shape(format!("logits must be 2-D, got {s:?}"))),
    };
    if labels.len() != rows {
        return Err(Error::Data(format!(
            "{rows} logit rows but {} labels",
            labels.len()
        )));
    }
    let mut hits = 0usize;
    for (row, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::Data(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let slice = &logits.data()[row * classes..(row + 1) * classes];
        let mut best = 0;
        for (c, &v) in slice.iter().enumerate() {
            if v > slice[best] {
                best = c;
            }
        }
        hits += usize::from(best == label);
    }
    Ok(hits)
}

/// Argmax match rate; ties break toward the lowest class index.
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    Ok(correct_count(logits, labels)? as f64 / labels.len() as f64)
}

/// Normal CDF re-export for closed-form accuracy bounds in analyses.
pub fn gaussian_accuracy(snr: f64) -> f64 {
    normal_cdf(snr)
}
