//! The six layer-aggregation interface designs: each maps a layer stack
//! h in R^{L x T x D} to per-frame features z in R^{T x D_out}, with exact
//! hand-written gradients and closed-form parameter accounting.

mod cls_pool;
mod concat_proj;
mod grouped;
mod hier_conv;
mod pca;
mod weighted_sum;

pub use hier_conv::HierConvPlan;
pub use pca::PcaBuffers;

use crate::error::{Error, Result};
use crate::numerics::{Prng, Tensor};
use serde::{Deserialize, Serialize};

/// Kernel size of the layer-axis convolution.
pub const CONV_KERNEL: usize = 5;
/// Stride of the layer-axis convolution.
pub const CONV_STRIDE: usize = 3;
/// Zero padding of the layer-axis convolution.
pub const CONV_PADDING: usize = 1;
/// Epsilon of every layer norm in the CLS-pooling block.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Whether weighted-sum weights pass through a softmax before use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalize {
    Softmax,
    Raw,
}

/// An interface design plus its per-kind settings. `None` settings resolve
/// to their defaults once (L, D) are known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InterfaceSpec {
    WeightedSum {
        normalize: Normalize,
    },
    GroupWs {
        num_groups: usize,
    },
    ConcatProj,
    HierConv,
    ClsPool {
        heads: Option<usize>,
        ffn_dim: Option<usize>,
    },
    PcaConcat {
        components_per_layer: Option<usize>,
    },
}

impl InterfaceSpec {
    pub fn weighted_sum() -> Self {
        InterfaceSpec::WeightedSum {
            normalize: Normalize::Softmax,
        }
    }

    /// Short stable name, also used by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            InterfaceSpec::WeightedSum { .. } => "weighted-sum",
            InterfaceSpec::GroupWs { .. } => "group-ws",
            InterfaceSpec::ConcatProj => "concat-proj",
            InterfaceSpec::HierConv => "hier-conv",
            InterfaceSpec::ClsPool { .. } => "cls-pool",
            InterfaceSpec::PcaConcat { .. } => "pca-concat",
        }
    }

    /// Attention heads after default resolution (4 unless overridden).
    pub fn cls_heads(&self) -> usize {
        match self {
            InterfaceSpec::ClsPool { heads, .. } => heads.unwrap_or(4),
            _ => 4,
        }
    }

    /// Feed-forward width after default resolution: round(8D/3), which is
    /// 2048 at D=768.
    pub fn cls_ffn_dim(&self, dim: usize) -> usize {
        match self {
            InterfaceSpec::ClsPool {
                ffn_dim: Some(f), ..
            } => *f,
            _ => ((8 * dim) as f64 / 3.0).round() as usize,
        }
    }

    /// PCA components per layer after default resolution: ceil(D/L).
    pub fn pca_components(&self, num_layers: usize, dim: usize) -> usize {
        match self {
            InterfaceSpec::PcaConcat {
                components_per_layer: Some(k),
            } => *k,
            _ => dim.div_ceil(num_layers),
        }
    }

    /// Check the per-kind invariants against concrete (L, D).
    pub fn validate(&self, num_layers: usize, dim: usize) -> Result<()> {
        if num_layers == 0 || dim == 0 {
            return Err(Error::Config(format!(
                "layer count and feature dim must be >= 1, got L={num_layers}, D={dim}"
            )));
        }
        match self {
            InterfaceSpec::WeightedSum { .. } | InterfaceSpec::ConcatProj => Ok(()),
            InterfaceSpec::GroupWs { num_groups } => {
                if *num_groups == 0 || *num_groups > num_layers {
                    Err(Error::Config(format!(
                        "group count must satisfy 1 <= G <= L, got G={num_groups}, L={num_layers}"
                    )))
                } else {
                    Ok(())
                }
            }
            InterfaceSpec::HierConv => hier_conv::plan(num_layers).map(|_| ()),
            InterfaceSpec::ClsPool { .. } => {
                let heads = self.cls_heads();
                if heads == 0 || !dim.is_multiple_of(heads) {
                    Err(Error::Config(format!(
                        "attention heads must divide the feature dim, got H={heads}, D={dim}"
                    )))
                } else {
                    Ok(())
                }
            }
            InterfaceSpec::PcaConcat { .. } => {
                let k = self.pca_components(num_layers, dim);
                if k == 0 || k > dim {
                    Err(Error::Config(format!(
                        "components per layer must satisfy 1 <= k <= D, got k={k}, D={dim}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Feature dimension of the interface output: D for every kind except
    /// PCA + concatenation, which emits L*k.
    pub fn output_dim(&self, num_layers: usize, dim: usize) -> Result<usize> {
        self.validate(num_layers, dim)?;
        Ok(match self {
            InterfaceSpec::PcaConcat { .. } => num_layers * self.pca_components(num_layers, dim),
            _ => dim,
        })
    }

    /// Exact count of trainable scalars.
    pub fn param_count(&self, num_layers: usize, dim: usize) -> Result<usize> {
        self.validate(num_layers, dim)?;
        let l = num_layers;
        let d = dim;
        Ok(match self {
            InterfaceSpec::WeightedSum { .. } => l,
            InterfaceSpec::GroupWs { num_groups } => l + num_groups * d * d + d,
            InterfaceSpec::ConcatProj => l * d * d + d,
            InterfaceSpec::HierConv => {
                let depth = hier_conv::plan(l)?.depth;
                depth * (CONV_KERNEL * d * d + d)
            }
            InterfaceSpec::ClsPool { .. } => {
                let f = self.cls_ffn_dim(d);
                // CLS + 4 attention mats with biases + FFN + two layer norms
                d + 4 * (d * d + d) + (d * f + f) + (f * d + d) + 4 * d
            }
            InterfaceSpec::PcaConcat { .. } => 0,
        })
    }
}

/// Depth plan of the hierarchical convolution: stacked layer extents under
/// kernel 5 / stride 3 / padding 1, starting at L.
pub fn hierconv_plan(num_layers: usize) -> Result<HierConvPlan> {
    hier_conv::plan(num_layers)
}

/// The upstream hidden representation h in R^{L x T x D}.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    values: Tensor,
}

impl LayerStack {
    pub fn new(values: Tensor) -> Result<Self> {
        match values.shape() {
            [l, t, d] if *l >= 1 && *t >= 1 && *d >= 1 => {}
            s => {
                return Err(Error::Shape(format!(
                    "layer stack must be [L, T, D] with every extent >= 1, got {s:?}"
                )))
            }
        }
        if !values.is_finite() {
            return Err(Error::Data("layer stack contains non-finite values".into()));
        }
        Ok(LayerStack { values })
    }

    pub fn num_layers(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn num_frames(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn at(&self, layer: usize, frame: usize, feature: usize) -> f64 {
        self.values.at(&[layer, frame, feature])
    }

    /// The [T, D] slice of one layer.
    pub fn layer(&self, layer: usize) -> Tensor {
        let (t, d) = (self.num_frames(), self.dim());
        let start = layer * t * d;
        Tensor::new(vec![t, d], self.values.data()[start..start + t * d].to_vec())
            .expect("slice length matches")
    }

    /// The [L, D] slice of one frame.
    pub fn frame(&self, frame: usize) -> Tensor {
        let (l, t, d) = (self.num_layers(), self.num_frames(), self.dim());
        let mut out = vec![0.0; l * d];
        let data = self.values.data();
        for layer in 0..l {
            let src = (layer * t + frame) * d;
            out[layer * d..(layer + 1) * d].copy_from_slice(&data[src..src + d]);
        }
        Tensor::new(vec![l, d], out).expect("slice length matches")
    }

    pub fn random_normal(rng: &mut Prng, num_layers: usize, num_frames: usize, dim: usize) -> Self {
        let mut t = Tensor::zeros(&[num_layers, num_frames, dim]);
        for v in t.data_mut() {
            *v = rng.normal();
        }
        LayerStack { values: t }
    }
}

/// Interface output z in R^{T x D_out}.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFeatures {
    values: Tensor,
}

impl TimeFeatures {
    pub(crate) fn new(values: Tensor) -> Self {
        debug_assert_eq!(values.shape().len(), 2);
        TimeFeatures { values }
    }

    pub fn from_tensor(values: Tensor) -> Result<Self> {
        match values.shape() {
            [_, _] => Ok(TimeFeatures { values }),
            s => Err(Error::Shape(format!(
                "per-frame features must be [T, D_out], got {s:?}"
            ))),
        }
    }

    pub fn num_frames(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn into_values(self) -> Tensor {
        self.values
    }
}

/// Bound, initialized interface: spec + trainable tensors + fitted buffers.
#[derive(Debug, Clone)]
pub struct InterfaceParams {
    spec: InterfaceSpec,
    num_layers: usize,
    dim: usize,
    kind: ParamsKind,
    revision: u64,
}

#[derive(Debug, Clone)]
pub(crate) enum ParamsKind {
    WeightedSum(weighted_sum::Params),
    GroupWs(grouped::Params),
    ConcatProj(concat_proj::Params),
    HierConv(hier_conv::Params),
    ClsPool(Box<cls_pool::Params>),
    PcaConcat { fitted: Option<PcaBuffers> },
}

/// Per-tensor gradients in the same order as [`InterfaceParams::trainable`].
#[derive(Debug, Clone)]
pub struct InterfaceGrads {
    pub tensors: Vec<Tensor>,
}

impl InterfaceGrads {
    pub fn zeros_like(params: &InterfaceParams) -> Self {
        InterfaceGrads {
            tensors: params
                .trainable()
                .iter()
                .map(|(_, t)| Tensor::zeros(t.shape()))
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &InterfaceGrads) {
        debug_assert_eq!(self.tensors.len(), other.tensors.len());
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            for v in t.data_mut() {
                *v *= s;
            }
        }
    }
}

/// Opaque forward intermediates consumed by [`InterfaceParams::backward`].
pub struct ForwardCache {
    revision: u64,
    num_frames: usize,
    out_dim: usize,
    pub(crate) detail: CacheDetail,
}

pub(crate) enum CacheDetail {
    WeightedSum(weighted_sum::Cache),
    GroupWs(grouped::Cache),
    ConcatProj(concat_proj::Cache),
    HierConv(hier_conv::Cache),
    ClsPool(cls_pool::Cache),
    PcaConcat,
}

impl InterfaceParams {
    /// Initialize trainable tensors for `spec` bound to (L, D).
    ///
    /// Raw weighted-sum weights start at zero (uniform after softmax),
    /// projection/convolution/attention weights at normal(0, 1/fan_in),
    /// biases at zero, the CLS embedding at normal with sd 0.02, and layer
    /// norm gains at one. Deterministic given the seed.
    pub fn init(spec: InterfaceSpec, num_layers: usize, dim: usize, rng: &mut Prng) -> Result<Self> {
        spec.validate(num_layers, dim)?;
        let kind = match &spec {
            InterfaceSpec::WeightedSum { .. } => {
                ParamsKind::WeightedSum(weighted_sum::Params::init(num_layers))
            }
            InterfaceSpec::GroupWs { num_groups } => {
                ParamsKind::GroupWs(grouped::Params::init(num_layers, dim, *num_groups, rng))
            }
            InterfaceSpec::ConcatProj => {
                ParamsKind::ConcatProj(concat_proj::Params::init(num_layers, dim, rng))
            }
            InterfaceSpec::HierConv => {
                ParamsKind::HierConv(hier_conv::Params::init(num_layers, dim, rng)?)
            }
            InterfaceSpec::ClsPool { .. } => ParamsKind::ClsPool(Box::new(cls_pool::Params::init(
                dim,
                spec.cls_heads(),
                spec.cls_ffn_dim(dim),
                rng,
            ))),
            InterfaceSpec::PcaConcat { .. } => ParamsKind::PcaConcat { fitted: None },
        };
        Ok(InterfaceParams {
            spec,
            num_layers,
            dim,
            kind,
            revision: 0,
        })
    }

    pub fn spec(&self) -> &InterfaceSpec {
        &self.spec
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec
            .output_dim(self.num_layers, self.dim)
            .expect("validated at init")
    }

    /// Count of trainable scalars actually allocated.
    pub fn allocated_param_count(&self) -> usize {
        self.trainable().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Trainable tensors in canonical (initialization) order.
    pub fn trainable(&self) -> Vec<(&'static str, &Tensor)> {
        match &self.kind {
            ParamsKind::WeightedSum(p) => p.trainable(),
            ParamsKind::GroupWs(p) => p.trainable(),
            ParamsKind::ConcatProj(p) => p.trainable(),
            ParamsKind::HierConv(p) => p.trainable(),
            ParamsKind::ClsPool(p) => p.trainable(),
            ParamsKind::PcaConcat { .. } => Vec::new(),
        }
    }

    /// Mutable view of the trainable tensors; bumps the revision stamp so
    /// caches produced before the mutation are rejected by `backward`.
    pub fn trainable_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        self.revision += 1;
        match &mut self.kind {
            ParamsKind::WeightedSum(p) => p.trainable_mut(),
            ParamsKind::GroupWs(p) => p.trainable_mut(),
            ParamsKind::ConcatProj(p) => p.trainable_mut(),
            ParamsKind::HierConv(p) => p.trainable_mut(),
            ParamsKind::ClsPool(p) => p.trainable_mut(),
            ParamsKind::PcaConcat { .. } => Vec::new(),
        }
    }

    /// Fitted PCA buffers, when present.
    pub fn pca_buffers(&self) -> Option<&PcaBuffers> {
        match &self.kind {
            ParamsKind::PcaConcat { fitted } => fitted.as_ref(),
            _ => None,
        }
    }

    /// Fit per-layer PCA means and bases from a stream of stacks
    /// (single full pass, deterministic in stream order).
    pub fn fit_pca<'a>(&mut self, stacks: impl IntoIterator<Item = &'a LayerStack>) -> Result<()> {
        let k = self.spec.pca_components(self.num_layers, self.dim);
        match &mut self.kind {
            ParamsKind::PcaConcat { fitted } => {
                let buffers = pca::fit(stacks, self.num_layers, self.dim, k)?;
                *fitted = Some(buffers);
                self.revision += 1;
                Ok(())
            }
            _ => Err(Error::State(format!(
                "fit_pca only applies to pca-concat, not {}",
                self.spec.name()
            ))),
        }
    }

    /// Install externally computed PCA buffers (used by bundle loading).
    pub fn set_pca_buffers(&mut self, buffers: PcaBuffers) -> Result<()> {
        match &mut self.kind {
            ParamsKind::PcaConcat { fitted } => {
                buffers.check_dims(self.num_layers, self.dim)?;
                *fitted = Some(buffers);
                self.revision += 1;
                Ok(())
            }
            _ => Err(Error::State(format!(
                "PCA buffers do not apply to {}",
                self.spec.name()
            ))),
        }
    }

    /// Aggregate the stack into per-frame features; the cache feeds
    /// [`Self::backward`].
    pub fn forward(&self, stack: &LayerStack) -> Result<(TimeFeatures, ForwardCache)> {
        if stack.num_layers() != self.num_layers || stack.dim() != self.dim {
            return Err(Error::Shape(format!(
                "stack is [{}x{}x{}] but the interface is bound to L={}, D={}",
                stack.num_layers(),
                stack.num_frames(),
                stack.dim(),
                self.num_layers,
                self.dim
            )));
        }
        let (values, detail) = match &self.kind {
            ParamsKind::WeightedSum(p) => {
                let (v, c) = p.forward(stack, self.normalize());
                (v, CacheDetail::WeightedSum(c))
            }
            ParamsKind::GroupWs(p) => {
                let (v, c) = p.forward(stack)?;
                (v, CacheDetail::GroupWs(c))
            }
            ParamsKind::ConcatProj(p) => {
                let (v, c) = p.forward(stack)?;
                (v, CacheDetail::ConcatProj(c))
            }
            ParamsKind::HierConv(p) => {
                let (v, c) = p.forward(stack)?;
                (v, CacheDetail::HierConv(c))
            }
            ParamsKind::ClsPool(p) => {
                let (v, c) = p.forward(stack)?;
                (v, CacheDetail::ClsPool(c))
            }
            ParamsKind::PcaConcat { fitted } => {
                let buffers = fitted.as_ref().ok_or_else(|| {
                    Error::State("pca-concat forward before fit_pca".to_string())
                })?;
                (pca::forward(buffers, stack), CacheDetail::PcaConcat)
            }
        };
        let out_dim = self.output_dim();
        debug_assert_eq!(values.shape(), &[stack.num_frames(), out_dim]);
        Ok((
            TimeFeatures::new(values),
            ForwardCache {
                revision: self.revision,
                num_frames: stack.num_frames(),
                out_dim,
                detail,
            },
        ))
    }

    /// Exact vector-Jacobian products for every trainable tensor and for the
    /// input stack.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: &Tensor,
    ) -> Result<(InterfaceGrads, Tensor)> {
        if cache.revision != self.revision {
            return Err(Error::State(
                "stale cache: parameters changed since the forward pass".to_string(),
            ));
        }
        if grad_out.shape() != [cache.num_frames, cache.out_dim] {
            return Err(Error::Shape(format!(
                "grad_out must be [{}x{}], got {:?}",
                cache.num_frames,
                cache.out_dim,
                grad_out.shape()
            )));
        }
        let (tensors, grad_input) = match (&self.kind, &cache.detail) {
            (ParamsKind::WeightedSum(p), CacheDetail::WeightedSum(c)) => {
                p.backward(c, grad_out, self.normalize())
            }
            (ParamsKind::GroupWs(p), CacheDetail::GroupWs(c)) => p.backward(c, grad_out)?,
            (ParamsKind::ConcatProj(p), CacheDetail::ConcatProj(c)) => p.backward(c, grad_out)?,
            (ParamsKind::HierConv(p), CacheDetail::HierConv(c)) => p.backward(c, grad_out)?,
            (ParamsKind::ClsPool(p), CacheDetail::ClsPool(c)) => p.backward(c, grad_out)?,
            (ParamsKind::PcaConcat { fitted }, CacheDetail::PcaConcat) => {
                let buffers = fitted
                    .as_ref()
                    .ok_or_else(|| Error::State("pca-concat backward before fit_pca".to_string()))?;
                (Vec::new(), pca::backward(buffers, grad_out))
            }
            _ => {
                return Err(Error::State(
                    "cache kind does not match the interface kind".to_string(),
                ))
            }
        };
        Ok((InterfaceGrads { tensors }, grad_input))
    }

    fn normalize(&self) -> Normalize {
        match &self.spec {
            InterfaceSpec::WeightedSum { normalize } => *normalize,
            _ => Normalize::Softmax,
        }
    }
}

/// Contiguous group ranges: sizes as equal as possible, earlier groups one
/// larger on remainder.
pub(crate) fn group_ranges(num_layers: usize, num_groups: usize) -> Vec<std::ops::Range<usize>> {
    let base = num_layers / num_groups;
    let rem = num_layers % num_groups;
    let mut ranges = Vec::with_capacity(num_groups);
    let mut start = 0;
    for g in 0..num_groups {
        let size = base + usize::from(g < rem);
        ranges.push(start..start + size);
        start += size;
    }
    ranges
}

pub(crate) fn normal_tensor(rng: &mut Prng, shape: &[usize], sd: f64) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = sd * rng.normal();
    }
    t
}

/// normal(0, 1/fan_in) initialization shared with the heads module.
pub(crate) fn normal_init(rng: &mut Prng, shape: &[usize], fan_in: usize) -> Tensor {
    normal_tensor(rng, shape, (1.0 / fan_in as f64).sqrt())
}
