//! Per-layer PCA + concatenation: a parameter-free interface whose buffers
//! (per-layer mean and top-k basis) are fitted once from the task dataset.

use super::LayerStack;
use crate::error::{Error, Result};
use crate::numerics::{sym_eig, Tensor};

/// Fitted per-layer mean vectors and principal bases.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBuffers {
    mean: Tensor,  // [L, D]
    basis: Tensor, // [L, D, k], columns are the top-k eigenvectors
    eigenvalues: Tensor, // [L, D] descending, kept for diagnostics
}

impl PcaBuffers {
    pub fn new(mean: Tensor, basis: Tensor, eigenvalues: Tensor) -> Result<Self> {
        match (mean.shape(), basis.shape()) {
            ([l1, d1], [l2, d2, _]) if l1 == l2 && d1 == d2 => {}
            (m, b) => {
                return Err(Error::Shape(format!(
                    "inconsistent PCA buffers: mean {m:?}, basis {b:?}"
                )))
            }
        }
        Ok(PcaBuffers {
            mean,
            basis,
            eigenvalues,
        })
    }

    pub fn components_per_layer(&self) -> usize {
        self.basis.shape()[2]
    }

    pub fn mean(&self) -> &Tensor {
        &self.mean
    }

    pub fn basis(&self) -> &Tensor {
        &self.basis
    }

    /// Per-layer eigenvalue spectra (descending), one row per layer.
    pub fn eigenvalues(&self) -> &Tensor {
        &self.eigenvalues
    }

    pub(crate) fn check_dims(&self, num_layers: usize, dim: usize) -> Result<()> {
        if self.mean.shape() != [num_layers, dim] {
            return Err(Error::Shape(format!(
                "PCA buffers fitted for {:?}, interface bound to L={num_layers}, D={dim}",
                self.mean.shape()
            )));
        }
        Ok(())
    }
}

/// One streaming pass: accumulate per-layer mean and population covariance,
/// then keep the top-k eigenvectors of each layer's covariance.
pub(crate) fn fit<'a>(
    stacks: impl IntoIterator<Item = &'a LayerStack>,
    num_layers: usize,
    dim: usize,
    k: usize,
) -> Result<PcaBuffers> {
    let mut count = 0usize;
    let mut sums = vec![0.0; num_layers * dim];
    let mut prods = vec![0.0; num_layers * dim * dim]; // sum of outer products
    for stack in stacks {
        if stack.num_layers() != num_layers || stack.dim() != dim {
            return Err(Error::Data(format!(
                "stack [{}x{}x{}] does not match fit dims L={num_layers}, D={dim}",
                stack.num_layers(),
                stack.num_frames(),
                stack.dim()
            )));
        }
        let t = stack.num_frames();
        let data = stack.values().data();
        for layer in 0..num_layers {
            for frame in 0..t {
                let row = &data[(layer * t + frame) * dim..(layer * t + frame + 1) * dim];
                let sums = &mut sums[layer * dim..(layer + 1) * dim];
                for (s, &v) in sums.iter_mut().zip(row) {
                    *s += v;
                }
                let prods = &mut prods[layer * dim * dim..(layer + 1) * dim * dim];
                for (i, &vi) in row.iter().enumerate() {
                    for (j, &vj) in row.iter().enumerate() {
                        prods[i * dim + j] += vi * vj;
                    }
                }
            }
        }
        count += t;
    }
    if count < k + 1 {
        return Err(Error::Data(format!(
            "PCA needs at least k+1 = {} frames, got {count}",
            k + 1
        )));
    }
    let n = count as f64;
    let mut mean = Tensor::zeros(&[num_layers, dim]);
    let mut basis = Tensor::zeros(&[num_layers, dim, k]);
    let mut spectra = Tensor::zeros(&[num_layers, dim]);
    for layer in 0..num_layers {
        let mu = &sums[layer * dim..(layer + 1) * dim];
        for (i, &m) in mu.iter().enumerate() {
            mean.data_mut()[layer * dim + i] = m / n;
        }
        // population covariance: E[xxT] - mu muT
        let mut cov = Tensor::zeros(&[dim, dim]);
        for i in 0..dim {
            for j in 0..dim {
                cov.data_mut()[i * dim + j] =
                    prods[layer * dim * dim + i * dim + j] / n - (mu[i] / n) * (mu[j] / n);
            }
        }
        let (vals, vecs) = sym_eig(&cov)?;
        for i in 0..dim {
            spectra.data_mut()[layer * dim + i] = vals.data()[i];
        }
        for row in 0..dim {
            for col in 0..k {
                basis.data_mut()[(layer * dim + row) * k + col] = vecs.at(&[row, col]);
            }
        }
    }
    PcaBuffers::new(mean, basis, spectra)
}

/// z[t, l*k + j] = sum_d basis[l, d, j] * (h[l, t, d] - mean[l, d])
pub(crate) fn forward(buffers: &PcaBuffers, stack: &LayerStack) -> Tensor {
    let (l, t, d) = (stack.num_layers(), stack.num_frames(), stack.dim());
    let k = buffers.components_per_layer();
    let data = stack.values().data();
    let mu = buffers.mean.data();
    let basis = buffers.basis.data();
    let mut out = vec![0.0; t * l * k];
    for layer in 0..l {
        for frame in 0..t {
            let row = &data[(layer * t + frame) * d..(layer * t + frame + 1) * d];
            for comp in 0..k {
                let mut acc = 0.0;
                for feat in 0..d {
                    acc += basis[(layer * d + feat) * k + comp] * (row[feat] - mu[layer * d + feat]);
                }
                out[frame * l * k + layer * k + comp] = acc;
            }
        }
    }
    Tensor::new(vec![t, l * k], out).expect("shape matches")
}

/// The map is linear in h, so the input gradient is basis * grad_out,
/// scattered back per layer. Parameter gradients are empty by construction.
pub(crate) fn backward(buffers: &PcaBuffers, grad_out: &Tensor) -> Tensor {
    let l = buffers.mean.shape()[0];
    let d = buffers.mean.shape()[1];
    let k = buffers.components_per_layer();
    let t = grad_out.shape()[0];
    let basis = buffers.basis.data();
    let go = grad_out.data();
    let mut grad_input = vec![0.0; l * t * d];
    for layer in 0..l {
        for frame in 0..t {
            for feat in 0..d {
                let mut acc = 0.0;
                for comp in 0..k {
                    acc += basis[(layer * d + feat) * k + comp]
                        * go[frame * l * k + layer * k + comp];
                }
                grad_input[(layer * t + frame) * d + feat] = acc;
            }
        }
    }
    Tensor::new(vec![l, t, d], grad_input).expect("shape matches")
}
