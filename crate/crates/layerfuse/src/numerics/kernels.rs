//! Differentiable kernels shared by every interface: matmul, softmax,
//! layer norm, gelu, and 1-D convolution over the layer axis. Reduction
//! orders are fixed so repeated runs are bit-identical.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Standard matrix product with a fixed inner-loop summation order.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = mat_dims(a, "matmul lhs")?;
    let (k2, n) = mat_dims(b, "matmul rhs")?;
    if k != k2 {
        return Err(Error::Shape(format!(
            "matmul inner extents disagree: {m}x{k} vs {k2}x{n}"
        )));
    }
    let mut out = vec![0.0; m * n];
    let ad = a.data();
    let bd = b.data();
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += ad[i * k + p] * bd[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    Tensor::new(vec![m, n], out)
}

fn mat_dims(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match t.shape() {
        [m, n] => Ok((*m, *n)),
        s => Err(Error::Shape(format!("{what} must be 2-D, got {s:?}"))),
    }
}

/// Max-subtracted softmax along `axis`; slices along that axis sum to 1.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    let shape = x.shape();
    if axis >= shape.len() {
        return Err(Error::Shape(format!(
            "softmax axis {axis} out of range for shape {shape:?}"
        )));
    }
    let lane = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = x.data().to_vec();
    for o in 0..outer {
        for i in 0..inner {
            let base = o * lane * inner + i;
            let mut max = f64::NEG_INFINITY;
            for l in 0..lane {
                max = max.max(out[base + l * inner]);
            }
            let mut sum = 0.0;
            for l in 0..lane {
                let e = (out[base + l * inner] - max).exp();
                out[base + l * inner] = e;
                sum += e;
            }
            for l in 0..lane {
                out[base + l * inner] /= sum;
            }
        }
    }
    Tensor::new(shape.to_vec(), out)
}

/// Softmax of a small slice, returned as a fresh vector.
pub fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Backward of `softmax_slice`: given y = softmax(x) and dL/dy, produce dL/dx.
pub fn softmax_slice_backward(y: &[f64], grad_y: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(grad_y).map(|(&yi, &gi)| yi * gi).sum();
    y.iter()
        .zip(grad_y)
        .map(|(&yi, &gi)| yi * (gi - dot))
        .collect()
}

/// Layer norm over the last axis with affine gain/shift.
///
/// Returns the output plus the cache needed by [`layer_norm_backward`].
pub fn layer_norm(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<(Tensor, LayerNormCache)> {
    let shape = x.shape();
    let d = *shape.last().ok_or_else(|| {
        Error::Shape("layer_norm input must have at least one axis".to_string())
    })?;
    if gamma.shape() != [d] || beta.shape() != [d] {
        return Err(Error::Shape(format!(
            "layer_norm affine params must have shape [{d}], got {:?} and {:?}",
            gamma.shape(),
            beta.shape()
        )));
    }
    if eps <= 0.0 {
        return Err(Error::Config(format!("layer_norm eps must be > 0, got {eps}")));
    }
    let rows = x.numel() / d;
    let mut out = vec![0.0; x.numel()];
    let mut normalized = vec![0.0; x.numel()];
    let mut inv_std = vec![0.0; rows];
    let xd = x.data();
    let g = gamma.data();
    let b = beta.data();
    for r in 0..rows {
        let row = &xd[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let istd = 1.0 / (var + eps).sqrt();
        inv_std[r] = istd;
        for j in 0..d {
            let xhat = (row[j] - mean) * istd;
            normalized[r * d + j] = xhat;
            out[r * d + j] = g[j] * xhat + b[j];
        }
    }
    let out = Tensor::new(shape.to_vec(), out)?;
    Ok((
        out,
        LayerNormCache {
            normalized,
            inv_std,
            dim: d,
        },
    ))
}

pub struct LayerNormCache {
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
    dim: usize,
}

/// Gradients of layer_norm: (grad_x, grad_gamma, grad_beta).
pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gamma: &Tensor,
    grad_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let d = cache.dim;
    let rows = cache.inv_std.len();
    let g = gamma.data();
    let go = grad_out.data();
    let mut grad_x = vec![0.0; rows * d];
    let mut grad_gamma = vec![0.0; d];
    let mut grad_beta = vec![0.0; d];
    for r in 0..rows {
        let xhat = &cache.normalized[r * d..(r + 1) * d];
        let gr = &go[r * d..(r + 1) * d];
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for j in 0..d {
            let dxhat = gr[j] * g[j];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat[j];
            grad_gamma[j] += gr[j] * xhat[j];
            grad_beta[j] += gr[j];
        }
        mean_dxhat /= d as f64;
        mean_dxhat_xhat /= d as f64;
        let istd = cache.inv_std[r];
        for j in 0..d {
            let dxhat = gr[j] * g[j];
            grad_x[r * d + j] = istd * (dxhat - mean_dxhat - xhat[j] * mean_dxhat_xhat);
        }
    }
    (
        Tensor::new(grad_out.shape().to_vec(), grad_x).expect("shape preserved"),
        Tensor::new(vec![d], grad_gamma).expect("gamma shape"),
        Tensor::new(vec![d], grad_beta).expect("beta shape"),
    )
}

/// Exact gelu: x * Phi(x) with the error-function form of the normal CDF.
pub fn gelu_scalar(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// d/dx gelu = Phi(x) + x * phi(x).
pub fn gelu_grad_scalar(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

pub fn gelu(x: &Tensor) -> Tensor {
    x.map(gelu_scalar)
}

/// Chain rule through gelu: grad_in = grad_out * gelu'(x).
pub fn gelu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    debug_assert_eq!(x.shape(), grad_out.shape());
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&xi, &gi)| gi * gelu_grad_scalar(xi))
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
}

/// Standard normal CDF via erfc (stable in both tails).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / (2.0 * std::f64::consts::PI).sqrt()
}

/// Output extent of the layer-axis convolution.
pub fn conv1d_output_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(Error::Config(format!(
            "conv kernel ({kernel}) and stride ({stride}) must be >= 1"
        )));
    }
    let padded = len + 2 * padding;
    if padded < kernel {
        return Err(Error::Shape(format!(
            "degenerate window: input {len} + 2*{padding} padding < kernel {kernel}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// 1-D convolution whose spatial axis is the layer index and whose channels
/// are the feature dimension; zero padding.
///
/// `stack` is [L, D], `kernels` is [K, D_in, D_out], `bias` is [D_out]:
/// out[p, d] = bias[d] + sum_{k, c} kernels[k, c, d] * padded(stack)[p*stride + k, c]
pub fn conv1d_layer_axis(
    stack: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let (len, d_in) = mat_dims(stack, "conv input")?;
    let (k, kc, d_out) = match kernels.shape() {
        [k, c, d] => (*k, *c, *d),
        s => return Err(Error::Shape(format!("conv kernels must be 3-D, got {s:?}"))),
    };
    if kc != d_in || bias.shape() != [d_out] {
        return Err(Error::Shape(format!(
            "conv channel mismatch: input {d_in} channels, kernels {kc}, bias {:?}",
            bias.shape()
        )));
    }
    let out_len = conv1d_output_len(len, k, stride, padding)?;
    let xd = stack.data();
    let kd = kernels.data();
    let bd = bias.data();
    let mut out = vec![0.0; out_len * d_out];
    for p in 0..out_len {
        for d in 0..d_out {
            let mut acc = bd[d];
            for kk in 0..k {
                let pos = p * stride + kk;
                if pos < padding || pos >= padding + len {
                    continue; // zero padding
                }
                let row = &xd[(pos - padding) * d_in..(pos - padding + 1) * d_in];
                for (c, &v) in row.iter().enumerate() {
                    acc += kd[(kk * d_in + c) * d_out + d] * v;
                }
            }
            out[p * d_out + d] = acc;
        }
    }
    Tensor::new(vec![out_len, d_out], out)
}

/// Gradients of [`conv1d_layer_axis`]: (grad_kernels, grad_bias, grad_input).
pub fn conv1d_layer_axis_backward(
    stack: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (len, d_in) = mat_dims(stack, "conv input")?;
    let (k, _, d_out) = match kernels.shape() {
        [k, c, d] => (*k, *c, *d),
        s => return Err(Error::Shape(format!("conv kernels must be 3-D, got {s:?}"))),
    };
    let (out_len, god) = mat_dims(grad_out, "conv grad_out")?;
    if god != d_out || out_len != conv1d_output_len(len, k, stride, padding)? {
        return Err(Error::Shape(format!(
            "conv grad_out shape {:?} does not match forward output",
            grad_out.shape()
        )));
    }
    let xd = stack.data();
    let kd = kernels.data();
    let go = grad_out.data();
    let mut grad_k = vec![0.0; k * d_in * d_out];
    let mut grad_b = vec![0.0; d_out];
    let mut grad_x = vec![0.0; len * d_in];
    for p in 0..out_len {
        for d in 0..d_out {
            let g = go[p * d_out + d];
            grad_b[d] += g;
            for kk in 0..k {
                let pos = p * stride + kk;
                if pos < padding || pos >= padding + len {
                    continue;
                }
                let row = pos - padding;
                for c in 0..d_in {
                    grad_k[(kk * d_in + c) * d_out + d] += g * xd[row * d_in + c];
                    grad_x[row * d_in + c] += g * kd[(kk * d_in + c) * d_out + d];
                }
            }
        }
    }
    Ok((
        Tensor::new(vec![k, d_in, d_out], grad_k)?,
        Tensor::new(vec![d_out], grad_b)?,
        Tensor::new(vec![len, d_in], grad_x)?,
    ))
}

/// x·w + b with b broadcast over rows.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut out = matmul(x, w)?;
    let (rows, cols) = mat_dims(&out, "affine output")?;
    if b.shape() != [cols] {
        return Err(Error::Shape(format!(
            "affine bias must have shape [{cols}], got {:?}",
            b.shape()
        )));
    }
    let bd = b.data();
    let od = out.data_mut();
    for r in 0..rows {
        for c in 0..cols {
            od[r * cols + c] += bd[c];
        }
    }
    Ok(out)
}

/// Gradients of [`affine`]: (grad_x, grad_w, grad_b).
pub fn affine_backward(x: &Tensor, w: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let grad_x = matmul(grad_out, &transpose(w)?)?;
    let grad_w = matmul(&transpose(x)?, grad_out)?;
    let (rows, cols) = mat_dims(grad_out, "affine grad_out")?;
    let mut grad_b = vec![0.0; cols];
    let god = grad_out.data();
    for r in 0..rows {
        for c in 0..cols {
            grad_b[c] += god[r * cols + c];
        }
    }
    Ok((grad_x, grad_w, Tensor::new(vec![cols], grad_b)?))
}

pub fn transpose(t: &Tensor) -> Result<Tensor> {
    let (m, n) = mat_dims(t, "transpose input")?;
    let td = t.data();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = td[i * n + j];
        }
    }
    Tensor::new(vec![n, m], out)
}

/// Central-difference gradient of a scalar function, one coordinate at a time.
pub fn finite_diff_grad(f: &mut dyn FnMut(&Tensor) -> f64, x: &Tensor, h: f64) -> Tensor {
    assert!(h > 0.0, "finite difference step must be positive");
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Relative error used by every gradient check in this crate.
pub fn grad_rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-8, analytic.abs() + numeric.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::prng::Prng;

    fn random_tensor(rng: &mut Prng, shape: &[usize]) -> Tensor {
        let mut t = Tensor::zeros(shape);
        for v in t.data_mut() {
            *v = rng.normal();
        }
        t
    }

    #[test]
    fn matmul_identity() {
        let i2 = Tensor::eye(2);
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(matmul(&i2, &a).unwrap(), a);
    }

    #[test]
    fn matmul_small_case() {
        let a = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(vec![2, 1], vec![3.0, 4.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[11.0]);
    }

    #[test]
    fn matmul_matches_naive_oracle() {
        // oracle written separately from the implementation on purpose
        let mut rng = Prng::new(5);
        let a = random_tensor(&mut rng, &[7, 5]);
        let b = random_tensor(&mut rng, &[5, 3]);
        let c = matmul(&a, &b).unwrap();
        for i in 0..7 {
            for j in 0..3 {
                let mut want = 0.0;
                for p in 0..5 {
                    want += a.at(&[i, p]) * b.at(&[p, j]);
                }
                assert!((c.at(&[i, j]) - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[4, 2]);
        assert!(matmul(&a, &b).is_err());
    }

    #[test]
    fn softmax_symmetry_and_overflow() {
        let x = Tensor::new(vec![3], vec![0.0, 0.0, 0.0]).unwrap();
        let y = softmax(&x, 0).unwrap();
        for &v in y.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let x = Tensor::new(vec![2], vec![1000.0, 0.0]).unwrap();
        let y = softmax(&x, 0).unwrap();
        assert!((y.data()[0] - 1.0).abs() <= 1e-12);
        assert!(y.data()[1].abs() <= 1e-12);
    }

    #[test]
    fn softmax_matches_extended_precision_oracle() {
        // frozen from a 50-digit exp/sum evaluation of softmax(1, 2, 3)
        let x = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let y = softmax(&x, 0).unwrap();
        let want = [
            0.09003057317038046,
            0.24472847105479765,
            0.6652409557748219,
        ];
        for (got, want) in y.data().iter().zip(want) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn softmax_interior_axis_slices_sum_to_one() {
        let mut rng = Prng::new(9);
        let x = random_tensor(&mut rng, &[3, 4, 2]);
        let y = softmax(&x, 1).unwrap();
        for o in 0..3 {
            for i in 0..2 {
                let sum: f64 = (0..4).map(|l| y.at(&[o, l, i])).sum();
                assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn layer_norm_constant_row_is_zero() {
        let x = Tensor::full(&[2, 4], 3.5);
        let gamma = Tensor::full(&[4], 1.0);
        let beta = Tensor::zeros(&[4]);
        let (y, _) = layer_norm(&x, &gamma, &beta, 1e-5).unwrap();
        for &v in y.data() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_affine_collapse() {
        let mut rng = Prng::new(2);
        let x = random_tensor(&mut rng, &[3, 5]);
        let gamma = Tensor::zeros(&[5]);
        let beta = Tensor::full(&[5], -1.25);
        let (y, _) = layer_norm(&x, &gamma, &beta, 1e-5).unwrap();
        for &v in y.data() {
            assert!((v + 1.25).abs() < 1e-15);
        }
    }

    #[test]
    fn layer_norm_gradcheck() {
        let mut rng = Prng::new(4);
        let x = random_tensor(&mut rng, &[3, 6]);
        let gamma = random_tensor(&mut rng, &[6]);
        let beta = random_tensor(&mut rng, &[6]);
        let weights = random_tensor(&mut rng, &[3, 6]); // fixed projection to a scalar
        let loss = |x: &Tensor, gamma: &Tensor, beta: &Tensor| -> f64 {
            let (y, _) = layer_norm(x, gamma, beta, 1e-5).unwrap();
            y.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
        };

        let (_, cache) = layer_norm(&x, &gamma, &beta, 1e-5).unwrap();
        let (gx, gg, gb) = layer_norm_backward(&cache, &gamma, &weights);

        let fx = finite_diff_grad(&mut |p| loss(p, &gamma, &beta), &x, 1e-5);
        let fg = finite_diff_grad(&mut |p| loss(&x, p, &beta), &gamma, 1e-5);
        let fb = finite_diff_grad(&mut |p| loss(&x, &gamma, p), &beta, 1e-5);
        for (a, n) in gx.data().iter().zip(fx.data()) {
            assert!(grad_rel_err(*a, *n) <= 1e-6, "{a} vs {n}");
        }
        for (a, n) in gg.data().iter().zip(fg.data()) {
            assert!(grad_rel_err(*a, *n) <= 1e-6);
        }
        for (a, n) in gb.data().iter().zip(fb.data()) {
            assert!(grad_rel_err(*a, *n) <= 1e-6);
        }
    }

    #[test]
    fn gelu_fixed_points() {
        assert_eq!(gelu_scalar(0.0), 0.0);
        assert!((gelu_scalar(20.0) - 20.0).abs() <= 1e-9);
        assert!(gelu_scalar(-20.0).abs() <= 1e-9);
    }

    #[test]
    fn gelu_gradcheck() {
        let mut rng = Prng::new(6);
        let x = random_tensor(&mut rng, &[10]);
        let ones = Tensor::full(&[10], 1.0);
        let g = gelu_backward(&x, &ones);
        let f = finite_diff_grad(&mut |p| gelu(p).data().iter().sum(), &x, 1e-5);
        for (a, n) in g.data().iter().zip(f.data()) {
            assert!(grad_rel_err(*a, *n) <= 1e-6, "{a} vs {n}");
        }
    }

    #[test]
    fn conv_length_formula() {
        // L=13, K=5, stride=3, padding=1 -> 4
        assert_eq!(conv1d_output_len(13, 5, 3, 1).unwrap(), 4);
        assert!(conv1d_output_len(2, 5, 3, 1).is_err());
    }

    #[test]
    fn conv_length_formula_exhaustive() {
        // Enumerated oracle: count the valid window start positions.
        for len in 1..=64usize {
            for padding in 0..=2usize {
                for kernel in [1usize, 3, 5] {
                    for stride in [1usize, 2, 3] {
                        let padded = len + 2 * padding;
                        if padded < kernel {
                            assert!(conv1d_output_len(len, kernel, stride, padding).is_err());
                            continue;
                        }
                        let mut count = 0;
                        let mut start = 0;
                        while start + kernel <= padded {
                            count += 1;
                            start += stride;
                        }
                        assert_eq!(
                            conv1d_output_len(len, kernel, stride, padding).unwrap(),
                            count,
                            "len {len} k {kernel} s {stride} p {padding}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn conv_zero_kernels_emit_bias() {
        let stack = Tensor::new(vec![4, 2], vec![1.0; 8]).unwrap();
        let kernels = Tensor::zeros(&[3, 2, 2]);
        let bias = Tensor::new(vec![2], vec![0.5, -2.0]).unwrap();
        let out = conv1d_layer_axis(&stack, &kernels, &bias, 1, 1).unwrap();
        assert_eq!(out.shape(), &[4, 2]);
        for p in 0..4 {
            assert_eq!(out.at(&[p, 0]), 0.5);
            assert_eq!(out.at(&[p, 1]), -2.0);
        }
    }

    #[test]
    fn conv_identity_kernel_passes_input_through() {
        let mut rng = Prng::new(8);
        let stack = random_tensor(&mut rng, &[6, 3]);
        // K=1, stride=1, padding=0, kernels[0] = identity over channels
        let mut kernels = Tensor::zeros(&[1, 3, 3]);
        for c in 0..3 {
            kernels.set(&[0, c, c], 1.0);
        }
        let bias = Tensor::zeros(&[3]);
        let out = conv1d_layer_axis(&stack, &kernels, &bias, 1, 0).unwrap();
        assert_eq!(out, stack);
    }

    #[test]
    fn conv_gradcheck() {
        let mut rng = Prng::new(12);
        let stack = random_tensor(&mut rng, &[7, 3]);
        let kernels = random_tensor(&mut rng, &[5, 3, 2]);
        let bias = random_tensor(&mut rng, &[2]);
        let weights = random_tensor(&mut rng, &[3, 2]); // out_len = (7+2-5)/3+1 = 2... see below
        let out = conv1d_layer_axis(&stack, &kernels, &bias, 2, 1).unwrap();
        assert_eq!(out.shape(), &[3, 2]); // (7 + 2 - 5)/2 + 1
        let loss = |s: &Tensor, k: &Tensor, b: &Tensor| -> f64 {
            let y = conv1d_layer_axis(s, k, b, 2, 1).unwrap();
            y.data().iter().zip(weights.data()).map(|(a, w)| a * w).sum()
        };
        let (gk, gb, gx) = conv1d_layer_axis_backward(&stack, &kernels, &weights, 2, 1).unwrap();
        let fk = finite_diff_grad(&mut |p| loss(&stack, p, &bias), &kernels, 1e-5);
        let fb = finite_diff_grad(&mut |p| loss(&stack, &kernels, p), &bias, 1e-5);
        let fx = finite_diff_grad(&mut |p| loss(p, &kernels, &bias), &stack, 1e-5);
        for (a, n) in gk.data().iter().zip(fk.data()) {
            assert!(grad_rel_err(*a, *n) <= 1e-6);
        }
        for (a, n) in gb.data().iter().zip(fb.data()) {
            assert!(grad_rel_err(*a, *n) <= 1e-6);
        }
        for (a, n) in gx.data().iter().zip(fx.data()) {
            assert!(grad_rel_err(*a, *n) <= 1e-6);
        }
    }

    #[test]
    fn affine_gradcheck() {
        let mut rng = Prng::new(21);
        let x = random_tensor(&mut rng, &[4, 3]);
        let w = random_tensor(&mut rng, &[3, 2]);
        let b = random_tensor(&mut rng, &[2]);
        let probe = random_tensor(&mut rng, &[4, 2]);
        let loss = |x: &Tensor, w: &Tensor, b: &Tensor| -> f64 {
            let y = affine(x, w, b).unwrap();
            y.data().iter().zip(probe.data()).map(|(a, p)| a * p).sum()
        };
        let (gx, gw, gb) = affine_backward(&x, &w, &probe).unwrap();
        let fx = finite_diff_grad(&mut |p| loss(p, &w, &b), &x, 1e-5);
        let fw = finite_diff_grad(&mut |p| loss(&x, p, &b), &w, 1e-5);
        let fb = finite_diff_grad(&mut |p| loss(&x, &w, p), &b, 1e-5);
        for (a, n) in gx.data().iter().zip(fx.data()) {
            assert!(grad_rel_err(*a, *n) <= 1e-6);
        }
        for (a, n) in gw.data().iter().zip(fw.data()) {
            assert!(grad_rel_err(*a, *n) <= 1e-6);
        }
        for (a, n) in gb.data().iter().zip(fb.data()) {
            assert!(grad_rel_err(*a, *n) <= 1e-6);
        }
    }

    #[test]
    fn finite_diff_analytic_cases() {
        let x = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let g = finite_diff_grad(&mut |t| t.data().iter().map(|v| v * v).sum(), &x, 1e-5);
        assert!((g.data()[0] - 2.0).abs() <= 1e-8);
        assert!((g.data()[1] - 4.0).abs() <= 1e-8);

        let x = Tensor::new(vec![2], vec![3.0, 5.0]).unwrap();
        let g = finite_diff_grad(&mut |t| t.data()[0] * t.data()[1], &x, 1e-5);
        assert!((g.data()[0] - 5.0).abs() <= 1e-8);
        assert!((g.data()[1] - 3.0).abs() <= 1e-8);
    }
}
