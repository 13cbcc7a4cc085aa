//! Cyclic Jacobi eigensolver for symmetric matrices. Deterministic output:
//! eigenvalues sorted descending and each eigenvector's largest-magnitude
//! entry made positive.

use super::tensor::Tensor;
use crate::error::{Error, Result};

const OFF_DIAGONAL_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-9;

/// Eigen-decomposition of a symmetric matrix.
///
/// Input is symmetrized as (A + Aᵀ)/2 after checking the asymmetry stays
/// within 1e-9. Rotations run in cyclic row order until the off-diagonal
/// Frobenius norm drops below 1e-10. Returns (eigenvalues descending,
/// eigenvector matrix with eigenvectors as columns).
pub fn sym_eig(a: &Tensor) -> Result<(Tensor, Tensor)> {
    let n = match a.shape() {
        [r, c] if r == c => *r,
        s => return Err(Error::Shape(format!("sym_eig wants a square matrix, got {s:?}"))),
    };
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let aij = a.at(&[i, j]);
            let aji = a.at(&[j, i]);
            if (aij - aji).abs() > SYMMETRY_TOL {
                return Err(Error::Config(format!(
                    "matrix not symmetric: |a[{i},{j}] - a[{j},{i}]| = {}",
                    (aij - aji).abs()
                )));
            }
            m[i * n + j] = 0.5 * (aij + aji);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m, n) <= OFF_DIAGONAL_TOL {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                // rotation annihilating m[p][q]
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = {
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&m, n) > OFF_DIAGONAL_TOL {
        return Err(Error::Convergence(format!(
            "Jacobi sweeps exhausted ({MAX_SWEEPS}) with off-diagonal norm {}",
            off_diagonal_norm(&m, n)
        )));
    }

    // sort descending; stable so exact ties keep rotation order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[j * n + j]
            .partial_cmp(&m[i * n + i])
            .expect("eigenvalues are finite")
    });
    let mut eigenvalues = vec![0.0; n];
    let mut eigenvectors = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = m[src * n + src];
        // fix the sign: largest-magnitude entry positive, first index on ties
        let mut best = 0;
        for k in 1..n {
            if v[k * n + src].abs() > v[best * n + src].abs() {
                best = k;
            }
        }
        let flip = if v[best * n + src] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            eigenvectors[k * n + dst] = flip * v[k * n + src];
        }
    }
    Ok((
        Tensor::new(vec![n], eigenvalues)?,
        Tensor::new(vec![n, n], eigenvectors)?,
    ))
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += m[i * n + j] * m[i * n + j];
            }
        }
    }
    sum.sqrt()
}
