use crate::error::{Error, Result};

/// Dense row-major tensor of f64 values.
///
/// For shape (a, b, c) the element (i, j, k) lives at flat index
/// i*b*c + j*c + k. All kernels in this crate run in f64 even when the
/// on-disk payload is f32; values are widened on load.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero extent in shape {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(Error::Shape(format!(
                "shape {shape:?} wants {numel} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    /// Identity matrix.
    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (i, (&ix, &ext)) in index.iter().zip(&self.shape).enumerate() {
            debug_assert!(ix < ext, "index {ix} out of range {ext} at axis {i}");
            off = off * ext + ix;
        }
        off
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    /// Same data, new shape; element count must match.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} ({} values) to {shape:?} ({numel} values)",
                self.shape,
                self.data.len()
            )));
        }
        Tensor::new(shape.to_vec(), self.data.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise a + s*b into a new tensor.
    pub fn axpy(&self, s: f64, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "axpy shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + s * b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn new_rejects_length_mismatch() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn row_major_offset() {
        let t = Tensor::new(vec![2, 3, 4], (0..24).map(|v| v as f64).collect()).unwrap();
        // (i, j, k) -> i*12 + j*4 + k
        assert_eq!(t.at(&[1, 2, 3]), 23.0);
        assert_eq!(t.at(&[0, 1, 2]), 6.0);
        assert_eq!(t.offset(&[1, 0, 0]), 12);
    }

    proptest! {
        // reshape round-trips preserve flat row-major layout
        #[test]
        fn reshape_round_trip(a in 1usize..5, b in 1usize..5, c in 1usize..5) {
            let numel = a * b * c;
            let t = Tensor::new(vec![a, b, c], (0..numel).map(|v| v as f64).collect()).unwrap();
            let flat = t.reshape(&[numel]).unwrap();
            prop_assert_eq!(flat.data(), t.data());
            let back = flat.reshape(&[a, b, c]).unwrap();
            prop_assert_eq!(&back, &t);
            // spot-check the index formula on the last element
            prop_assert_eq!(back.at(&[a - 1, b - 1, c - 1]), (numel - 1) as f64);
        }
    }
}
