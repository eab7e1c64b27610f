//! Dense row-major tensors of 32-bit floats.
//!
//! Rank 0 (scalar), 1 (vector) and 2 (matrix) cover everything the
//! encoders need. Reductions inside kernels accumulate in f64 and round
//! to f32 at the end so results are reproducible across platforms.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch, expected {expected} but got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("embedding index {index} out of range for table with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("attention input is fully masked; at least one unmasked position is required")]
    FullyMasked,
    #[error("convolution window must be odd, got {window}")]
    EvenWindow { window: usize },
    #[error("model dimension {dim} is not divisible by {heads} attention heads")]
    HeadsMismatch { dim: usize, heads: usize },
    #[error("target index {target} out of range for {len} logits")]
    TargetOutOfRange { target: usize, len: usize },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("gradient check requires a scalar-valued computation, got shape {shape:?}")]
    NonScalarOutput { shape: Vec<usize> },
}

/// Row-major dense tensor of f32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor, panicking if `data` does not fill `shape`.
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Self {
        let expect: usize = shape.iter().product();
        assert_eq!(
            data.len(),
            expect,
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f32) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<f32>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::new(vec![r, c], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// The single value of a scalar or one-element tensor.
    pub fn item(&self) -> f32 {
        assert_eq!(self.data.len(), 1, "item() on tensor with {} elements", self.data.len());
        self.data[0]
    }

    /// Number of rows when viewed as a matrix; vectors are one row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            1 => 1,
            _ => 1,
        }
    }

    /// Number of columns when viewed as a matrix.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            1 => self.shape[0],
            _ => 1,
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn at(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols() + j]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, op: &'static str) -> Result<(), TensorError> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(TensorError::NonFinite { op })
        }
    }

    /// Largest absolute elementwise difference to another tensor of the same shape.
    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// Inner product accumulated in f64.
pub fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| f64::from(*x) * f64::from(*y))
        .sum()
}

/// Sum accumulated in f64.
pub fn sum_f64(a: &[f32]) -> f64 {
    a.iter().map(|x| f64::from(*x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_indexing() {
        let t = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.at(1, 2), 6.0);
        assert_eq!(t.row(0), &[1.0, 2.0, 3.0]);
    }

    #[test]
    #[should_panic(expected = "does not match shape")]
    fn length_mismatch_panics() {
        let _ = Tensor::new(vec![2, 2], vec![1.0]);
    }

    #[test]
    fn finite_check() {
        let t = Tensor::vector(vec![1.0, f32::NAN]);
        assert!(t.check_finite("test").is_err());
        let ok = Tensor::vector(vec![1.0, 2.0]);
        assert!(ok.check_finite("test").is_ok());
    }

    #[test]
    fn scalar_item() {
        assert_eq!(Tensor::scalar(3.5).item(), 3.5);
        assert_eq!(Tensor::scalar(0.0).shape(), &[] as &[usize]);
    }

    #[test]
    fn f64_accumulation() {
        let a = vec![1.0f32; 100];
        let b = vec![0.1f32; 100];
        let d = dot_f64(&a, &b);
        assert!((d - 100.0 * f64::from(0.1f32)).abs() < 1e-9);
    }
}
