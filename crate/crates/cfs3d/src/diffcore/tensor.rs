//! Dense row-major `f64` tensors of rank 0, 1, or 2.

use crate::error::{Error, Result};

/// A dense value array with a shape. Rank 0 is a scalar, rank 1 a vector,
/// rank 2 a row-major matrix; nothing in the crate needs more.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if shape.len() > 2 {
            return Err(Error::Dimension(format!(
                "rank {} tensors unsupported (shape {shape:?})",
                shape.len()
            )));
        }
        if expect != values.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} implies {expect} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor { shape, values })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![],
            values: vec![v],
        }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Tensor {
            shape: vec![values.len()],
            values,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; n],
        }
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], values)
    }

    /// Build a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::Dimension(format!(
                    "row {i} has {} columns, expected {c}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Tensor::new(vec![r, c], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    /// Row count of a matrix (rank 2 only).
    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[0]
    }

    /// Column count of a matrix (rank 2 only).
    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[1]
    }

    /// Matrix element access (rank 2 only).
    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.values[r * self.shape[1] + c]
    }

    /// One matrix row as a slice (rank 2 only).
    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    /// The value of a scalar tensor.
    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.values[0]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
