use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, ReachError, Result};

/// Affine map `x ↦ A x + b` used for discrete resets.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(ReachError::input("affine map matrix must be square"));
        }
        check_dim("AffineMap::new", matrix.nrows(), offset.len())?;
        Ok(Self { matrix, offset })
    }

    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, DVector::zeros(n))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
            offset: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("AffineMap::apply", self.dim(), x.len())?;
        Ok(&self.matrix * x + &self.offset)
    }
}
