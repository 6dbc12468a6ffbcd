use nalgebra::{DMatrix, DVector};

use super::Zonotope;
use crate::error::{check_dim, ReachError, Result};

/// Axis-aligned box given by center and nonnegative radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperrectangle {
    center: DVector<f64>,
    radius: DVector<f64>,
}

impl Hyperrectangle {
    pub fn new(center: DVector<f64>, radius: DVector<f64>) -> Result<Self> {
        check_dim("Hyperrectangle::new", center.len(), radius.len())?;
        if radius.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(ReachError::input("hyperrectangle radius must be finite and >= 0"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(ReachError::input("hyperrectangle center must be finite"));
        }
        Ok(Self { center, radius })
    }

    pub(crate) fn new_unchecked(center: DVector<f64>, radius: DVector<f64>) -> Self {
        Self { center, radius }
    }

    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim("Hyperrectangle::from_bounds", lo.len(), hi.len())?;
        if lo.iter().zip(hi).any(|(l, h)| l > h) {
            return Err(ReachError::input("hyperrectangle with lo > hi"));
        }
        let center = DVector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)));
        let radius = DVector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(l, h)| 0.5 * (h - l)));
        Self::new(center, radius)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn radius(&self) -> &DVector<f64> {
        &self.radius
    }

    pub fn low(&self) -> DVector<f64> {
        &self.center - &self.radius
    }

    pub fn high(&self) -> DVector<f64> {
        &self.center + &self.radius
    }

    /// Box as a zonotope with one axis-aligned generator per nonzero radius.
    pub fn to_zonotope(&self) -> Zonotope {
        Zonotope::from_parts(self.center.clone(), DMatrix::from_diagonal(&self.radius))
    }

    pub fn contains(&self, p: &DVector<f64>) -> bool {
        p.len() == self.dim()
            && (0..self.dim()).all(|j| (p[j] - self.center[j]).abs() <= self.radius[j])
    }
}
