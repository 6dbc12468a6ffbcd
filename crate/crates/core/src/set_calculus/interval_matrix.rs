use nalgebra::DMatrix;

use crate::error::{check_dim, ReachError, Result};

/// Square matrix with interval entries, stored in midpoint-radius form.
///
/// A scalar matrix `A` instantiates it iff `|A − mid| ≤ rad` entrywise.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    mid: DMatrix<f64>,
    rad: DMatrix<f64>,
}

impl IntervalMatrix {
    pub fn new(mid: DMatrix<f64>, rad: DMatrix<f64>) -> Result<Self> {
        if !mid.is_square() {
            return Err(ReachError::input("interval matrix must be square"));
        }
        check_dim("IntervalMatrix::new", mid.nrows(), rad.nrows())?;
        check_dim("IntervalMatrix::new", mid.ncols(), rad.ncols())?;
        if rad.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) || mid.iter().any(|m| !m.is_finite()) {
            return Err(ReachError::input(
                "interval matrix needs finite midpoint and radius >= 0",
            ));
        }
        Ok(Self { mid, rad })
    }

    pub fn from_bounds(lo: &DMatrix<f64>, hi: &DMatrix<f64>) -> Result<Self> {
        check_dim("IntervalMatrix::from_bounds", lo.nrows(), hi.nrows())?;
        check_dim("IntervalMatrix::from_bounds", lo.ncols(), hi.ncols())?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(ReachError::input("interval matrix entry with lo > hi"));
        }
        Self::new((lo + hi) * 0.5, (hi - lo) * 0.5)
    }

    /// Degenerate interval matrix with zero radius.
    pub fn from_scalar(a: DMatrix<f64>) -> Result<Self> {
        let rad = DMatrix::zeros(a.nrows(), a.ncols());
        Self::new(a, rad)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mid: DMatrix::identity(n, n),
            rad: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mid.nrows()
    }

    pub fn midpoint(&self) -> &DMatrix<f64> {
        &self.mid
    }

    pub fn radius(&self) -> &DMatrix<f64> {
        &self.rad
    }

    pub fn inf(&self) -> DMatrix<f64> {
        &self.mid - &self.rad
    }

    pub fn sup(&self) -> DMatrix<f64> {
        &self.mid + &self.rad
    }

    /// `(lo, hi)` of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> (f64, f64) {
        (self.mid[(i, j)] - self.rad[(i, j)], self.mid[(i, j)] + self.rad[(i, j)])
    }

    pub fn with_entry(&self, i: usize, j: usize, lo: f64, hi: f64) -> Result<Self> {
        if i >= self.dim() || j >= self.dim() {
            return Err(ReachError::input(format!("entry ({i}, {j}) out of range")));
        }
        if lo > hi || !lo.is_finite() || !hi.is_finite() {
            return Err(ReachError::input(format!("invalid interval [{lo}, {hi}]")));
        }
        let mut out = self.clone();
        out.mid[(i, j)] = 0.5 * (lo + hi);
        out.rad[(i, j)] = 0.5 * (hi - lo);
        Ok(out)
    }

    pub fn is_scalar(&self) -> bool {
        self.rad.iter().all(|&r| r == 0.0)
    }

    /// Whether the scalar matrix `a` instantiates this interval matrix.
    pub fn contains(&self, a: &DMatrix<f64>) -> bool {
        a.shape() == self.mid.shape()
            && a
                .iter()
                .zip(self.mid.iter().zip(self.rad.iter()))
                .all(|(x, (m, r))| (x - m).abs() <= *r)
    }

    /// Entrywise upper bound on `|A|` over all instantiations.
    pub fn abs_upper(&self) -> DMatrix<f64> {
        self.mid.abs() + &self.rad
    }

    /// Max row sum of `|mid| + rad`.
    pub fn norm_inf(&self) -> f64 {
        let a = self.abs_upper();
        a.row_iter()
            .map(|r| r.iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mid: &self.mid * s,
            rad: &self.rad * s.abs(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim("IntervalMatrix::add", self.dim(), other.dim())?;
        Ok(Self {
            mid: &self.mid + &other.mid,
            rad: &self.rad + &other.rad,
        })
    }

    /// Adds `r` to every entry's radius.
    pub fn widen(&self, r: f64) -> Self {
        Self {
            mid: self.mid.clone(),
            rad: self.rad.add_scalar(r),
        }
    }

    /// Midpoint-radius interval product (Rump): encloses `{AB : A ∈ self, B ∈ other}`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_dim("IntervalMatrix::mul", self.dim(), other.dim())?;
        let mid = &self.mid * &other.mid;
        if self.is_scalar() && other.is_scalar() {
            let n = self.dim();
            return Ok(Self {
                mid,
                rad: DMatrix::zeros(n, n),
            });
        }
        let rad = self.mid.abs() * &other.rad + &self.rad * other.mid.abs() + &self.rad * &other.rad;
        Ok(Self { mid, rad })
    }
}
