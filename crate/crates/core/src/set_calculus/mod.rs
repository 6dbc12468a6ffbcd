//! Zonotope and box algebra used by the reachability engine.
//!
//! All set values are immutable; every operation returns a fresh value.

mod affine;
mod containment;
mod hyperrectangle;
mod interval_matrix;
mod zonotope;

pub use affine::AffineMap;
pub use hyperrectangle::Hyperrectangle;
pub use interval_matrix::IntervalMatrix;
pub use zonotope::Zonotope;

use crate::error::{ReachError, Result};

/// Default slack (in generator-coefficient space) used by point containment.
pub const CONTAINMENT_TOL: f64 = 1e-9;

/// Minkowski sum `z1 ⊕ z2`.
pub fn minkowski_sum(z1: &Zonotope, z2: &Zonotope) -> Result<Zonotope> {
    z1.minkowski_sum(z2)
}

/// Applies `x ↦ Ax + b` to every point of `z`.
pub fn affine_map(map: &AffineMap, z: &Zonotope) -> Result<Zonotope> {
    z.affine_map(map)
}

/// Encloses `{A z : A ∈ im, z ∈ z}`.
pub fn interval_matrix_map(im: &IntervalMatrix, z: &Zonotope) -> Result<Zonotope> {
    z.interval_matrix_map(im)
}

/// Overapproximates the union of `sets` by a single zonotope.
///
/// A singleton list is returned unchanged; otherwise the result is the interval
/// hull of all inputs as a box zonotope.
pub fn cluster_union(sets: &[Zonotope]) -> Result<Zonotope> {
    let first = sets
        .first()
        .ok_or_else(|| ReachError::input("cluster_union of an empty list"))?;
    if sets.len() == 1 {
        return Ok(first.clone());
    }
    let n = first.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for z in sets {
        crate::error::check_dim("cluster_union", n, z.dim())?;
        for j in 0..n {
            let (l, h) = z.axis_bounds(j);
            lo[j] = lo[j].min(l);
            hi[j] = hi[j].max(h);
        }
    }
    Ok(Hyperrectangle::from_bounds(&lo, &hi)?.to_zonotope())
}
