use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use super::{containment, AffineMap, Hyperrectangle, IntervalMatrix, CONTAINMENT_TOL};
use crate::error::{check_dim, ReachError, Result};

/// A zonotope `{c + G ξ : ξ ∈ [-1, 1]^p}` with center `c ∈ R^n` and generator
/// matrix `G ∈ R^{n×p}` (one generator per column).
///
/// All-zero generators are dropped on construction so that the order reflects
/// the actual shape of the set.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
}

impl Zonotope {
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(ReachError::input("zonotope of dimension zero"));
        }
        // an n×0 matrix has no generators regardless of its row count
        if generators.ncols() > 0 {
            check_dim("Zonotope::new", n, generators.nrows())?;
        }
        if center.iter().chain(generators.iter()).any(|v| !v.is_finite()) {
            return Err(ReachError::input("zonotope with non-finite entries"));
        }
        Ok(Self::from_parts(center, generators))
    }

    /// Builds from a center and a list of generator vectors.
    pub fn from_generators(center: Vec<f64>, generators: &[Vec<f64>]) -> Result<Self> {
        let n = center.len();
        for g in generators {
            check_dim("Zonotope::from_generators", n, g.len())?;
        }
        let cols: Vec<f64> = generators.iter().flatten().copied().collect();
        Self::new(
            DVector::from_vec(center),
            DMatrix::from_vec(n, generators.len(), cols),
        )
    }

    pub fn point(p: DVector<f64>) -> Result<Self> {
        let n = p.len();
        Self::new(p, DMatrix::zeros(n, 0))
    }

    /// 1-D interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Ok(Hyperrectangle::from_bounds(&[lo], &[hi])?.to_zonotope())
    }

    pub fn zero(n: usize) -> Self {
        Self::from_parts(DVector::zeros(n), DMatrix::zeros(n, 0))
    }

    // skips validation; callers guarantee consistent, finite data
    pub(crate) fn from_parts(center: DVector<f64>, generators: DMatrix<f64>) -> Self {
        let n = center.len();
        let keep: Vec<usize> = (0..generators.ncols())
            .filter(|&j| generators.column(j).iter().any(|&v| v != 0.0))
            .collect();
        let generators = if keep.len() == generators.ncols() {
            generators
        } else {
            generators.select_columns(keep.iter())
        };
        let generators = if generators.ncols() == 0 {
            DMatrix::zeros(n, 0)
        } else {
            generators
        };
        Self { center, generators }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    /// Number of generators divided by the dimension.
    pub fn order(&self) -> f64 {
        self.num_generators() as f64 / self.dim() as f64
    }

    pub fn is_point(&self) -> bool {
        self.num_generators() == 0
    }

    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        check_dim("minkowski_sum", self.dim(), other.dim())?;
        let n = self.dim();
        let (p, q) = (self.num_generators(), other.num_generators());
        let mut g = DMatrix::zeros(n, p + q);
        g.columns_mut(0, p).copy_from(&self.generators);
        g.columns_mut(p, q).copy_from(&other.generators);
        Ok(Self::from_parts(&self.center + &other.center, g))
    }

    /// Image under the linear map `m` (which may change the dimension).
    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<Zonotope> {
        check_dim("linear_map", self.dim(), m.ncols())?;
        let g = if self.is_point() {
            DMatrix::zeros(m.nrows(), 0)
        } else {
            m * &self.generators
        };
        Ok(Self::from_parts(m * &self.center, g))
    }

    pub fn affine_map(&self, map: &AffineMap) -> Result<Zonotope> {
        check_dim("affine_map", self.dim(), map.dim())?;
        let mut z = self.linear_map(map.matrix())?;
        z.center += map.offset();
        Ok(z)
    }

    pub fn translate(&self, v: &DVector<f64>) -> Result<Zonotope> {
        check_dim("translate", self.dim(), v.len())?;
        Ok(Self {
            center: &self.center + v,
            generators: self.generators.clone(),
        })
    }

    pub fn scale(&self, s: f64) -> Zonotope {
        Self::from_parts(&self.center * s, &self.generators * s)
    }

    /// Sound enclosure of `{A z : A ∈ im, z ∈ self}` using midpoint-radius
    /// inflation: `mid·Z ⊕ box(rad·(|c| + Σ|g|))`.
    pub fn interval_matrix_map(&self, im: &IntervalMatrix) -> Result<Zonotope> {
        check_dim("interval_matrix_map", self.dim(), im.dim())?;
        let mapped = self.linear_map(im.midpoint())?;
        if im.is_scalar() {
            return Ok(mapped);
        }
        let magnitude = self.abs_bound();
        let inflation = im.radius() * magnitude;
        let n = self.dim();
        let p = mapped.num_generators();
        let mut g = DMatrix::zeros(n, p + n);
        g.columns_mut(0, p).copy_from(&mapped.generators);
        for j in 0..n {
            g[(j, p + j)] = inflation[j];
        }
        Ok(Self::from_parts(mapped.center, g))
    }

    /// Entrywise `|c| + Σ|gᵢ|`, the radius of the symmetric box `□(Z)`.
    pub fn abs_bound(&self) -> DVector<f64> {
        let mut v = self.center.abs();
        for col in self.generators.column_iter() {
            for (acc, x) in v.iter_mut().zip(col.iter()) {
                *acc += x.abs();
            }
        }
        v
    }

    /// `max_{z ∈ Z} dirᵀz`.
    pub fn support(&self, dir: &DVector<f64>) -> Result<f64> {
        check_dim("support", self.dim(), dir.len())?;
        Ok(self.support_unchecked(dir.as_slice()))
    }

    pub(crate) fn support_unchecked(&self, dir: &[f64]) -> f64 {
        let n = self.dim();
        let c: f64 = self.center.iter().zip(dir).map(|(a, b)| a * b).sum();
        let g = self.generators.as_slice();
        let mut acc = 0.0;
        for col in g.chunks_exact(n) {
            let dot: f64 = col.iter().zip(dir).map(|(a, b)| a * b).sum();
            acc += dot.abs();
        }
        c + acc
    }

    /// Radius of the projection onto axis `j`, i.e. `Σᵢ |gᵢⱼ|`.
    pub fn axis_radius(&self, j: usize) -> f64 {
        self.generators.row(j).iter().map(|v| v.abs()).sum()
    }

    /// `(min, max)` of coordinate `j` over the set.
    pub fn axis_bounds(&self, j: usize) -> (f64, f64) {
        let r = self.axis_radius(j);
        (self.center[j] - r, self.center[j] + r)
    }

    /// `support(dir) + support(-dir)`.
    pub fn width(&self, dir: &DVector<f64>) -> Result<f64> {
        check_dim("width", self.dim(), dir.len())?;
        let spread: f64 = self
            .generators
            .column_iter()
            .map(|g| g.dot(dir).abs())
            .sum();
        Ok(2.0 * spread)
    }

    /// Tightest axis-aligned box containing the zonotope.
    pub fn interval_hull(&self) -> Hyperrectangle {
        let radius = DVector::from_iterator(self.dim(), (0..self.dim()).map(|j| self.axis_radius(j)));
        Hyperrectangle::new_unchecked(self.center.clone(), radius)
    }

    /// Order reduction: the generators with the smallest
    /// `‖g‖₁ − ‖g‖∞` are replaced by their box enclosure so that the result has
    /// order at most `max_order`. The result always contains `self`.
    pub fn reduce_order(&self, max_order: f64) -> Result<Zonotope> {
        if max_order.is_nan() || max_order < 1.0 {
            return Err(ReachError::input(format!(
                "max_order must be >= 1, got {max_order}"
            )));
        }
        let n = self.dim();
        let p = self.num_generators();
        if (p as f64) <= max_order * n as f64 {
            return Ok(self.clone());
        }
        let budget = (max_order * n as f64).floor() as usize;
        let keep = budget.saturating_sub(n);

        let mut ranked: Vec<(f64, usize)> = self
            .generators
            .column_iter()
            .enumerate()
            .map(|(i, g)| {
                let l1: f64 = g.iter().map(|v| v.abs()).sum();
                let linf = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                (l1 - linf, i)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        let split = p - keep;

        let mut boxed = DVector::zeros(n);
        for &(_, i) in &ranked[..split] {
            for (acc, v) in boxed.iter_mut().zip(self.generators.column(i).iter()) {
                *acc += v.abs();
            }
        }
        let mut g = DMatrix::zeros(n, keep + n);
        for (slot, &(_, i)) in ranked[split..].iter().enumerate() {
            g.set_column(slot, &self.generators.column(i));
        }
        for j in 0..n {
            g[(j, keep + j)] = boxed[j];
        }
        Ok(Self::from_parts(self.center.clone(), g))
    }

    /// Exact membership test up to [`CONTAINMENT_TOL`].
    pub fn contains_point(&self, p: &DVector<f64>) -> Result<bool> {
        self.contains_point_tol(p, CONTAINMENT_TOL)
    }

    /// Membership with coefficient slack: decides whether `p = c + Gξ` for some
    /// `‖ξ‖∞ ≤ 1 + tol` (a small absolute slack proportional to the set's
    /// magnitude is also granted on each coordinate).
    pub fn contains_point_tol(&self, p: &DVector<f64>, tol: f64) -> Result<bool> {
        check_dim("contains_point", self.dim(), p.len())?;
        Ok(containment::contains(self, p, tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn z(c: &[f64], gens: &[&[f64]]) -> Zonotope {
        let gens: Vec<Vec<f64>> = gens.iter().map(|g| g.to_vec()).collect();
        Zonotope::from_generators(c.to_vec(), &gens).unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    // brute-force support over all sign vectors
    fn vertex_support(z: &Zonotope, dir: &DVector<f64>) -> f64 {
        let p = z.num_generators();
        (0..1u32 << p)
            .map(|mask| {
                let mut x = z.center().clone();
                for i in 0..p {
                    let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    x += z.generators().column(i) * s;
                }
                dir.dot(&x)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn zonotope_strategy(n: usize, max_gens: usize) -> impl Strategy<Value = Zonotope> {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), 0..=max_gens),
        )
            .prop_map(|(c, g)| Zonotope::from_generators(c, &g).unwrap())
    }

    #[test]
    fn minkowski_sum_concatenates() {
        let s = z(&[1.0, 0.0], &[&[1.0, 0.0]])
            .minkowski_sum(&z(&[0.0, 1.0], &[&[0.0, 2.0]]))
            .unwrap();
        assert_eq!(s, z(&[1.0, 1.0], &[&[1.0, 0.0], &[0.0, 2.0]]));
    }

    #[test]
    fn minkowski_sum_with_origin_is_identity() {
        let a = z(&[1.0, -2.0], &[&[1.0, 3.0], &[0.5, 0.0]]);
        assert_eq!(a.minkowski_sum(&Zonotope::zero(2)).unwrap(), a);
    }

    #[test]
    fn minkowski_sum_of_intervals() {
        let s = Zonotope::interval(-1.0, 1.0)
            .unwrap()
            .minkowski_sum(&Zonotope::interval(2.0, 4.0).unwrap())
            .unwrap();
        assert_eq!(s.axis_bounds(0), (1.0, 5.0));
    }

    #[test]
    fn minkowski_sum_rejects_dimension_mismatch() {
        assert!(Zonotope::zero(2).minkowski_sum(&Zonotope::zero(3)).is_err());
    }

    #[test]
    fn scalar_affine_map() {
        let m = AffineMap::linear(DMatrix::from_element(1, 1, 2.0)).unwrap();
        let out = z(&[3.6788], &[&[0.1934]]).affine_map(&m).unwrap();
        assert_relative_eq!(out.center()[0], 7.3576, epsilon = 1e-12);
        assert_relative_eq!(out.generators()[(0, 0)], 0.3868, epsilon = 1e-12);
    }

    #[test]
    fn identity_map_is_identity() {
        let a = z(&[1.0, 2.0], &[&[1.0, -1.0]]);
        assert_eq!(a.affine_map(&AffineMap::identity(2)).unwrap(), a);
    }

    #[test]
    fn interval_matrix_map_of_point() {
        let im = IntervalMatrix::from_bounds(
            &DMatrix::from_element(1, 1, -1.01),
            &DMatrix::from_element(1, 1, -0.99),
        )
        .unwrap();
        let out = Zonotope::interval(10.0, 10.0).unwrap().interval_matrix_map(&im).unwrap();
        let (lo, hi) = out.axis_bounds(0);
        assert_relative_eq!(lo, -10.1, epsilon = 1e-12);
        assert_relative_eq!(hi, -9.9, epsilon = 1e-12);
        assert_eq!(out.num_generators(), 1);
    }

    #[test]
    fn degenerate_interval_matrix_map_matches_linear_map() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let zz = z(&[1.0, 1.0], &[&[1.0, 0.5]]);
        let im = IntervalMatrix::from_scalar(a.clone()).unwrap();
        assert_eq!(zz.interval_matrix_map(&im).unwrap(), zz.linear_map(&a).unwrap());
    }

    #[test]
    fn support_examples() {
        let unit = Hyperrectangle::from_bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap().to_zonotope();
        assert_eq!(unit.support(&v(&[1.0, 1.0])).unwrap(), 2.0);
        let p = Zonotope::point(v(&[3.0, -4.0])).unwrap();
        assert_eq!(p.support(&v(&[0.5, 2.0])).unwrap(), 1.5 - 8.0);
        let zz = z(&[1.0, 1.0], &[&[1.0, 0.0], &[0.0, 2.0]]);
        let dir = v(&[1.0, -1.0]);
        assert_eq!(zz.support(&dir).unwrap(), 3.0);
        assert_eq!(vertex_support(&zz, &dir), 3.0);
    }

    #[test]
    fn reduce_order_keeps_low_order_sets() {
        let a = z(&[0.0, 0.0], &[&[1.0, 2.0], &[0.0, 1.0]]);
        assert_eq!(a.reduce_order(1.0).unwrap(), a);
    }

    #[test]
    fn reduce_order_in_one_dimension_is_the_hull() {
        let a = z(&[0.0], &[&[1.0], &[2.0], &[3.0]]);
        let r = a.reduce_order(1.0).unwrap();
        assert_eq!(r.num_generators(), 1);
        assert_eq!(r.generators()[(0, 0)], 6.0);
    }

    #[test]
    fn reduce_order_rejects_bad_order() {
        assert!(Zonotope::zero(1).reduce_order(0.5).is_err());
        assert!(Zonotope::zero(1).reduce_order(f64::NAN).is_err());
    }

    #[test]
    fn interval_hull_examples() {
        assert_eq!(Zonotope::zero(2).interval_hull().radius(), &v(&[0.0, 0.0]));
        assert_eq!(z(&[0.0, 0.0], &[&[1.0, 1.0]]).interval_hull().radius(), &v(&[1.0, 1.0]));
    }

    #[test]
    fn zero_generators_are_dropped() {
        let a = z(&[0.0, 0.0], &[&[0.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(a.num_generators(), 1);
        assert_eq!(a.order(), 0.5);
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(Zonotope::from_generators(vec![f64::NAN], &[]).is_err());
        assert!(Zonotope::from_generators(vec![0.0], &[vec![f64::INFINITY]]).is_err());
        assert!(Zonotope::from_generators(vec![], &[]).is_err());
    }

    #[test]
    fn containment_examples() {
        let a = z(&[1.0, 2.0], &[&[1.0, 1.0], &[-1.0, 2.0], &[0.5, 0.0]]);
        assert!(a.contains_point(a.center()).unwrap());
        let i = Zonotope::interval(9.048, 10.0).unwrap();
        assert!(!i.contains_point(&v(&[10.001])).unwrap());
        assert!(i.contains_point(&v(&[10.0])).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn support_matches_vertex_enumeration(zz in zonotope_strategy(3, 6), d in prop::collection::vec(-1.0..1.0f64, 3)) {
            let d = v(&d);
            let s = zz.support(&d).unwrap();
            prop_assert!((s - vertex_support(&zz, &d)).abs() <= 1e-9 * (1.0 + s.abs()));
        }

        #[test]
        fn minkowski_sum_commutes(a in zonotope_strategy(3, 4), b in zonotope_strategy(3, 4), d in prop::collection::vec(-1.0..1.0f64, 3)) {
            let d = v(&d);
            let ab = a.minkowski_sum(&b).unwrap().support(&d).unwrap();
            let ba = b.minkowski_sum(&a).unwrap().support(&d).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
        }

        #[test]
        fn affine_map_distributes(a in zonotope_strategy(2, 3), b in zonotope_strategy(2, 3), m in prop::collection::vec(-2.0..2.0f64, 4), d in prop::collection::vec(-1.0..1.0f64, 2)) {
            let m = DMatrix::from_vec(2, 2, m);
            let d = v(&d);
            let lhs = a.minkowski_sum(&b).unwrap().linear_map(&m).unwrap().support(&d).unwrap();
            let rhs = a.linear_map(&m).unwrap().minkowski_sum(&b.linear_map(&m).unwrap()).unwrap().support(&d).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn reduction_never_shrinks(zz in zonotope_strategy(3, 12), q in 1.0..3.0f64, d in prop::collection::vec(-1.0..1.0f64, 3)) {
            let r = zz.reduce_order(q).unwrap();
            prop_assert!(r.order() <= q + 1e-12);
            let d = v(&d);
            prop_assert!(r.support(&d).unwrap() >= zz.support(&d).unwrap() - 1e-9);
        }

        #[test]
        fn hull_radius_from_supports(zz in zonotope_strategy(3, 5)) {
            let hull = zz.interval_hull();
            for j in 0..3 {
                let mut e = DVector::zeros(3);
                e[j] = 1.0;
                let up = zz.support(&e).unwrap();
                let down = -zz.support(&(-&e)).unwrap();
                prop_assert!((hull.radius()[j] - 0.5 * (up - down)).abs() <= 1e-9);
                prop_assert!(zz.width(&e).unwrap() >= 0.0);
            }
        }

        #[test]
        fn interval_matrix_map_is_sound(
            zz in zonotope_strategy(2, 3),
            mid in prop::collection::vec(-2.0..2.0f64, 4),
            rad in prop::collection::vec(0.0..0.5f64, 4),
            picks in prop::collection::vec((prop::collection::vec(-1.0..1.0f64, 4), prop::collection::vec(-1.0..1.0f64, 3)), 16),
        ) {
            let im = IntervalMatrix::new(DMatrix::from_vec(2, 2, mid), DMatrix::from_vec(2, 2, rad)).unwrap();
            let out = zz.interval_matrix_map(&im).unwrap();
            for (a, xi) in picks {
                let a = im.midpoint() + im.radius().component_mul(&DMatrix::from_vec(2, 2, a));
                let mut x = zz.center().clone();
                for (i, g) in zz.generators().column_iter().enumerate() {
                    x += g * xi[i];
                }
                prop_assert!(out.contains_point(&(a * x)).unwrap());
            }
        }
    }
}
