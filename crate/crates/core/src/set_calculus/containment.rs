use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use super::Zonotope;

// Facet enumeration is used up to this many candidate normals; beyond it the
// LP is cheaper.
const MAX_FACET_NORMALS: usize = 20_000;

/// Decides `p ∈ Z` with relative slack `tol`.
///
/// Cheap exits first (box hull, points, 1-D, square invertible generator
/// matrix). Otherwise the problem is moved into the span of the generators,
/// where the zonotope is full-dimensional, and `p` is tested against every
/// facet normal `ℓ`: `|ℓᵀ(p − c)| ≤ Σ|ℓᵀgᵢ|`. Large generator counts fall
/// back to an LP feasibility problem.
pub(super) fn contains(z: &Zonotope, p: &DVector<f64>, tol: f64) -> bool {
    let n = z.dim();
    let c = z.center();
    let g = z.generators();
    let d = p - c;

    let radius: Vec<f64> = (0..n).map(|j| z.axis_radius(j)).collect();
    let slack: Vec<f64> = (0..n)
        .map(|j| (tol * (c[j].abs() + radius[j])).max(f64::MIN_POSITIVE))
        .collect();

    for j in 0..n {
        if d[j].abs() > radius[j] * (1.0 + tol) + slack[j] {
            return false;
        }
    }
    if z.is_point() || n == 1 {
        return true;
    }

    let bound = 1.0 + tol;
    if g.ncols() == n {
        if let Some(xi) = g.clone().lu().solve(&d) {
            if xi.iter().all(|v| v.abs() <= bound) {
                return true;
            }
        }
    }

    let svd = g.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let s_max = svd.singular_values.max();
    let basis: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-12 * s_max)
        .collect();
    let r = basis.len();
    let ur = DMatrix::from_fn(n, r, |i, k| u[(i, basis[k])]);

    // the component of p − c outside the span must vanish up to the slack
    let dr = ur.transpose() * &d;
    let residual = &d - &ur * &dr;
    if (0..n).any(|j| residual[j].abs() > slack[j]) {
        return false;
    }
    let gr = ur.transpose() * g;
    let slack_norm = slack.iter().map(|s| s * s).sum::<f64>().sqrt();

    let candidates = binomial(gr.ncols(), r - 1);
    if candidates.is_some_and(|k| k <= MAX_FACET_NORMALS) {
        facets_contain(&gr, &dr, tol, slack_norm)
    } else {
        lp_contains(&gr, &dr, tol, slack_norm)
    }
}

fn binomial(m: usize, k: usize) -> Option<usize> {
    if k > m {
        return Some(0);
    }
    let k = k.min(m - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(m - i)? / (i + 1);
    }
    Some(acc)
}

fn facets_contain(g: &DMatrix<f64>, d: &DVector<f64>, tol: f64, slack: f64) -> bool {
    let r = g.nrows();
    let m = g.ncols();
    let within = |l: &DVector<f64>| {
        let reach: f64 = g.column_iter().map(|col| l.dot(&col).abs()).sum();
        l.dot(d).abs() <= reach * (1.0 + tol) + l.norm() * slack
    };
    if r == 1 {
        return within(&DVector::from_element(1, 1.0));
    }
    let scale = g.column_iter().map(|col| col.norm()).fold(0.0, f64::max);
    let mut subset: Vec<usize> = (0..r - 1).collect();
    loop {
        let cols = DMatrix::from_fn(r, r - 1, |i, k| g[(i, subset[k])] / scale);
        let normal = cross_normal(&cols);
        if normal.norm() > 1e-10 && !within(&normal) {
            return false;
        }
        // next (r−1)-subset of 0..m in lexicographic order
        let mut pos = r - 1;
        loop {
            if pos == 0 {
                return true;
            }
            pos -= 1;
            if subset[pos] < m - (r - 1) + pos {
                subset[pos] += 1;
                for k in pos + 1..r - 1 {
                    subset[k] = subset[k - 1] + 1;
                }
                break;
            }
        }
    }
}

// Generalized cross product of the columns of an r×(r−1) matrix.
fn cross_normal(cols: &DMatrix<f64>) -> DVector<f64> {
    let r = cols.nrows();
    DVector::from_fn(r, |i, _| {
        let minor = cols.clone().remove_row(i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

fn lp_contains(g: &DMatrix<f64>, d: &DVector<f64>, tol: f64, slack: f64) -> bool {
    let bound = 1.0 + tol;
    let solve = || {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let xi: Vec<_> = (0..g.ncols()).map(|_| lp.add_var(0.0, (-bound, bound))).collect();
        for j in 0..g.nrows() {
            let row = g.row(j);
            let scale = row.iter().fold(slack, |m, v| m.max(v.abs()));
            let e = lp.add_var(0.0, (-slack / scale, slack / scale));
            let mut terms: Vec<_> = xi
                .iter()
                .zip(row.iter())
                .filter(|(_, &coef)| coef != 0.0)
                .map(|(&v, &coef)| (v, coef / scale))
                .collect();
            terms.push((e, 1.0));
            lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, d[j] / scale);
        }
        lp.solve().is_ok()
    };
    // the solver can panic on numerically singular bases; a panic is treated
    // as "not shown to be contained"
    std::panic::catch_unwind(solve).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), Some(10));
        assert_eq!(binomial(4, 0), Some(1));
        assert_eq!(binomial(3, 4), Some(0));
        assert_eq!(binomial(usize::MAX, 3), None);
    }

    #[test]
    fn cross_normal_is_orthogonal() {
        let cols = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(cross_normal(&cols), v(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn flat_zonotope_rejects_off_plane_points() {
        // a parallelogram in the plane z = 0 of R^3
        let z = Zonotope::from_generators(vec![0.0; 3], &[vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]]).unwrap();
        assert!(contains(&z, &v(&[1.5, 0.5, 0.0]), 1e-9));
        assert!(!contains(&z, &v(&[0.5, 0.5, 0.1]), 1e-9));
        assert!(!contains(&z, &v(&[-1.5, 0.8, 0.0]), 1e-9));
    }

    #[test]
    fn corner_cut_of_a_hexagon() {
        let z = Zonotope::from_generators(vec![0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        // inside the bounding box [-2, 2]^2 but beyond the facet x − y ≤ 2
        assert!(!contains(&z, &v(&[1.9, -1.0]), 1e-9));
        assert!(contains(&z, &v(&[2.0, 1.0]), 1e-9));
    }

    #[test]
    fn lp_agrees_on_a_square() {
        let g = DMatrix::identity(2, 2);
        assert!(lp_contains(&g, &v(&[0.5, -1.0]), 1e-9, 0.0));
        assert!(!lp_contains(&g, &v(&[0.5, -1.1]), 1e-9, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn agrees_with_support_function(
            c in prop::collection::vec(-5.0..5.0f64, 3),
            g in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 3), 1..7),
            p in prop::collection::vec(-8.0..8.0f64, 3),
            dirs in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 16),
        ) {
            let z = Zonotope::from_generators(c, &g).unwrap();
            let p = v(&p);
            if contains(&z, &p, 1e-9) {
                for d in dirs {
                    let d = v(&d);
                    let s = z.support(&d).unwrap();
                    prop_assert!(d.dot(&p) <= s + 1e-6 * (1.0 + s.abs()));
                }
            }
        }

        #[test]
        fn generated_points_are_contained(
            c in prop::collection::vec(-5.0..5.0f64, 4),
            g in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 4), 1..9),
            xi in prop::collection::vec(-1.0..1.0f64, 9),
        ) {
            let z = Zonotope::from_generators(c, &g).unwrap();
            let mut p = z.center().clone();
            for (i, col) in z.generators().column_iter().enumerate() {
                p += col * xi[i];
            }
            prop_assert!(contains(&z, &p, 1e-9));
            let lp = lp_contains(z.generators(), &(&p - z.center()), 1e-6, 1e-9);
            prop_assert!(lp);
        }
    }
}
