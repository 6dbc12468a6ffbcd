//! Time discretization of `ẋ = Ax + Bu`: scalar and interval matrix
//! exponentials, the first-step set `Ω₀ ⊇ flowpipe over [0, δ]` and the
//! per-step input effect `𝒱`.
//!
//! The bloating follows the forward first-order scheme: for `t ∈ [0, δ]` and
//! `λ = t/δ`,
//!
//! ```text
//! x(t) ∈ (1−λ)·x₀ + λ·(Φx₀ + δ·Bu + E⁺ + E_ψ)
//! E⁺  = □(Φ₂(|A|, δ) · □(A² X₀))
//! E_ψ = □(Φ₂(|A|, δ) · □(A B 𝒰))
//! ```
//!
//! with `Φ₂(M, δ) = Σ_{i≥0} δ^{i+2} M^i / (i+2)!` and `□` the symmetric box hull.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, ReachError, Result};
use crate::set_calculus::{cluster_union, Hyperrectangle, IntervalMatrix, Zonotope};

/// Flow matrix of a linear system: either a scalar matrix or an interval
/// matrix describing a parametric family.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Scalar(DMatrix<f64>),
    Interval(IntervalMatrix),
}

impl Dynamics {
    pub fn dim(&self) -> usize {
        match self {
            Dynamics::Scalar(a) => a.nrows(),
            Dynamics::Interval(im) => im.dim(),
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, Dynamics::Interval(_))
    }

    pub fn midpoint(&self) -> &DMatrix<f64> {
        match self {
            Dynamics::Scalar(a) => a,
            Dynamics::Interval(im) => im.midpoint(),
        }
    }

    /// The dynamics as an interval matrix (zero radius for scalar dynamics).
    pub fn to_interval(&self) -> IntervalMatrix {
        match self {
            Dynamics::Scalar(a) => IntervalMatrix::from_scalar(a.clone())
                .expect("scalar dynamics are square and finite"),
            Dynamics::Interval(im) => im.clone(),
        }
    }
}

/// Discrete-time propagator `Φ` or an interval enclosure of it.
#[derive(Debug, Clone, PartialEq)]
pub enum Propagator {
    Scalar(DMatrix<f64>),
    Interval(IntervalMatrix),
}

impl Propagator {
    pub fn dim(&self) -> usize {
        match self {
            Propagator::Scalar(m) => m.nrows(),
            Propagator::Interval(im) => im.dim(),
        }
    }

    /// `Φ·Z`, or its sound enclosure for an interval propagator.
    pub fn apply(&self, z: &Zonotope) -> Result<Zonotope> {
        match self {
            Propagator::Scalar(m) => z.linear_map(m),
            Propagator::Interval(im) => z.interval_matrix_map(im),
        }
    }
}

/// Result of discretizing a system for step `delta`.
#[derive(Debug, Clone)]
pub struct DiscretizedSystem {
    pub phi: Propagator,
    pub omega0: Zonotope,
    pub v: Zonotope,
    pub delta: f64,
}

impl DiscretizedSystem {
    pub fn dim(&self) -> usize {
        self.omega0.dim()
    }

    /// `𝒱 = {0}`.
    pub fn is_homogeneous(&self) -> bool {
        self.v.is_point() && self.v.center().iter().all(|&c| c == 0.0)
    }
}

/// Options for [`discretize`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DiscretizeOptions {
    /// Taylor order for interval exponentials. `None` picks the smallest order
    /// (at least [`DEFAULT_TAYLOR_ORDER`]) whose remainder is negligible.
    pub taylor_order: Option<usize>,
}

pub const DEFAULT_TAYLOR_ORDER: usize = 6;
const MAX_TAYLOR_ORDER: usize = 60;
const REMAINDER_TARGET: f64 = 1e-20;

// Padé(13) coefficients and the θ₁₃ threshold of Higham (2005).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// `e^{At}` by scaling and squaring with a degree-13 Padé approximant.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(ReachError::input("matrix exponential of a non-square matrix"));
    }
    if !t.is_finite() || a.iter().any(|v| !v.is_finite()) {
        return Err(ReachError::input("matrix exponential of non-finite data"));
    }
    let n = a.nrows();
    let at = a * t;
    let norm1 = at
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if norm1 == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let s = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let m = at / 2f64.powi(s);

    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let m2 = &m * &m;
    let m4 = &m2 * &m2;
    let m6 = &m4 * &m2;
    let u_inner = &m6 * (&m6 * b[13] + &m4 * b[11] + &m2 * b[9]) + &m6 * b[7] + &m4 * b[5] + &m2 * b[3] + &id * b[1];
    let u = &m * u_inner;
    let v = &m6 * (&m6 * b[12] + &m4 * b[10] + &m2 * b[8]) + &m6 * b[6] + &m4 * b[4] + &m2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| ReachError::Analysis {
            message: "singular Padé denominator in matrix exponential".into(),
            hint: "check the system matrix for extreme scaling".into(),
        })?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// `Φ₁(A, δ) = ∫₀^δ e^{As} ds`, via the exponential of `[[A, I], [0, 0]]·δ`.
pub fn phi1(a: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, n)).fill_with_identity();
    let e = matrix_exponential(&aug, delta)?;
    Ok(e.view((0, n), (n, n)).into_owned())
}

/// `Φ₂(M, δ) = Σ_{i≥0} δ^{i+2} M^i/(i+2)!`, the top-right block of the
/// exponential of `[[M, I, 0], [0, 0, I], [0, 0, 0]]·δ`.
pub fn phi2(m: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut aug = DMatrix::zeros(3 * n, 3 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(m);
    aug.view_mut((0, n), (n, n)).fill_with_identity();
    aug.view_mut((n, 2 * n), (n, n)).fill_with_identity();
    let e = matrix_exponential(&aug, delta)?;
    Ok(e.view((0, 2 * n), (n, n)).into_owned())
}

/// Lagrange remainder bound of the order-`p` Taylor enclosure of `e^{At}`
/// for `‖A‖∞·t = nt`: `nt^{p+1}/(p+1)! · 1/(1 − nt/(p+2))`, or `None` when the
/// geometric bound does not converge.
pub fn exp_remainder_bound(nt: f64, p: usize) -> Option<f64> {
    let ratio = nt / (p as f64 + 2.0);
    if ratio >= 1.0 {
        return None;
    }
    let mut term = 1.0;
    for i in 1..=(p + 1) {
        term *= nt / i as f64;
    }
    Some(term / (1.0 - ratio))
}

/// Smallest order `p ≥ DEFAULT_TAYLOR_ORDER` whose remainder is below
/// `1e-20` (relative to `max(1, ‖A‖∞·t)`).
pub fn auto_taylor_order(nt: f64) -> usize {
    let target = REMAINDER_TARGET * nt.max(1.0);
    (DEFAULT_TAYLOR_ORDER..=MAX_TAYLOR_ORDER)
        .find(|&p| exp_remainder_bound(nt, p).is_some_and(|r| r <= target))
        .unwrap_or(MAX_TAYLOR_ORDER)
}

// Σ_{i=0}^{p} (IM t)^i / i! in interval arithmetic
fn interval_taylor(im: &IntervalMatrix, t: f64, p: usize) -> Result<IntervalMatrix> {
    let scaled = im.scale(t);
    let mut power = IntervalMatrix::identity(im.dim());
    let mut sum = power.clone();
    let mut coef = 1.0;
    for i in 1..=p {
        power = power.mul(&scaled)?;
        coef /= i as f64;
        sum = sum.add(&power.scale(coef))?;
    }
    Ok(sum)
}

/// Interval enclosure of `{e^{At} : A ∈ im}`: interval Taylor sum of order `p`
/// widened entrywise by the uniform remainder bound.
pub fn interval_matrix_exponential(im: &IntervalMatrix, t: f64, p: usize) -> Result<IntervalMatrix> {
    if p < 2 {
        return Err(ReachError::input(format!("Taylor order must be >= 2, got {p}")));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(ReachError::input(format!("invalid time {t}")));
    }
    if t == 0.0 {
        return Ok(IntervalMatrix::identity(im.dim()));
    }
    let nt = im.norm_inf() * t;
    let remainder = exp_remainder_bound(nt, p).ok_or_else(|| ReachError::Analysis {
        message: format!(
            "interval exponential remainder diverges: ‖A‖∞·t = {nt:.3e} >= p + 2 = {}",
            p + 2
        ),
        hint: "reduce the step size δ or raise the Taylor order".into(),
    })?;
    Ok(interval_taylor(im, t, p)?.widen(remainder))
}

fn symmetric_box(radius: DVector<f64>) -> Zonotope {
    let n = radius.len();
    Hyperrectangle::new(DVector::zeros(n), radius)
        .expect("radius from products of nonnegative terms")
        .to_zonotope()
}

/// Computes `Φ`, `Ω₀` and `𝒱` for step `delta`.
pub fn discretize(
    dynamics: &Dynamics,
    b: &DMatrix<f64>,
    u: &Zonotope,
    x0: &Zonotope,
    delta: f64,
    opts: DiscretizeOptions,
) -> Result<DiscretizedSystem> {
    let n = dynamics.dim();
    check_dim("discretize (X0)", n, x0.dim())?;
    check_dim("discretize (B rows)", n, b.nrows())?;
    check_dim("discretize (U)", b.ncols(), u.dim())?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(ReachError::input(format!("step size must be > 0, got {delta}")));
    }

    let bu = u.linear_map(b)?;
    let has_input = !(bu.is_point() && bu.center().iter().all(|&c| c == 0.0));

    let (phi, abs_a, a_sq_x0, a_bu) = match dynamics {
        Dynamics::Scalar(a) => {
            let phi = Propagator::Scalar(matrix_exponential(a, delta)?);
            let a_sq_x0 = x0.linear_map(&(a * a))?;
            let a_bu = bu.linear_map(a)?;
            (phi, a.abs(), a_sq_x0, a_bu)
        }
        Dynamics::Interval(im) => {
            let nt = im.norm_inf() * delta;
            let p = opts.taylor_order.unwrap_or_else(|| auto_taylor_order(nt));
            let phi = Propagator::Interval(interval_matrix_exponential(im, delta, p)?);
            let a_sq_x0 = x0.interval_matrix_map(&im.mul(im)?)?;
            let a_bu = bu.interval_matrix_map(im)?;
            (phi, im.abs_upper(), a_sq_x0, a_bu)
        }
    };

    let phi2_abs = phi2(&abs_a, delta)?;
    let e_plus = symmetric_box(&phi2_abs * a_sq_x0.abs_bound());

    let mut forward = phi.apply(x0)?.minkowski_sum(&e_plus)?;
    let v = if has_input {
        let e_psi = symmetric_box(&phi2_abs * a_bu.abs_bound());
        forward = forward.minkowski_sum(&bu.scale(delta))?.minkowski_sum(&e_psi)?;
        bu.scale(delta).minkowski_sum(&e_psi)?
    } else {
        Zonotope::zero(n)
    };
    let omega0 = cluster_union(&[x0.clone(), forward])?;

    Ok(DiscretizedSystem {
        phi,
        omega0,
        v,
        delta,
    })
}
