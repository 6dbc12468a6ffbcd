//! Single-location periodic hybrid systems and the bundled model builders.
//!
//! The clock is not part of the state vector: the engine tracks it through
//! flowpipe time stamps only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::Dynamics;
use crate::error::{check_dim, ReachError, Result};
use crate::set_calculus::{AffineMap, IntervalMatrix, Zonotope};

/// Jitter window `[lo, hi]` (seconds) around each nominal switching instant,
/// with `lo ≤ 0 ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub lo: f64,
    pub hi: f64,
}

impl Jitter {
    pub const NONE: Jitter = Jitter { lo: 0.0, hi: 0.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= 0.0 && 0.0 <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(ReachError::input(format!(
                "jitter window must satisfy lo <= 0 <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(z: f64) -> Result<Self> {
        Self::new(-z, z)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_deterministic(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }
}

/// Linear system with one location and a clock-triggered self-loop: the
/// transition is enabled during `[k·T + ζ₋, k·T + ζ₊]` and applies `reset`.
#[derive(Debug, Clone)]
pub struct PeriodicHybridSystem {
    pub dynamics: Dynamics,
    pub input_matrix: DMatrix<f64>,
    pub input_set: Zonotope,
    pub reset: AffineMap,
    pub t_sample: f64,
    pub zeta: Jitter,
    pub x0_set: Zonotope,
    pub horizon: f64,
    pub variable_names: Vec<String>,
}

impl PeriodicHybridSystem {
    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(ReachError::input("system of dimension zero"));
        }
        check_dim("system (B rows)", n, self.input_matrix.nrows())?;
        check_dim("system (U)", self.input_matrix.ncols(), self.input_set.dim())?;
        check_dim("system (reset)", n, self.reset.dim())?;
        check_dim("system (X0)", n, self.x0_set.dim())?;
        check_dim("system (variable names)", n, self.variable_names.len())?;
        if !(self.t_sample > 0.0) || !self.t_sample.is_finite() {
            return Err(ReachError::input(format!("t_sample must be > 0, got {}", self.t_sample)));
        }
        Jitter::new(self.zeta.lo, self.zeta.hi)?;
        if !(self.t_sample + self.zeta.lo > 0.0) {
            return Err(ReachError::input("t_sample + ζ₋ must be > 0"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(ReachError::input(format!("horizon must be > 0, got {}", self.horizon)));
        }
        Ok(())
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variable_names.iter().position(|v| v == name)
    }
}

/// The running example: `ẋ = −x`, reset `x' := 2x`.
pub fn build_simple(x0_value: f64, t_sample: f64, zeta: Jitter, horizon: f64) -> Result<PeriodicHybridSystem> {
    let phs = PeriodicHybridSystem {
        dynamics: Dynamics::Scalar(DMatrix::from_element(1, 1, -1.0)),
        input_matrix: DMatrix::zeros(1, 1),
        input_set: Zonotope::zero(1),
        reset: AffineMap::linear(DMatrix::from_element(1, 1, 2.0))?,
        t_sample,
        zeta,
        x0_set: Zonotope::point(DVector::from_element(1, x0_value))?,
        horizon,
        variable_names: vec!["x".into()],
    };
    phs.validate()?;
    Ok(phs)
}

/// Physical and controller constants of the electro-mechanical brake.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbParams {
    /// Electrical resistance [Ω].
    pub r: f64,
    /// Inductance [H].
    pub l: f64,
    /// Motor constant [V·s].
    pub k: f64,
    /// Gear ratio.
    pub i: f64,
    /// Rotational friction [N·m·s].
    pub d_rot: f64,
    pub k_p: f64,
    pub k_i: f64,
    /// Disk position [m].
    pub x0: f64,
    pub t_sample: f64,
    pub zeta: Jitter,
    pub horizon: f64,
}

/// Parameter variation applied to a model's flow matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Variation {
    None,
    /// Interval of total `width` around the nominal value of the model's
    /// designated coefficient.
    Pv1 { width: f64 },
    /// Every physical parameter varies by `±chi` (relative).
    Pv2 { chi: f64 },
}

impl EmbParams {
    fn physical(&self) -> [f64; 7] {
        [self.r, self.l, self.k, self.i, self.d_rot, self.k_p, self.k_i]
    }

    fn with_physical(&self, p: [f64; 7]) -> Self {
        Self {
            r: p[0],
            l: p[1],
            k: p[2],
            i: p[3],
            d_rot: p[4],
            k_p: p[5],
            k_i: p[6],
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let names = ["R", "L", "K", "i", "d_rot", "K_P", "K_I"];
        for (name, v) in names.iter().zip(self.physical()) {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ReachError::input(format!("EMB parameter {name} must be > 0, got {v}")));
            }
        }
        if !(self.x0 > 0.0) {
            return Err(ReachError::input("EMB disk position x0 must be > 0"));
        }
        Ok(())
    }

    /// Flow matrix over the state `(I, x, x_e, x_c)`.
    pub fn flow_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 0)] = -(self.r + self.k * self.k / self.d_rot) / self.l;
        a[(0, 2)] = self.k_p / self.l;
        a[(0, 3)] = self.k_i / self.l;
        a[(1, 0)] = self.k / (self.i * self.d_rot);
        a
    }

    /// Row vector mapping the state to the caliper velocity `K/(i·d_rot)·I`.
    pub fn velocity_row(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.k / (self.i * self.d_rot), 0.0, 0.0, 0.0])
    }

    /// Sampling reset `x_e' = x₀ − x`, `x_c' = x_c + T·(x₀ − x)`.
    pub fn reset_map(&self) -> AffineMap {
        let t = self.t_sample;
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, -1.0, 0.0, 0.0, //
                0.0, -t, 0.0, 1.0,
            ],
        );
        let b = DVector::from_vec(vec![0.0, 0.0, self.x0, t * self.x0]);
        AffineMap::new(m, b).expect("4x4 reset")
    }

    /// Nominal-centered interval enclosure of the flow matrix when every
    /// physical parameter ranges over `±chi` of its nominal value.
    pub fn pv2_matrix(&self, chi: f64) -> Result<IntervalMatrix> {
        if !(chi >= 0.0 && chi < 1.0) {
            return Err(ReachError::input(format!("pv2 fraction must be in [0, 1), got {chi}")));
        }
        let nominal = self.flow_matrix();
        let mut rad: DMatrix<f64> = DMatrix::zeros(4, 4);
        let base = self.physical();
        for corner in 0..(1u32 << 7) {
            let mut p = base;
            for (bit, v) in p.iter_mut().enumerate() {
                let sign = if corner >> bit & 1 == 1 { 1.0 } else { -1.0 };
                *v *= 1.0 + sign * chi;
            }
            let a = self.with_physical(p).flow_matrix();
            rad.zip_apply(&(a - &nominal), |r: &mut f64, d: f64| *r = r.max(d.abs()));
        }
        IntervalMatrix::new(nominal, rad)
    }
}

pub const EMB_VARIABLES: [&str; 4] = ["I", "x", "x_e", "x_c"];

/// Index of the coefficient varied by [`Variation::Pv1`] in the EMB model
/// (`ẋ = K/(i·d_rot)·I`).
pub const EMB_PV1_ENTRY: (usize, usize) = (1, 0);

/// The brake plant with sampled PI controller, starting at rest from the
/// zero state; the controller picks up `x₀ − x` at the first sample.
pub fn build_emb(p: &EmbParams, variation: Variation) -> Result<PeriodicHybridSystem> {
    p.validate()?;
    let nominal = p.flow_matrix();
    let dynamics = match variation {
        Variation::None => Dynamics::Scalar(nominal),
        Variation::Pv1 { width } => {
            if !(width > 0.0) || !width.is_finite() {
                return Err(ReachError::input(format!("pv1 width must be > 0, got {width}")));
            }
            let (r, c) = EMB_PV1_ENTRY;
            let v = nominal[(r, c)];
            let im = IntervalMatrix::from_scalar(nominal)?.with_entry(r, c, v - 0.5 * width, v + 0.5 * width)?;
            Dynamics::Interval(im)
        }
        Variation::Pv2 { chi } => Dynamics::Interval(p.pv2_matrix(chi)?),
    };
    let phs = PeriodicHybridSystem {
        dynamics,
        input_matrix: DMatrix::zeros(4, 1),
        input_set: Zonotope::zero(1),
        reset: p.reset_map(),
        t_sample: p.t_sample,
        zeta: p.zeta,
        x0_set: Zonotope::point(DVector::zeros(4))?,
        horizon: p.horizon,
        variable_names: EMB_VARIABLES.iter().map(|s| s.to_string()).collect(),
    };
    phs.validate()?;
    Ok(phs)
}

// Midpoint-radius storage rounds; widen outward until [lo, hi] is covered so
// that neighbouring parts overlap instead of leaving a gap.
fn covering_entry(im: &IntervalMatrix, row: usize, col: usize, lo: f64, hi: f64) -> Result<IntervalMatrix> {
    let (mut l, mut h) = (lo, hi);
    loop {
        let out = im.with_entry(row, col, l, h)?;
        let (got_lo, got_hi) = out.entry(row, col);
        if got_lo <= lo && got_hi >= hi {
            return Ok(out);
        }
        if got_lo > lo {
            l = l.next_down();
        }
        if got_hi < hi {
            h = h.next_up();
        }
    }
}

/// Splits the interval entry `entry` of parametric dynamics into `parts`
/// contiguous sub-intervals of equal width.
pub fn split_parametric(
    phs: &PeriodicHybridSystem,
    parts: usize,
    entry: (usize, usize),
) -> Result<Vec<PeriodicHybridSystem>> {
    if parts == 0 {
        return Err(ReachError::input("split into zero parts"));
    }
    let Dynamics::Interval(im) = &phs.dynamics else {
        return Err(ReachError::input("splitting requires interval dynamics"));
    };
    let (row, col) = entry;
    if row >= im.dim() || col >= im.dim() {
        return Err(ReachError::input(format!("entry ({row}, {col}) out of range")));
    }
    let (lo, hi) = im.entry(row, col);
    if hi <= lo {
        return Err(ReachError::input(format!(
            "entry ({row}, {col}) has zero radius; nothing to split"
        )));
    }
    if parts == 1 {
        return Ok(vec![phs.clone()]);
    }
    let bound = |j: usize| {
        if j == parts {
            hi
        } else {
            lo + (hi - lo) * j as f64 / parts as f64
        }
    };
    (0..parts)
        .map(|j| {
            let mut sub = phs.clone();
            sub.dynamics = Dynamics::Interval(covering_entry(im, row, col, bound(j), bound(j + 1))?);
            Ok(sub)
        })
        .collect()
}
