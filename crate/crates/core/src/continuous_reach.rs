//! Flowpipe construction for a single continuous phase.

use nalgebra::DMatrix;

use crate::discretization::{matrix_exponential, DiscretizedSystem, Propagator};
use crate::error::{check_dim, ReachError, Result};
use crate::set_calculus::Zonotope;

/// Closed time interval `[lo, hi]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    pub lo: f64,
    pub hi: f64,
}

impl TimeInterval {
    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }
}

/// A set enclosing all states over a time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachSet {
    pub set: Zonotope,
    pub time: TimeInterval,
}

/// Sequence of reach sets over contiguous frames of width `delta`.
///
/// Frame `k` covers `[start + kδ, start + (k+1)δ + slack]`; times are
/// recomputed from the index rather than accumulated. The slack is nonzero
/// when the phase may have begun up to `slack` after `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flowpipe {
    sets: Vec<Zonotope>,
    start: f64,
    delta: f64,
    time_slack: f64,
}

impl Flowpipe {
    pub fn new(sets: Vec<Zonotope>, start: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(ReachError::input(format!("flowpipe step must be > 0, got {delta}")));
        }
        Ok(Self {
            sets,
            start,
            delta,
            time_slack: 0.0,
        })
    }

    /// Widens every frame's upper time bound by `slack`.
    pub fn with_time_slack(mut self, slack: f64) -> Self {
        self.time_slack = slack.max(0.0);
        self
    }

    pub fn time_slack(&self) -> f64 {
        self.time_slack
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    /// Upper time bound of the last frame.
    pub fn end(&self) -> f64 {
        self.start + self.sets.len() as f64 * self.delta + self.time_slack
    }

    pub fn set(&self, k: usize) -> &Zonotope {
        &self.sets[k]
    }

    pub fn sets(&self) -> &[Zonotope] {
        &self.sets
    }

    pub fn last(&self) -> Option<&Zonotope> {
        self.sets.last()
    }

    pub fn time_of(&self, k: usize) -> TimeInterval {
        TimeInterval {
            lo: self.start + k as f64 * self.delta,
            hi: self.start + (k + 1) as f64 * self.delta + self.time_slack,
        }
    }

    pub fn reach_set(&self, k: usize) -> ReachSet {
        ReachSet {
            set: self.sets[k].clone(),
            time: self.time_of(k),
        }
    }

    /// Iterates `(time interval, set)` pairs in order.
    pub fn iter(&self) -> impl Iterator<Item = (TimeInterval, &Zonotope)> + '_ {
        self.sets.iter().enumerate().map(|(k, z)| (self.time_of(k), z))
    }

    /// Indices of frames whose closed time interval contains `t`, up to a
    /// rounding allowance of `1e-9·δ`.
    pub fn frames_at(&self, t: f64) -> impl Iterator<Item = usize> + '_ {
        let eps = 1e-9 * self.delta;
        let rel = (t - self.start) / self.delta;
        let first = ((rel - self.time_slack / self.delta).floor() - 1.0).max(0.0);
        let last = (rel.floor() + 1.0).min(self.sets.len() as f64 - 1.0);
        let range = if first <= last { first as usize..last as usize + 1 } else { 0..0 };
        range.filter(move |&k| {
            let frame = self.time_of(k);
            frame.lo - eps <= t && t <= frame.hi + eps
        })
    }

    /// The same sets translated in time by `t_shift`.
    pub fn shifted(mut self, t_shift: f64) -> Flowpipe {
        self.start += t_shift;
        self
    }

    pub fn into_sets(self) -> Vec<Zonotope> {
        self.sets
    }
}

fn scalar_phi(sys: &DiscretizedSystem) -> Result<&DMatrix<f64>> {
    match &sys.phi {
        Propagator::Scalar(m) => Ok(m),
        Propagator::Interval(_) => Err(ReachError::input(
            "GLGM06 needs a scalar propagator; use ASB07 for interval dynamics",
        )),
    }
}

/// Wrapping-free flowpipe: `X(k) = Φᵏ Ω₀ ⊕ ⊕_{i<k} Φⁱ 𝒱`, with the homogeneous
/// part and the input sum propagated separately by exact linear maps.
pub fn reach_glgm06(sys: &DiscretizedSystem, steps: usize) -> Result<Flowpipe> {
    let phi = scalar_phi(sys)?;
    if steps == 0 {
        return Err(ReachError::input("flowpipe needs at least one step"));
    }
    let homogeneous = sys.is_homogeneous();
    let mut sets = Vec::with_capacity(steps);
    let mut hom = sys.omega0.clone();
    let mut input_sum = Zonotope::zero(sys.dim());
    let mut input_term = sys.v.clone();
    sets.push(hom.clone());
    for _ in 1..steps {
        hom = hom.linear_map(phi)?;
        if homogeneous {
            sets.push(hom.clone());
        } else {
            input_sum = input_sum.minkowski_sum(&input_term)?;
            input_term = input_term.linear_map(phi)?;
            sets.push(hom.minkowski_sum(&input_sum)?);
        }
    }
    Flowpipe::new(sets, 0.0, sys.delta)
}

/// Recursive flowpipe for interval propagators:
/// `X(k) = reduce(Φ X(k−1) ⊕ 𝒱, max_order)`.
pub fn reach_asb07(sys: &DiscretizedSystem, steps: usize, max_order: f64) -> Result<Flowpipe> {
    if max_order.is_nan() || max_order < 1.0 {
        return Err(ReachError::input(format!("max_order must be >= 1, got {max_order}")));
    }
    if steps == 0 {
        return Err(ReachError::input("flowpipe needs at least one step"));
    }
    let homogeneous = sys.is_homogeneous();
    let mut sets = Vec::with_capacity(steps);
    let mut current = sys.omega0.reduce_order(max_order)?;
    sets.push(current.clone());
    for _ in 1..steps {
        let mut next = sys.phi.apply(&current)?;
        if !homogeneous {
            next = next.minkowski_sum(&sys.v)?;
        }
        current = next.reduce_order(max_order)?;
        sets.push(current.clone());
    }
    Flowpipe::new(sets, 0.0, sys.delta)
}

/// Number of whole steps in `t`, if `t` is a multiple of `delta` up to a
/// relative tolerance of `1e-12`.
pub fn step_count(t: f64, delta: f64) -> Option<usize> {
    if t < 0.0 || !(delta > 0.0) {
        return None;
    }
    let r = t / delta;
    let k = r.round();
    ((r - k).abs() <= 1e-12 * r.abs().max(1.0)).then_some(k as usize)
}

/// Time-point successor `e^{At} X₀ ⊕ ⊕_{i=1}^{k} Φ^{i−1} 𝒱` for `t = kδ`;
/// exact for homogeneous systems.
pub fn exact_point_successor(
    a: &DMatrix<f64>,
    x0: &Zonotope,
    t: f64,
    sys: &DiscretizedSystem,
) -> Result<Zonotope> {
    check_dim("exact_point_successor", x0.dim(), a.nrows())?;
    let phi = scalar_phi(sys)?;
    let k = step_count(t, sys.delta).ok_or_else(|| {
        ReachError::input(format!(
            "time {t} is not a multiple of the step {}",
            sys.delta
        ))
    })?;
    if k == 0 {
        return Ok(x0.clone());
    }
    let mut out = x0.linear_map(&matrix_exponential(a, t)?)?;
    if !sys.is_homogeneous() {
        let mut term = sys.v.clone();
        for _ in 0..k {
            out = out.minkowski_sum(&term)?;
            term = term.linear_map(phi)?;
        }
    }
    Ok(out)
}
