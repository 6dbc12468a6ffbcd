//! Periodic time-triggered flowpipe construction.
//!
//! The automaton has one location with a clock-triggered self-loop. Each
//! continuous phase is computed as if it started at time 0; the jump extracts
//! the sets whose frames overlap the switching window, clusters them, applies
//! the reset, and the next phase is shifted to the earliest switching time.

use serde::{Deserialize, Serialize};

use crate::continuous_reach::{exact_point_successor, reach_asb07, reach_glgm06, Flowpipe};
use crate::discretization::{discretize, DiscretizeOptions, DiscretizedSystem, Dynamics};
use crate::error::{ReachError, Result};
use crate::models::{Jitter, PeriodicHybridSystem};
use crate::set_calculus::{cluster_union, AffineMap, Zonotope};

/// Continuous-phase algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Wrapping-free propagation for scalar dynamics.
    Glgm06,
    /// Recursive propagation with interval matrices and order reduction.
    Asb07,
    /// GLGM06 flowpipes seeded by exact time-point successors.
    Exact,
}

impl std::str::FromStr for Algorithm {
    type Err = ReachError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "glgm06" => Ok(Algorithm::Glgm06),
            "asb07" => Ok(Algorithm::Asb07),
            "exact" => Ok(Algorithm::Exact),
            other => Err(ReachError::input(format!(
                "unknown algorithm `{other}` (expected glgm06, asb07 or exact)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReachOptions {
    pub delta: f64,
    pub algorithm: Algorithm,
    /// Zonotope order cap for ASB07 (ignored by the other algorithms).
    pub max_order: f64,
    /// Overrides the system's horizon when set.
    pub horizon: Option<f64>,
    pub taylor_order: Option<usize>,
}

impl ReachOptions {
    pub fn new(delta: f64, algorithm: Algorithm) -> Self {
        Self {
            delta,
            algorithm,
            max_order: f64::INFINITY,
            horizon: None,
            taylor_order: None,
        }
    }

    pub fn with_max_order(mut self, max_order: f64) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }
}

/// One discrete transition of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    /// Index of the flowpipe the transition was taken from.
    pub index: usize,
    /// Number of sets clustered before the reset.
    pub clustered_sets: usize,
    pub post_reset: Zonotope,
}

/// All flowpipes of a periodic run, in absolute time.
#[derive(Debug, Clone, Default)]
pub struct HybridRun {
    pub flowpipes: Vec<Flowpipe>,
    pub jumps: Vec<JumpRecord>,
}

impl HybridRun {
    pub fn num_sets(&self) -> usize {
        self.flowpipes.iter().map(Flowpipe::len).sum()
    }

    pub fn last_set(&self) -> Option<&Zonotope> {
        self.flowpipes.last().and_then(Flowpipe::last)
    }
}

/// Receives flowpipes as the engine produces them, so that long runs can be
/// summarised without keeping every set in memory.
pub trait RunObserver {
    fn on_flowpipe(&mut self, index: usize, flowpipe: &Flowpipe);

    fn on_jump(&mut self, _record: &JumpRecord) {}
}

impl RunObserver for HybridRun {
    fn on_flowpipe(&mut self, _index: usize, flowpipe: &Flowpipe) {
        self.flowpipes.push(flowpipe.clone());
    }

    fn on_jump(&mut self, record: &JumpRecord) {
        self.jumps.push(record.clone());
    }
}

impl<A: RunObserver, B: RunObserver> RunObserver for (A, B) {
    fn on_flowpipe(&mut self, index: usize, flowpipe: &Flowpipe) {
        self.0.on_flowpipe(index, flowpipe);
        self.1.on_flowpipe(index, flowpipe);
    }

    fn on_jump(&mut self, record: &JumpRecord) {
        self.0.on_jump(record);
        self.1.on_jump(record);
    }
}

impl<T: RunObserver + ?Sized> RunObserver for &mut T {
    fn on_flowpipe(&mut self, index: usize, flowpipe: &Flowpipe) {
        (**self).on_flowpipe(index, flowpipe);
    }

    fn on_jump(&mut self, record: &JumpRecord) {
        (**self).on_jump(record);
    }
}

/// Counts of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub flowpipes: usize,
    pub sets: usize,
}

// x/δ with ratios within 1e-9 of an integer snapped onto it, so that exact
// grid alignments survive floating-point division.
fn snapped_ratio(x: f64, delta: f64) -> f64 {
    let r = x / delta;
    let k = r.round();
    if (r - k).abs() <= 1e-9 * r.abs().max(1.0) {
        k
    } else {
        r
    }
}

/// Frame indices `[k1, k2)` whose union covers the switching window
/// `[T + ζ₋, T + ζ₊]` of a phase starting at 0.
pub fn compute_transition_indices(t_sample: f64, zeta: Jitter, delta: f64) -> Result<(usize, usize)> {
    if !(delta > 0.0) || !(delta <= t_sample) {
        return Err(ReachError::input(format!(
            "step size must satisfy 0 < δ <= T_sample, got δ = {delta}, T_sample = {t_sample}"
        )));
    }
    let zeta = Jitter::new(zeta.lo, zeta.hi)?;
    if !(t_sample + zeta.lo > 0.0) {
        return Err(ReachError::input("T_sample + ζ₋ must be > 0"));
    }
    let k1 = snapped_ratio(t_sample + zeta.lo, delta).floor() as usize;
    let k2 = snapped_ratio(t_sample + zeta.hi, delta).ceil() as usize;
    let k1 = if k1 == k2 { k2 - 1 } else { k1 };
    Ok((k1, k2))
}

/// Number of transitions [`reach_periodic`] takes for `phs` and `opts`.
pub fn jump_count(phs: &PeriodicHybridSystem, opts: &ReachOptions) -> Result<usize> {
    let (k1, _) = compute_transition_indices(phs.t_sample, phs.zeta, opts.delta)?;
    let horizon = opts.horizon.unwrap_or(phs.horizon);
    if k1 == 0 {
        return Err(ReachError::input("step size exceeds the earliest switching time"));
    }
    let step = k1 as f64 * opts.delta;
    let mut count = 0usize;
    while (count + 1) as f64 * step <= horizon {
        count += 1;
    }
    Ok(count)
}

/// Latest time up to which every switch of an admissible trajectory has a
/// matching transition in the run: `min(horizon, (J+1)·T + ζ₋)` for `J`
/// transitions, excluding the boundary itself.
pub fn covered_horizon(phs: &PeriodicHybridSystem, opts: &ReachOptions) -> Result<f64> {
    let jumps = jump_count(phs, opts)?;
    let horizon = opts.horizon.unwrap_or(phs.horizon);
    let next = (jumps + 1) as f64 * phs.t_sample + phs.zeta.lo;
    Ok(horizon.min(next - 1e-9 * phs.t_sample))
}

/// First frame to cluster in flowpipes after the first one.
///
/// Such a flowpipe is stamped with the earliest possible switching time, but
/// the phase may have started up to `ζ₊ − ζ₋` later, so the next switch can
/// occur as early as `T − (ζ₊ − ζ₋)` after its stamp.
pub fn later_lower_index(t_sample: f64, zeta: Jitter, delta: f64, k1: usize) -> usize {
    if zeta.is_deterministic() {
        return k1;
    }
    let earliest = t_sample - zeta.width();
    if earliest <= 0.0 {
        return 0;
    }
    (snapped_ratio(earliest, delta).floor() as usize).min(k1)
}

/// Clusters frames `[k1, k2)` of `fp` and applies `reset`.
pub fn jump(fp: &Flowpipe, k1: usize, k2: usize, reset: &AffineMap) -> Result<Zonotope> {
    if !(k1 < k2 && k2 <= fp.len()) {
        return Err(ReachError::input(format!(
            "jump indices [{k1}, {k2}) invalid for a flowpipe of {} sets",
            fp.len()
        )));
    }
    cluster_union(&fp.sets()[k1..k2])?.affine_map(reset)
}

/// Translates every frame of `fp` by `t_shift`.
pub fn shift(fp: Flowpipe, t_shift: f64) -> Flowpipe {
    fp.shifted(t_shift)
}

struct PhaseSolver<'a> {
    phs: &'a PeriodicHybridSystem,
    dynamics: Dynamics,
    opts: ReachOptions,
}

impl<'a> PhaseSolver<'a> {
    fn new(phs: &'a PeriodicHybridSystem, opts: ReachOptions) -> Result<Self> {
        let dynamics = match (opts.algorithm, &phs.dynamics) {
            (Algorithm::Glgm06 | Algorithm::Exact, Dynamics::Interval(_)) => {
                return Err(ReachError::input(
                    "parametric dynamics need the asb07 algorithm",
                ))
            }
            (Algorithm::Asb07, d) => Dynamics::Interval(d.to_interval()),
            (_, d) => d.clone(),
        };
        if opts.algorithm == Algorithm::Asb07 && (opts.max_order.is_nan() || opts.max_order < 1.0) {
            return Err(ReachError::input(format!(
                "max_order must be >= 1, got {}",
                opts.max_order
            )));
        }
        Ok(Self { phs, dynamics, opts })
    }

    fn discretize(&self, seed: &Zonotope) -> Result<DiscretizedSystem> {
        discretize(
            &self.dynamics,
            &self.phs.input_matrix,
            &self.phs.input_set,
            seed,
            self.opts.delta,
            DiscretizeOptions {
                taylor_order: self.opts.taylor_order,
            },
        )
    }

    fn flowpipe(&self, sys: &DiscretizedSystem, steps: usize) -> Result<Flowpipe> {
        match self.opts.algorithm {
            Algorithm::Asb07 => reach_asb07(sys, steps, self.opts.max_order),
            Algorithm::Glgm06 | Algorithm::Exact => reach_glgm06(sys, steps),
        }
    }
}

fn check_step(phs: &PeriodicHybridSystem, opts: &ReachOptions) -> Result<()> {
    phs.validate()?;
    if !(opts.delta > 0.0) || !opts.delta.is_finite() {
        return Err(ReachError::input(format!("step size must be > 0, got {}", opts.delta)));
    }
    if opts.delta > phs.t_sample + phs.zeta.lo {
        return Err(ReachError::input(format!(
            "step size {} exceeds the earliest switching time {}",
            opts.delta,
            phs.t_sample + phs.zeta.lo
        )));
    }
    Ok(())
}

/// Runs the periodic construction and collects every flowpipe.
pub fn reach_periodic(phs: &PeriodicHybridSystem, opts: &ReachOptions) -> Result<HybridRun> {
    let mut run = HybridRun::default();
    reach_periodic_with(phs, opts, &mut run)?;
    Ok(run)
}

/// Runs the periodic construction, streaming flowpipes into `observer`.
/// Dispatches to [`reach_periodic_exact_with`] for [`Algorithm::Exact`].
pub fn reach_periodic_with(
    phs: &PeriodicHybridSystem,
    opts: &ReachOptions,
    observer: &mut dyn RunObserver,
) -> Result<RunStats> {
    if opts.algorithm == Algorithm::Exact {
        return reach_periodic_exact_with(phs, opts, observer);
    }
    check_step(phs, opts)?;
    let solver = PhaseSolver::new(phs, *opts)?;
    let delta = opts.delta;
    let horizon = opts.horizon.unwrap_or(phs.horizon);
    let (k1, k2) = compute_transition_indices(phs.t_sample, phs.zeta, delta)?;
    let width = phs.zeta.width();
    let k2_next = k2 + snapped_ratio(width, delta).ceil() as usize;
    let k1_next = later_lower_index(phs.t_sample, phs.zeta, delta, k1);

    let mut fp = solver.flowpipe(&solver.discretize(&phs.x0_set)?, k2)?;
    let mut stats = RunStats::default();
    observer.on_flowpipe(0, &fp);
    stats.flowpipes += 1;
    stats.sets += fp.len();

    let mut index = 0usize;
    // t_min advances by k1·δ per transition
    while (index + 1) as f64 * k1 as f64 * delta <= horizon {
        let lower = if index == 0 { k1 } else { k1_next };
        let seed = jump(&fp, lower, fp.len(), &phs.reset)?;
        observer.on_jump(&JumpRecord {
            index,
            clustered_sets: fp.len() - lower,
            post_reset: seed.clone(),
        });
        index += 1;
        let t_shift = phs.zeta.lo + index as f64 * phs.t_sample;
        fp = shift(solver.flowpipe(&solver.discretize(&seed)?, k2_next)?, t_shift).with_time_slack(width);
        observer.on_flowpipe(index, &fp);
        stats.flowpipes += 1;
        stats.sets += fp.len();
    }
    Ok(stats)
}

/// Exact-seed variant for scalar dynamics with deterministic switching.
pub fn reach_periodic_exact(phs: &PeriodicHybridSystem, opts: &ReachOptions) -> Result<HybridRun> {
    let mut run = HybridRun::default();
    reach_periodic_exact_with(phs, opts, &mut run)?;
    Ok(run)
}

/// Like [`reach_periodic_with`], but each jump seed is the time-point set
/// `e^{A·T} X_prev ⊕ …` followed by the reset, so no clustering or
/// discretization error reaches the next phase. Flowpipes are still produced
/// for every phase.
pub fn reach_periodic_exact_with(
    phs: &PeriodicHybridSystem,
    opts: &ReachOptions,
    observer: &mut dyn RunObserver,
) -> Result<RunStats> {
    check_step(phs, opts)?;
    let Dynamics::Scalar(a) = &phs.dynamics else {
        return Err(ReachError::input("exact mode requires nonparametric dynamics"));
    };
    if !phs.zeta.is_deterministic() {
        return Err(ReachError::input("exact mode requires deterministic switching (ζ = 0)"));
    }
    let mut exact_opts = *opts;
    exact_opts.algorithm = Algorithm::Exact;
    let solver = PhaseSolver::new(phs, exact_opts)?;
    let delta = opts.delta;
    let horizon = opts.horizon.unwrap_or(phs.horizon);
    let (k1, k2) = compute_transition_indices(phs.t_sample, phs.zeta, delta)?;

    let mut seed = phs.x0_set.clone();
    let mut sys = solver.discretize(&seed)?;
    let mut fp = solver.flowpipe(&sys, k2)?;
    let mut stats = RunStats::default();
    observer.on_flowpipe(0, &fp);
    stats.flowpipes += 1;
    stats.sets += fp.len();

    let mut index = 0usize;
    while (index + 1) as f64 * k1 as f64 * delta <= horizon {
        let successor = exact_point_successor(a, &seed, phs.t_sample, &sys)?;
        seed = successor.affine_map(&phs.reset)?;
        observer.on_jump(&JumpRecord {
            index,
            clustered_sets: 1,
            post_reset: seed.clone(),
        });
        index += 1;
        sys = solver.discretize(&seed)?;
        fp = shift(solver.flowpipe(&sys, k2)?, index as f64 * phs.t_sample);
        observer.on_flowpipe(index, &fp);
        stats.flowpipes += 1;
        stats.sets += fp.len();
    }
    Ok(stats)
}
