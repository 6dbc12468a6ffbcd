//! Ground-truth simulation of instantiated periodic systems and containment
//! checks of the resulting trajectories against reach runs.
//!
//! Trajectories are advanced with exact matrix exponentials of the augmented
//! system `[A w; 0 0]`, so the oracle carries no integrator error.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::continuous_reach::Flowpipe;
use crate::discretization::{matrix_exponential, Dynamics};
use crate::error::{check_dim, ReachError, Result};
use crate::hybrid_engine::{HybridRun, RunObserver};
use crate::models::{Jitter, PeriodicHybridSystem};
use crate::set_calculus::{AffineMap, Zonotope, CONTAINMENT_TOL};

/// A concrete member of a (possibly parametric) periodic system:
/// `ẋ = A x + w` between switches, `x' = reset(x)` at switches.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub a: DMatrix<f64>,
    pub w: DVector<f64>,
    pub reset: AffineMap,
    pub x0: DVector<f64>,
}

impl Instance {
    pub fn new(a: DMatrix<f64>, w: DVector<f64>, reset: AffineMap, x0: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        check_dim("instance (A square)", n, a.ncols())?;
        check_dim("instance (w)", n, w.len())?;
        check_dim("instance (reset)", n, reset.dim())?;
        check_dim("instance (x0)", n, x0.len())?;
        Ok(Self { a, w, reset, x0 })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Exact flow map over `h`: `x ↦ Φ x + γ`.
    fn flow(&self, h: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = self.dim();
        if self.w.iter().all(|v| *v == 0.0) {
            return Ok((matrix_exponential(&self.a, h)?, DVector::zeros(n)));
        }
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        m.view_mut((0, n), (n, 1)).copy_from(&self.w);
        let e = matrix_exponential(&m, h)?;
        Ok((
            e.view((0, 0), (n, n)).into_owned(),
            e.view((0, n), (n, 1)).column(0).into_owned(),
        ))
    }

    fn advance(&self, x: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
        if h == 0.0 {
            return Ok(x.clone());
        }
        let (phi, gamma) = self.flow(h)?;
        Ok(phi * x + gamma)
    }
}

/// Where each switch fires inside its jitter window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JitterMode {
    Nominal,
    Earliest,
    Latest,
    /// Latest, earliest, latest, … (longest and shortest phases alternate).
    Alternating,
    Random,
}

/// Switch times `k·T + ζ_k`, `k = 1, 2, …`, for every window that opens no
/// later than `t_end`.
pub fn switch_schedule<R: Rng + ?Sized>(
    t_sample: f64,
    zeta: Jitter,
    t_end: f64,
    mode: JitterMode,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 1usize;
    loop {
        let nominal = k as f64 * t_sample;
        if nominal + zeta.lo > t_end {
            break;
        }
        let offset = match mode {
            JitterMode::Nominal => 0.0,
            JitterMode::Earliest => zeta.lo,
            JitterMode::Latest => zeta.hi,
            JitterMode::Alternating if k % 2 == 1 => zeta.hi,
            JitterMode::Alternating => zeta.lo,
            JitterMode::Random if zeta.width() > 0.0 => rng.gen_range(zeta.lo..=zeta.hi),
            JitterMode::Random => 0.0,
        };
        out.push(nominal + offset);
        k += 1;
    }
    out
}

/// Checks that `schedule[k−1] ∈ [k·T + ζ₋, k·T + ζ₊]` for every entry.
pub fn validate_schedule(schedule: &[f64], t_sample: f64, zeta: Jitter) -> Result<()> {
    for (idx, &s) in schedule.iter().enumerate() {
        let nominal = (idx + 1) as f64 * t_sample;
        let slack = 1e-12 * nominal;
        if !(s >= nominal + zeta.lo - slack && s <= nominal + zeta.hi + slack) {
            return Err(ReachError::input(format!(
                "switch {} at t = {s} lies outside its window [{}, {}]",
                idx + 1,
                nominal + zeta.lo,
                nominal + zeta.hi
            )));
        }
    }
    Ok(())
}

/// States just before and just after a switch.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSample {
    pub time: f64,
    pub pre: DVector<f64>,
    pub post: DVector<f64>,
}

/// A simulated trajectory: samples with strictly increasing times (taken off
/// switch instants) plus both states at every switch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<(f64, DVector<f64>)>,
    pub switch_times: Vec<f64>,
    pub switches: Vec<SwitchSample>,
}

impl Trajectory {
    /// Every `(t, state)` pair, switch states included.
    pub fn points(&self) -> impl Iterator<Item = (f64, &DVector<f64>)> + '_ {
        self.samples.iter().map(|(t, x)| (*t, x)).chain(
            self.switches
                .iter()
                .flat_map(|s| [(s.time, &s.pre), (s.time, &s.post)]),
        )
    }

    pub fn num_points(&self) -> usize {
        self.samples.len() + 2 * self.switches.len()
    }

    /// The state at sample time `t`, if `t` is one of the sample times.
    pub fn state_at(&self, t: f64) -> Option<&DVector<f64>> {
        self.samples
            .binary_search_by(|(s, _)| s.total_cmp(&t))
            .ok()
            .map(|i| &self.samples[i].1)
    }
}

/// Simulates `inst` over `[0, t_end]`, sampling every `dt` with exact steps.
pub fn simulate(
    inst: &Instance,
    schedule: &[f64],
    t_sample: f64,
    zeta: Jitter,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ReachError::input(format!("simulation step must be > 0, got {dt}")));
    }
    let n = (t_end / dt).floor() as usize;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    simulate_at(inst, schedule, t_sample, zeta, &times)
}

/// Simulates `inst` and reports the state at each of `times` (sorted,
/// nonnegative), plus both states at every switch up to the last time.
/// Sample times that coincide with a switch are dropped in favour of the
/// switch record.
pub fn simulate_at(
    inst: &Instance,
    schedule: &[f64],
    t_sample: f64,
    zeta: Jitter,
    times: &[f64],
) -> Result<Trajectory> {
    validate_schedule(schedule, t_sample, zeta)?;
    if times.windows(2).any(|w| !(w[0] < w[1])) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(ReachError::input("sample times must be nonnegative and strictly increasing"));
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    let mut traj = Trajectory::default();
    let mut anchor_t = 0.0;
    let mut anchor_x = inst.x0.clone();
    // cached step map for the common spacing of regular grids
    let mut step_cache: Option<(f64, DMatrix<f64>, DVector<f64>)> = None;
    let mut last_t = 0.0;
    let mut last_x = inst.x0.clone();
    let mut switches = schedule.iter().copied().filter(|s| *s <= t_end).peekable();

    for &t in times {
        while let Some(&s) = switches.peek() {
            if s > t {
                break;
            }
            let pre = propagate(inst, &mut step_cache, &mut last_t, &mut last_x, anchor_t, &anchor_x, s)?;
            let post = inst.reset.apply(&pre)?;
            traj.switch_times.push(s);
            traj.switches.push(SwitchSample {
                time: s,
                pre,
                post: post.clone(),
            });
            anchor_t = s;
            anchor_x = post.clone();
            last_t = s;
            last_x = post;
            switches.next();
        }
        if traj.switch_times.last() == Some(&t) {
            continue;
        }
        let x = propagate(inst, &mut step_cache, &mut last_t, &mut last_x, anchor_t, &anchor_x, t)?;
        traj.samples.push((t, x));
    }
    Ok(traj)
}

// Advances from the last emitted state. A gap equal to the cached spacing
// reuses the cached map; anything else is computed from the segment anchor so
// that rounding does not accumulate across irregular gaps.
fn propagate(
    inst: &Instance,
    cache: &mut Option<(f64, DMatrix<f64>, DVector<f64>)>,
    last_t: &mut f64,
    last_x: &mut DVector<f64>,
    anchor_t: f64,
    anchor_x: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    let gap = t - *last_t;
    let x = match cache {
        Some((h, phi, gamma)) if *h == gap => &*phi * &*last_x + &*gamma,
        _ if *last_t > anchor_t && gap > 0.0 && gap < (t - anchor_t) * 0.5 => {
            let (phi, gamma) = inst.flow(gap)?;
            let x = &phi * &*last_x + &gamma;
            *cache = Some((gap, phi, gamma));
            x
        }
        _ => inst.advance(anchor_x, t - anchor_t)?,
    };
    *last_t = t;
    *last_x = x.clone();
    Ok(x)
}

/// Uniform random point of a zonotope's parameter box image.
pub fn sample_zonotope<R: Rng + ?Sized>(z: &Zonotope, rng: &mut R) -> DVector<f64> {
    let xi = DVector::from_fn(z.num_generators(), |_, _| rng.gen_range(-1.0..=1.0));
    z.center() + z.generators() * xi
}

/// Random instantiation of `dynamics`: each uncertain entry drawn uniformly,
/// or taken at a vertex of its interval when `corner` is given (bit `m` of
/// `corner` selects the bound of the `m`-th uncertain entry, column-major).
pub fn instantiate_dynamics<R: Rng + ?Sized>(
    dynamics: &Dynamics,
    corner: Option<u64>,
    rng: &mut R,
) -> DMatrix<f64> {
    match dynamics {
        Dynamics::Scalar(a) => a.clone(),
        Dynamics::Interval(im) => {
            let mut a = im.midpoint().clone();
            let mut m = 0u32;
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    let r = im.radius()[(i, j)];
                    if r == 0.0 {
                        continue;
                    }
                    let offset = match corner {
                        Some(bits) => {
                            if bits >> m & 1 == 1 {
                                r
                            } else {
                                -r
                            }
                        }
                        None => rng.gen_range(-r..=r),
                    };
                    a[(i, j)] += offset;
                    m += 1;
                }
            }
            a
        }
    }
}

/// Number of uncertain entries of `dynamics`.
pub fn uncertain_entries(dynamics: &Dynamics) -> usize {
    match dynamics {
        Dynamics::Scalar(_) => 0,
        Dynamics::Interval(im) => im.radius().iter().filter(|r| **r != 0.0).count(),
    }
}

/// Draws a concrete instance of `phs`: dynamics per [`instantiate_dynamics`],
/// initial state and constant input uniformly from their zonotopes.
pub fn instantiate<R: Rng + ?Sized>(
    phs: &PeriodicHybridSystem,
    corner: Option<u64>,
    rng: &mut R,
) -> Result<Instance> {
    let a = instantiate_dynamics(&phs.dynamics, corner, rng);
    let u = sample_zonotope(&phs.input_set, rng);
    let w = &phs.input_matrix * u;
    let x0 = sample_zonotope(&phs.x0_set, rng);
    Instance::new(a, w, phs.reset.clone(), x0)
}

/// A sample not contained in any reach set whose frame covers its time.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub time: f64,
    pub state: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContainmentReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
    /// Sample times not covered by any frame of the run.
    pub uncovered: Vec<f64>,
}

impl ContainmentReport {
    pub fn is_sound(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: ContainmentReport) {
        self.checked += other.checked;
        self.violations.extend(other.violations);
        self.uncovered.extend(other.uncovered);
    }
}

struct Pending {
    time: f64,
    state: DVector<f64>,
    covered: bool,
    contained: bool,
}

/// Streaming containment checker: collects trajectory points up front and
/// tests them against flowpipes as the run is produced. A point passes when
/// some frame whose time interval contains its time contains the state.
pub struct ContainmentChecker {
    points: Vec<Pending>,
    /// Index of the first point not yet finalized.
    cursor: usize,
    tol: f64,
    report: ContainmentReport,
}

impl ContainmentChecker {
    pub fn new() -> Self {
        Self {
            points: Vec::new(),
            cursor: 0,
            tol: CONTAINMENT_TOL,
            report: ContainmentReport::default(),
        }
    }

    /// Adds every point of `traj`. Must be called before the run starts.
    pub fn add_trajectory(&mut self, traj: &Trajectory) {
        self.points.extend(traj.points().map(|(t, x)| Pending {
            time: t,
            state: x.clone(),
            covered: false,
            contained: false,
        }));
        self.points.sort_by(|a, b| a.time.total_cmp(&b.time));
    }

    fn finalize_one(&mut self) {
        let p = &self.points[self.cursor];
        self.report.checked += 1;
        if !p.covered {
            self.report.uncovered.push(p.time);
        } else if !p.contained {
            self.report.violations.push(Violation {
                time: p.time,
                state: p.state.clone(),
            });
        }
        self.cursor += 1;
    }

    pub fn finish(mut self) -> ContainmentReport {
        while self.cursor < self.points.len() {
            self.finalize_one();
        }
        self.report
    }
}

impl Default for ContainmentChecker {
    fn default() -> Self {
        Self::new()
    }
}

impl RunObserver for ContainmentChecker {
    fn on_flowpipe(&mut self, _index: usize, fp: &Flowpipe) {
        if fp.is_empty() {
            return;
        }
        // flowpipes start in increasing order, so earlier points are final
        let eps = 1e-9 * fp.delta();
        while self.cursor < self.points.len() && self.points[self.cursor].time < fp.start() - eps {
            self.finalize_one();
        }
        let end = fp.end() + eps;
        for p in self.points[self.cursor..].iter_mut() {
            if p.time > end {
                break;
            }
            if p.contained {
                continue;
            }
            for k in fp.frames_at(p.time) {
                p.covered = true;
                if fp.set(k).contains_point_tol(&p.state, self.tol).unwrap_or(false) {
                    p.contained = true;
                    break;
                }
            }
        }
    }
}

/// Checks every point of `traj` against `run` at strict time points.
pub fn check_containment(traj: &Trajectory, run: &HybridRun) -> ContainmentReport {
    let mut checker = ContainmentChecker::new();
    checker.add_trajectory(traj);
    for (j, fp) in run.flowpipes.iter().enumerate() {
        checker.on_flowpipe(j, fp);
    }
    checker.finish()
}

/// Sorted random sample times in `[0, t_end]`, always including `0`.
pub fn random_times<R: Rng + ?Sized>(count: usize, t_end: f64, rng: &mut R) -> Vec<f64> {
    let mut times: Vec<f64> = std::iter::once(0.0)
        .chain((0..count).map(|_| rng.gen_range(0.0..=t_end)))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}
