//! Support-function queries over runs: final diameters, projected bounds and
//! the caliper contact requirement `|x − x₀| ≤ ε for all t ≥ t_c`.
//!
//! Everything here is available both as a function of a stored [`HybridRun`]
//! and as a [`RunObserver`], so that runs with 10⁷–10⁸ sets can be evaluated
//! while they are produced.

use nalgebra::DVector;
use serde::Serialize;

use crate::continuous_reach::{Flowpipe, TimeInterval};
use crate::error::{check_dim, ReachError, Result};
use crate::hybrid_engine::{HybridRun, RunObserver};
use crate::set_calculus::Zonotope;

/// Outcome of the contact requirement check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RequirementResult {
    pub epsilon: f64,
    pub verified: bool,
    /// Start of the earliest frame from which the position band holds [s].
    pub t_c: Option<f64>,
    /// Largest speed magnitude over the frames covering `t_c` [m/s].
    pub v_r: Option<f64>,
}

/// Contact requirement parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Requirement {
    pub epsilon: f64,
    /// Disk position the caliper must settle at.
    pub x0: f64,
    pub position_index: usize,
    /// Row vector giving the speed as a linear function of the state.
    pub velocity_row: DVector<f64>,
}

impl Requirement {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(ReachError::input(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.position_index >= dim {
            return Err(ReachError::input(format!(
                "position index {} out of range for dimension {dim}",
                self.position_index
            )));
        }
        check_dim("requirement velocity row", dim, self.velocity_row.len())
    }

    fn frame(&self, time: TimeInterval, z: &Zonotope) -> FrameSummary {
        FrameSummary {
            time,
            position: z.axis_bounds(self.position_index),
            speed: speed_bound(z, &self.velocity_row),
        }
    }
}

/// Position bounds and speed bound of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSummary {
    pub time: TimeInterval,
    pub position: (f64, f64),
    pub speed: f64,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    time: TimeInterval,
    inside: bool,
    speed: f64,
}

/// Streaming evaluator of the contact requirement.
///
/// `t_c` is the start of the earliest satisfying frame that begins no earlier
/// than the end of the last violating frame. Flowpipes only overlap their
/// direct neighbours, so the frames of the last two flowpipes suffice to
/// re-anchor `t_c` when a late violation shows up.
#[derive(Debug, Clone)]
pub struct RequirementMonitor {
    requirement: Requirement,
    previous: Vec<Frame>,
    current: Vec<Frame>,
    last_violation_end: f64,
    t_c: Option<f64>,
    v_r: f64,
}

impl RequirementMonitor {
    pub fn new(requirement: Requirement) -> Self {
        Self {
            requirement,
            previous: Vec::new(),
            current: Vec::new(),
            last_violation_end: f64::NEG_INFINITY,
            t_c: None,
            v_r: 0.0,
        }
    }

    /// Feeds the frame summaries of one flowpipe, in time order.
    pub fn push_flowpipe(&mut self, frames: impl IntoIterator<Item = FrameSummary>) {
        let (lo, hi) = (
            self.requirement.x0 - self.requirement.epsilon,
            self.requirement.x0 + self.requirement.epsilon,
        );
        self.previous = std::mem::take(&mut self.current);
        self.current = frames
            .into_iter()
            .map(|f| Frame {
                time: f.time,
                inside: f.position.0 >= lo && f.position.1 <= hi,
                speed: f.speed,
            })
            .collect();
        for idx in 0..self.current.len() {
            let frame = self.current[idx];
            if !frame.inside {
                if frame.time.hi > self.last_violation_end {
                    self.last_violation_end = frame.time.hi;
                    if self.t_c.is_some_and(|t| t < self.last_violation_end) {
                        self.reanchor();
                    }
                }
            } else if frame.time.lo >= self.last_violation_end
                && self.t_c.is_none_or(|t| frame.time.lo < t)
            {
                self.t_c = Some(frame.time.lo);
                self.rescan_speed();
            }
            if let Some(t) = self.t_c {
                if frame.time.contains(t) {
                    self.v_r = self.v_r.max(frame.speed);
                }
            }
        }
    }

    fn buffered(&self) -> impl Iterator<Item = &Frame> {
        self.previous.iter().chain(self.current.iter())
    }

    fn reanchor(&mut self) {
        let bound = self.last_violation_end;
        self.t_c = self
            .buffered()
            .filter(|f| f.inside && f.time.lo >= bound)
            .map(|f| f.time.lo)
            .reduce(f64::min);
        self.rescan_speed();
    }

    fn rescan_speed(&mut self) {
        self.v_r = match self.t_c {
            Some(t) => self
                .buffered()
                .filter(|f| f.time.contains(t))
                .map(|f| f.speed)
                .fold(0.0, f64::max),
            None => 0.0,
        };
    }

    pub fn finish(&self) -> RequirementResult {
        RequirementResult {
            epsilon: self.requirement.epsilon,
            verified: self.t_c.is_some(),
            t_c: self.t_c.map(|t| t.max(0.0)),
            v_r: self.t_c.map(|_| self.v_r),
        }
    }
}

impl RunObserver for RequirementMonitor {
    fn on_flowpipe(&mut self, _index: usize, flowpipe: &Flowpipe) {
        let frames: Vec<FrameSummary> = flowpipe
            .iter()
            .map(|(time, z)| self.requirement.frame(time, z))
            .collect();
        self.push_flowpipe(frames);
    }
}

/// Evaluates the contact requirement on a stored run.
pub fn check_requirement(run: &HybridRun, requirement: &Requirement) -> Result<RequirementResult> {
    let dim = run
        .last_set()
        .ok_or_else(|| ReachError::input("empty run"))?
        .dim();
    requirement.validate(dim)?;
    let mut monitor = RequirementMonitor::new(requirement.clone());
    for (j, fp) in run.flowpipes.iter().enumerate() {
        monitor.on_flowpipe(j, fp);
    }
    Ok(monitor.finish())
}

/// Keeps only the last set of the last flowpipe.
#[derive(Debug, Clone, Default)]
pub struct FinalSetObserver {
    pub last: Option<Zonotope>,
}

impl RunObserver for FinalSetObserver {
    fn on_flowpipe(&mut self, _index: usize, flowpipe: &Flowpipe) {
        if let Some(z) = flowpipe.last() {
            self.last = Some(z.clone());
        }
    }
}

/// Width of `z` along coordinate `var_index`.
pub fn set_diameter(z: &Zonotope, var_index: usize) -> Result<f64> {
    if var_index >= z.dim() {
        return Err(ReachError::input(format!(
            "variable index {var_index} out of range for dimension {}",
            z.dim()
        )));
    }
    Ok(2.0 * z.axis_radius(var_index))
}

/// Diameter of the last reach set projected on `var_index`.
pub fn final_diameter(run: &HybridRun, var_index: usize) -> Result<f64> {
    let last = run.last_set().ok_or_else(|| ReachError::input("empty run"))?;
    set_diameter(last, var_index)
}

/// Projection of one frame on a variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsRow {
    pub flowpipe: usize,
    pub k: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Per-frame projected interval of `var_index`, in run order.
pub fn flowpipe_bounds(run: &HybridRun, var_index: usize) -> Result<Vec<BoundsRow>> {
    let dim = run
        .last_set()
        .ok_or_else(|| ReachError::input("empty run"))?
        .dim();
    if var_index >= dim {
        return Err(ReachError::input(format!(
            "variable index {var_index} out of range for dimension {dim}"
        )));
    }
    Ok(run
        .flowpipes
        .iter()
        .enumerate()
        .flat_map(|(j, fp)| {
            fp.iter().enumerate().map(move |(k, (time, z))| {
                let (lo, hi) = z.axis_bounds(var_index);
                BoundsRow {
                    flowpipe: j,
                    k,
                    t_lo: time.lo,
                    t_hi: time.hi,
                    lo,
                    hi,
                }
            })
        })
        .collect())
}

/// Box projection of every frame on every variable, plus a speed bound.
/// Used for CSV export and for merging split runs. Stored column-wise to keep
/// long runs compact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectionTrace {
    dim: usize,
    flowpipe: Vec<u32>,
    k: Vec<u32>,
    time: Vec<(f64, f64)>,
    /// `2·dim` entries per row: `lo₀, hi₀, lo₁, hi₁, …`.
    bounds: Vec<f64>,
    speed: Vec<f64>,
}

/// One frame of a [`ProjectionTrace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionRow<'a> {
    pub flowpipe: usize,
    pub k: usize,
    pub time: TimeInterval,
    bounds: &'a [f64],
    pub speed: f64,
}

impl ProjectionRow<'_> {
    pub fn bounds(&self, var_index: usize) -> (f64, f64) {
        (self.bounds[2 * var_index], self.bounds[2 * var_index + 1])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len() / 2
    }
}

impl ProjectionTrace {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn push(&mut self, flowpipe: usize, k: usize, time: TimeInterval, z: &Zonotope, speed: f64) {
        self.flowpipe.push(flowpipe as u32);
        self.k.push(k as u32);
        self.time.push((time.lo, time.hi));
        for j in 0..self.dim {
            let (lo, hi) = z.axis_bounds(j);
            self.bounds.push(lo);
            self.bounds.push(hi);
        }
        self.speed.push(speed);
    }

    pub fn row(&self, i: usize) -> ProjectionRow<'_> {
        ProjectionRow {
            flowpipe: self.flowpipe[i] as usize,
            k: self.k[i] as usize,
            time: TimeInterval {
                lo: self.time[i].0,
                hi: self.time[i].1,
            },
            bounds: &self.bounds[2 * self.dim * i..2 * self.dim * (i + 1)],
            speed: self.speed[i],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = ProjectionRow<'_>> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    /// Envelope of two traces over identical frame grids.
    pub fn envelope(&self, other: &ProjectionTrace) -> Result<ProjectionTrace> {
        let mismatch = || ReachError::input("cannot merge traces with different frame grids");
        if self.dim != other.dim
            || self.flowpipe != other.flowpipe
            || self.k != other.k
            || self.time != other.time
        {
            return Err(mismatch());
        }
        let bounds = self
            .bounds
            .chunks_exact(2)
            .zip(other.bounds.chunks_exact(2))
            .flat_map(|(a, b)| [a[0].min(b[0]), a[1].max(b[1])])
            .collect();
        Ok(ProjectionTrace {
            dim: self.dim,
            flowpipe: self.flowpipe.clone(),
            k: self.k.clone(),
            time: self.time.clone(),
            bounds,
            speed: self.speed.iter().zip(&other.speed).map(|(a, b)| a.max(*b)).collect(),
        })
    }

    /// Width of the last frame on `var_index`.
    pub fn final_diameter(&self, var_index: usize) -> Result<f64> {
        if self.is_empty() {
            return Err(ReachError::input("empty trace"));
        }
        if var_index >= self.dim {
            return Err(ReachError::input(format!("variable index {var_index} out of range")));
        }
        let (lo, hi) = self.row(self.len() - 1).bounds(var_index);
        Ok(hi - lo)
    }

    /// Contact requirement over the (box-projected) frames.
    pub fn check_requirement(&self, requirement: &Requirement) -> Result<RequirementResult> {
        requirement.validate(self.dim)?;
        let mut monitor = RequirementMonitor::new(requirement.clone());
        let mut start = 0;
        while start < self.len() {
            let fp = self.flowpipe[start];
            let end = start + self.flowpipe[start..].iter().take_while(|&&f| f == fp).count();
            monitor.push_flowpipe((start..end).map(|i| {
                let row = self.row(i);
                FrameSummary {
                    time: row.time,
                    position: row.bounds(requirement.position_index),
                    speed: row.speed,
                }
            }));
            start = end;
        }
        Ok(monitor.finish())
    }

    pub fn flowpipe_count(&self) -> usize {
        self.flowpipe.last().map_or(0, |&f| f as usize + 1)
    }
}

/// Records a [`ProjectionTrace`] while a run is produced.
#[derive(Debug, Clone)]
pub struct ProjectionRecorder {
    velocity_row: Option<DVector<f64>>,
    pub trace: ProjectionTrace,
}

impl ProjectionRecorder {
    pub fn new(dim: usize, velocity_row: Option<DVector<f64>>) -> Self {
        Self {
            velocity_row,
            trace: ProjectionTrace::new(dim),
        }
    }
}

/// `max(ρ(v), ρ(−v))` for a zonotope.
pub fn speed_bound(z: &Zonotope, velocity_row: &DVector<f64>) -> f64 {
    let neg: Vec<f64> = velocity_row.iter().map(|c| -c).collect();
    z.support_unchecked(velocity_row.as_slice())
        .max(z.support_unchecked(&neg))
}

impl RunObserver for ProjectionRecorder {
    fn on_flowpipe(&mut self, index: usize, flowpipe: &Flowpipe) {
        for (k, (time, z)) in flowpipe.iter().enumerate() {
            let speed = self.velocity_row.as_ref().map_or(0.0, |v| speed_bound(z, v));
            self.trace.push(index, k, time, z, speed);
        }
    }
}
