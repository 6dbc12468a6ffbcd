//! Executes a scenario: reach loop, requirement, oracle, artifacts.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::Scenario;
use super::output::{write_metrics, write_trace_csv, CsvSink, Metrics, OracleSummary, RequirementSummary};
use crate::continuous_reach::Flowpipe;
use crate::error::{ReachError, Result};
use crate::hybrid_engine::{covered_horizon, reach_periodic_with, JumpRecord, RunObserver, RunStats};
use crate::models::{split_parametric, PeriodicHybridSystem};
use crate::sim_oracle::{
    instantiate, random_times, simulate_at, switch_schedule, uncertain_entries, ContainmentChecker,
    ContainmentReport, JitterMode,
};
use crate::verification::{
    set_diameter, FinalSetObserver, ProjectionRecorder, ProjectionTrace, Requirement, RequirementMonitor,
    RequirementResult,
};

/// Points sampled per oracle trajectory, on top of both sides of every switch.
pub const ORACLE_POINTS: usize = 1000;

const MODES: [JitterMode; 4] = [
    JitterMode::Random,
    JitterMode::Earliest,
    JitterMode::Latest,
    JitterMode::Alternating,
];

/// Run-time switches that are not part of the scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunFlags {
    /// Number of simulated trajectories to check against the run.
    pub oracle: usize,
    /// Skip writing files.
    pub dry_run: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub metrics: Metrics,
    pub requirement: Option<RequirementResult>,
    pub oracle: Option<ContainmentReport>,
}

impl AnalysisReport {
    pub fn verified(&self) -> Option<bool> {
        self.requirement.map(|r| r.verified)
    }

    pub fn is_sound(&self) -> bool {
        self.oracle.as_ref().is_none_or(ContainmentReport::is_sound)
    }
}

/// Simulated trajectories for the oracle. For parametric systems the first
/// half visits corners of the uncertain entries (as many as exist).
pub fn oracle_checker(phs: &PeriodicHybridSystem, t_end: f64, count: usize, seed: u64) -> Result<ContainmentChecker> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corners = match uncertain_entries(&phs.dynamics) {
        0 => 0,
        m if m >= 63 => count / 2,
        m => (1usize << m).min(count / 2),
    };
    let mut checker = ContainmentChecker::new();
    for i in 0..count {
        let corner = (i < corners).then_some(i as u64);
        let inst = instantiate(phs, corner, &mut rng)?;
        let schedule = switch_schedule(phs.t_sample, phs.zeta, t_end, MODES[i % MODES.len()], &mut rng);
        let times = random_times(ORACLE_POINTS, t_end, &mut rng);
        let traj = simulate_at(&inst, &schedule, phs.t_sample, phs.zeta, &times)?;
        checker.add_trajectory(&traj);
    }
    Ok(checker)
}

/// Observers of one reach loop. Time spent in `csv`, `oracle` and
/// `projection` is tracked so that it can be excluded from the runtime.
#[derive(Default)]
struct Pipeline {
    final_set: FinalSetObserver,
    requirement: Option<RequirementMonitor>,
    csv: Option<CsvSink>,
    oracle: Option<ContainmentChecker>,
    projection: Option<ProjectionRecorder>,
    jumps: usize,
    overhead: Duration,
}

impl RunObserver for Pipeline {
    fn on_flowpipe(&mut self, index: usize, fp: &Flowpipe) {
        self.final_set.on_flowpipe(index, fp);
        if let Some(m) = &mut self.requirement {
            m.on_flowpipe(index, fp);
        }
        let start = Instant::now();
        if let Some(c) = &mut self.csv {
            c.on_flowpipe(index, fp);
        }
        if let Some(o) = &mut self.oracle {
            o.on_flowpipe(index, fp);
        }
        if let Some(p) = &mut self.projection {
            p.on_flowpipe(index, fp);
        }
        self.overhead += start.elapsed();
    }

    fn on_jump(&mut self, _record: &JumpRecord) {
        self.jumps += 1;
    }
}

struct SplitOutcome {
    stats: RunStats,
    jumps: usize,
    trace: ProjectionTrace,
    oracle: Option<ContainmentReport>,
    runtime: Duration,
}

fn summarize_oracle(report: &ContainmentReport, trajectories: usize) -> OracleSummary {
    OracleSummary {
        trajectories,
        points: report.checked,
        violations: report.violations.len(),
        uncovered: report.uncovered.len(),
        first_violation: report
            .violations
            .iter()
            .min_by(|a, b| a.time.total_cmp(&b.time))
            .map(|v| (v.time, v.state.iter().copied().collect())),
    }
}

fn requirement_summary(phs: &PeriodicHybridSystem, req: &Requirement, result: RequirementResult) -> RequirementSummary {
    RequirementSummary {
        result,
        x0: req.x0,
        variable: phs.variable_names[req.position_index].clone(),
        t_c_convention: "start of the earliest reach set from which the band holds",
        v_r_window: "max |v| over reach sets whose time interval contains t_c",
    }
}

/// Runs `scenario` and writes its artifacts unless `flags.dry_run`.
pub fn run_scenario(scenario: &Scenario, flags: RunFlags) -> Result<AnalysisReport> {
    let phs = scenario.build_system()?;
    let opts = scenario.reach_options();
    let requirement = scenario.requirement(&phs);
    let write_files = !flags.dry_run;
    if write_files {
        std::fs::create_dir_all(&scenario.output.dir)?;
    }

    let (stats, jumps, diameters, req_result, oracle, csv_rows, runtime) = if scenario.splits > 1 {
        let parts = split_parametric(&phs, scenario.splits, scenario.split_entry())?;
        let velocity = requirement.as_ref().map(|r| r.velocity_row.clone());
        let outcomes: Vec<SplitOutcome> = parts
            .par_iter()
            .enumerate()
            .map(|(j, part)| {
                let mut pipeline = Pipeline {
                    projection: Some(ProjectionRecorder::new(part.dim(), velocity.clone())),
                    ..Pipeline::default()
                };
                if flags.oracle > 0 {
                    // trajectories are spread over the splits
                    let share = flags.oracle / parts.len() + usize::from(j < flags.oracle % parts.len());
                    let t_end = covered_horizon(part, &opts)?;
                    pipeline.oracle = Some(oracle_checker(part, t_end, share, scenario.oracle_seed + j as u64)?);
                }
                let start = Instant::now();
                let stats = reach_periodic_with(part, &opts, &mut pipeline)?;
                let runtime = start.elapsed().saturating_sub(pipeline.overhead);
                Ok(SplitOutcome {
                    stats,
                    jumps: pipeline.jumps,
                    trace: pipeline.projection.take().expect("projection recorder").trace,
                    oracle: pipeline.oracle.take().map(ContainmentChecker::finish),
                    runtime,
                })
            })
            .collect::<Result<_>>()?;

        let mut merged = outcomes[0].trace.clone();
        for o in &outcomes[1..] {
            merged = merged.envelope(&o.trace)?;
        }
        let diameters: Vec<f64> = (0..phs.dim())
            .map(|j| merged.final_diameter(j))
            .collect::<Result<_>>()?;
        let req_result = requirement
            .as_ref()
            .map(|r| merged.check_requirement(r))
            .transpose()?;
        let oracle = (flags.oracle > 0).then(|| {
            let mut all = ContainmentReport::default();
            for o in &outcomes {
                if let Some(r) = &o.oracle {
                    all.merge(r.clone());
                }
            }
            all
        });
        let csv_rows = if write_files && scenario.output.bounds {
            Some(write_trace_csv(&scenario.bounds_path(), &phs.variable_names, &merged)?)
        } else {
            None
        };
        let stats = RunStats {
            flowpipes: outcomes[0].stats.flowpipes,
            sets: outcomes[0].stats.sets,
        };
        let runtime: Duration = outcomes.iter().map(|o| o.runtime).sum();
        (stats, outcomes[0].jumps, diameters, req_result, oracle, csv_rows, runtime)
    } else {
        let mut pipeline = Pipeline {
            requirement: requirement.clone().map(RequirementMonitor::new),
            ..Pipeline::default()
        };
        if write_files && scenario.output.bounds {
            pipeline.csv = Some(CsvSink::create(&scenario.bounds_path(), &phs.variable_names)?);
        }
        if flags.oracle > 0 {
            let t_end = covered_horizon(&phs, &opts)?;
            pipeline.oracle = Some(oracle_checker(&phs, t_end, flags.oracle, scenario.oracle_seed)?);
        }
        let start = Instant::now();
        let stats = reach_periodic_with(&phs, &opts, &mut pipeline)?;
        let runtime = start.elapsed().saturating_sub(pipeline.overhead);
        let last = pipeline
            .final_set
            .last
            .take()
            .ok_or_else(|| ReachError::input("the run produced no reach sets"))?;
        let diameters: Vec<f64> = (0..phs.dim())
            .map(|j| set_diameter(&last, j))
            .collect::<Result<_>>()?;
        let req_result = pipeline.requirement.as_ref().map(RequirementMonitor::finish);
        let oracle = pipeline.oracle.take().map(ContainmentChecker::finish);
        let csv_rows = pipeline.csv.take().map(CsvSink::finish).transpose()?;
        (stats, pipeline.jumps, diameters, req_result, oracle, csv_rows, runtime)
    };

    let final_diameters: BTreeMap<String, f64> = phs
        .variable_names
        .iter()
        .zip(&diameters)
        .map(|(v, d)| (format!("final_diameter_{v}"), *d))
        .collect();
    let metrics = Metrics {
        name: scenario.name.clone(),
        model: match scenario.model {
            super::config::ModelParams::Simple(_) => "simple".into(),
            super::config::ModelParams::Emb(_) => "emb".into(),
        },
        algorithm: serde_json::to_value(scenario.algorithm)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        variation: serde_json::to_value(scenario.variation).unwrap_or(serde_json::Value::Null),
        delta: scenario.delta,
        max_order: scenario.max_order,
        splits: scenario.splits,
        flowpipes: stats.flowpipes,
        sets: stats.sets,
        jumps,
        csv_rows,
        final_diameters,
        requirement: requirement
            .as_ref()
            .zip(req_result)
            .map(|(r, res)| requirement_summary(&phs, r, res)),
        oracle: oracle.as_ref().map(|r| summarize_oracle(r, flags.oracle)),
        runtime_s: runtime.as_secs_f64(),
    };
    if write_files {
        write_metrics(&scenario.metrics_path(), &metrics)?;
    }
    Ok(AnalysisReport {
        metrics,
        requirement: req_result,
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(extra: &str, dir: &std::path::Path) -> Scenario {
        let text = format!(
            r#"{{
  "name": "t",
  "model": "simple",
  "model_params": {{ "x0": 10.0, "t_sample": 1.0, "horizon": 5.0 }},
  "output": {{ "dir": {dir:?} }},
  {extra}
}}"#
        );
        Scenario::parse(&text, "t.json").unwrap()
    }

    #[test]
    fn deterministic_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let s = scenario(r#""algorithm": "glgm06", "delta": 0.1"#, dir.path());
        let report = run_scenario(&s, RunFlags { oracle: 8, dry_run: false }).unwrap();
        let m = &report.metrics;
        assert_eq!(m.flowpipes, 6);
        assert_eq!(m.sets, 60);
        assert_eq!(m.csv_rows, Some(m.sets));
        assert!(report.is_sound());
        assert_eq!(report.verified(), None);
        let csv = std::fs::read_to_string(s.bounds_path()).unwrap();
        assert_eq!(csv.lines().count(), m.sets + 1);

        let first_json = std::fs::read_to_string(s.metrics_path()).unwrap();
        run_scenario(&s, RunFlags { oracle: 8, dry_run: false }).unwrap();
        assert_eq!(std::fs::read_to_string(s.bounds_path()).unwrap(), csv);
        let strip = |t: &str| t.lines().filter(|l| !l.contains("runtime_s")).collect::<Vec<_>>().join("\n");
        assert_eq!(strip(&std::fs::read_to_string(s.metrics_path()).unwrap()), strip(&first_json));
    }

    #[test]
    fn split_run_is_the_envelope() {
        let dir = tempfile::tempdir().unwrap();
        let pv = r#""algorithm": "asb07", "delta": 0.1, "variation": {"kind": "pv1", "width": 0.02}"#;
        let whole = scenario(pv, dir.path());
        let split = scenario(&format!(r#"{pv}, "splits": 2"#), dir.path());
        let dry = RunFlags { oracle: 0, dry_run: true };
        let a = run_scenario(&whole, dry).unwrap();
        let b = run_scenario(&split, RunFlags { oracle: 10, dry_run: true }).unwrap();
        assert_eq!(a.metrics.sets, b.metrics.sets);
        assert!(b.is_sound());
        let da = a.metrics.final_diameters["final_diameter_x"];
        let db = b.metrics.final_diameters["final_diameter_x"];
        assert!(db <= da + 1e-12);

        let phs = split.build_system().unwrap();
        let opts = split.reach_options();
        let parts = split_parametric(&phs, 2, (0, 0)).unwrap();
        let finals: Vec<(f64, f64)> = parts
            .iter()
            .map(|p| {
                let run = crate::hybrid_engine::reach_periodic(p, &opts).unwrap();
                run.last_set().unwrap().axis_bounds(0)
            })
            .collect();
        let lo = finals.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
        let hi = finals.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
        assert!((db - (hi - lo)).abs() <= 1e-12 * db.max(1.0));
    }

    #[test]
    fn oracle_uses_corners_for_parametric_systems() {
        let dir = tempfile::tempdir().unwrap();
        let s = scenario(r#""algorithm": "asb07", "delta": 0.1, "variation": {"kind": "pv1", "width": 0.02}"#, dir.path());
        let phs = s.build_system().unwrap();
        let a = oracle_checker(&phs, 3.0, 6, 1).unwrap().finish();
        let b = oracle_checker(&phs, 3.0, 6, 1).unwrap().finish();
        assert_eq!(a.checked, b.checked);
        assert!(a.checked >= 6 * ORACLE_POINTS);
    }

    #[test]
    fn dry_run_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("never");
        let s = scenario(r#""algorithm": "exact", "delta": 0.1"#, &out);
        let report = run_scenario(&s, RunFlags { oracle: 0, dry_run: true }).unwrap();
        assert!(!out.exists());
        assert_eq!(report.metrics.csv_rows, None);
        assert_eq!(report.metrics.jumps, 5);
    }
}
