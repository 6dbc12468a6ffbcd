//! Simulated trajectories must stay inside the computed sets for every
//! shipped scenario family, at coarser steps and shorter horizons than the
//! shipped configurations.

use std::path::Path;

use periodic_reach::cli::{run_scenario, ModelParams, RunFlags, Scenario};
use periodic_reach::models::Jitter;
use periodic_reach::Algorithm;

fn load(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"));
    Scenario::load(&path).unwrap()
}

fn check(mut s: Scenario, delta: f64, horizon: Option<f64>, trajectories: usize) {
    s.delta = delta;
    if let (Some(h), ModelParams::Emb(p)) = (horizon, &mut s.model) {
        p.horizon = h;
    }
    s.validate().unwrap();
    let report = run_scenario(&s, RunFlags { oracle: trajectories, dry_run: true }).unwrap();
    let oracle = report.oracle.as_ref().unwrap();
    assert!(oracle.checked > trajectories * 100, "{}: {} points", s.name, oracle.checked);
    assert!(
        oracle.is_sound(),
        "{}: {} violations, first {:?}",
        s.name,
        oracle.violations.len(),
        oracle.violations.first()
    );
}

#[test]
fn simple_family() {
    for name in ["simple_det", "simple_jitter", "simple_pv"] {
        check(load(name), 0.01, None, 40);
    }
    let mut s = load("simple_det");
    s.algorithm = Algorithm::Asb07;
    check(s, 0.05, None, 10);
}

#[test]
fn simple_with_asymmetric_jitter() {
    let mut s = load("simple_jitter");
    if let ModelParams::Simple(p) = &mut s.model {
        p.zeta = Jitter::new(-0.05, 0.23).unwrap();
    }
    check(s, 0.01, None, 40);
}

#[test]
fn emb_nominal_and_jitter() {
    check(load("emb_nopv"), 1e-6, Some(0.02), 12);
    check(load("emb_jitter"), 1e-6, Some(0.02), 12);
    let mut s = load("emb_exact");
    s.output.bounds = false;
    check(s, 1e-6, Some(0.02), 4);
}

#[test]
fn emb_parameter_variation() {
    check(load("emb_pv1"), 1e-6, Some(0.01), 12);
    check(load("emb_pv2"), 1e-6, Some(0.01), 12);
    let mut s = load("emb_pv1");
    s.splits = 3;
    check(s, 1e-6, Some(0.01), 12);
}
