//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Failing criteria do not fail the binary unless `--strict` is passed
//! (`cargo test --test acceptance -- --strict`).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use periodic_reach::cli::{run_scenario, AnalysisReport, ModelParams, RunFlags, Scenario};
use periodic_reach::hybrid_engine::compute_transition_indices;
use periodic_reach::models::Jitter;
use periodic_reach::{reach_periodic_exact, Algorithm, ReachOptions};

/// Trajectories per scenario in the soundness gate.
const SOUNDNESS_TRAJECTORIES: usize = 100;
const SOUNDNESS_BUDGET_S: f64 = 300.0;
const EXACT_RATIO_MIN: f64 = 1e4;
const SCALING_RANGE: (f64, f64) = (8.0, 12.0);
const DIAMETER_FACTOR: f64 = 2.0;
const T_C_RANGE_MS: (f64, f64) = (80.0, 95.0);
const V_R_RANGE_MM_S: (f64, f64) = (0.7, 0.9);
const ORDER_GAIN_MIN: f64 = 10.0;
const CLOSED_FORM_RTOL: f64 = 1e-9;
const RUNTIME_LIMIT_S: f64 = 10.0;
const BENCHMARK_JITTER: (f64, f64) = (-1e-8, 1e-7);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.json"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn set_zeta(s: &mut Scenario, lo: f64, hi: f64) {
    let zeta = Jitter::new(lo, hi).unwrap();
    match &mut s.model {
        ModelParams::Emb(p) => p.zeta = zeta,
        ModelParams::Simple(p) => p.zeta = zeta,
    }
}

fn run(s: &Scenario, oracle: usize) -> AnalysisReport {
    s.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
    let t = Instant::now();
    let report = run_scenario(s, RunFlags { oracle, dry_run: true }).unwrap_or_else(|e| panic!("{}: {e}", s.name));
    eprintln!("  [{}] δ={:e} order={:?} oracle={oracle}: {:.1} s", s.name, s.delta, s.max_order, t.elapsed().as_secs_f64());
    report
}

fn diameter(r: &AnalysisReport, var: &str) -> f64 {
    r.metrics.final_diameters[&format!("final_diameter_{var}")]
}

fn within_factor(value: f64, reference: f64, factor: f64) -> bool {
    value <= reference * factor && value >= reference / factor
}

/// Reach runs shared between criteria, keyed by a label.
#[derive(Default)]
struct Runs(BTreeMap<String, AnalysisReport>);

impl Runs {
    fn get(&mut self, key: &str, make: impl FnOnce() -> Scenario) -> &AnalysisReport {
        if !self.0.contains_key(key) {
            let report = run(&make(), 0);
            self.0.insert(key.to_string(), report);
        }
        &self.0[key]
    }

    fn nopv(&mut self, delta: f64) -> &AnalysisReport {
        self.get(&format!("nopv {delta:e}"), || {
            let mut s = config("emb_nopv");
            s.delta = delta;
            s
        })
    }

    fn jitter(&mut self, delta: f64) -> &AnalysisReport {
        self.get(&format!("jitter {delta:e}"), || {
            let mut s = config("emb_jitter");
            s.delta = delta;
            set_zeta(&mut s, BENCHMARK_JITTER.0, BENCHMARK_JITTER.1);
            s
        })
    }

    fn exact(&mut self) -> &AnalysisReport {
        self.get("exact", || config("emb_exact"))
    }

    fn pv(&mut self, name: &str, order: f64) -> &AnalysisReport {
        self.get(&format!("{name} order {order}"), || {
            let mut s = config(name);
            s.max_order = Some(order);
            s
        })
    }
}

fn soundness() -> Outcome {
    let start = Instant::now();
    let mut scenarios = vec![config("simple_det"), config("simple_jitter"), config("simple_pv")];
    for name in ["emb_nopv", "emb_pv1", "emb_pv2"] {
        for jitter in [false, true] {
            let mut s = config(name);
            s.delta = 1e-7;
            if jitter {
                s.name = format!("{name}_jitter");
                set_zeta(&mut s, BENCHMARK_JITTER.0, BENCHMARK_JITTER.1);
            }
            scenarios.push(s);
        }
    }
    let mut failures = Vec::new();
    let mut points = 0;
    for s in &scenarios {
        let report = run(s, SOUNDNESS_TRAJECTORIES);
        let oracle = report.oracle.as_ref().expect("oracle report");
        points += oracle.checked;
        if !oracle.is_sound() {
            failures.push(format!("{} ({} violations)", s.name, oracle.violations.len()));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let detail = format!(
        "{} scenarios x {SOUNDNESS_TRAJECTORIES} trajectories, {points} points, violations in [{}], {elapsed:.0} s (limit {SOUNDNESS_BUDGET_S} s)",
        scenarios.len(),
        failures.join(", ")
    );
    outcome(failures.is_empty() && elapsed <= SOUNDNESS_BUDGET_S, detail)
}

fn exact_collapse(runs: &mut Runs) -> Outcome {
    let approx = diameter(runs.nopv(1e-8), "I");
    let exact = diameter(runs.exact(), "I");
    let ratio = approx / exact;
    outcome(
        ratio >= EXACT_RATIO_MIN,
        format!("diam I glgm06 {approx:.4e}, exact {exact:.4e}, ratio {ratio:.3e} (need >= {EXACT_RATIO_MIN:e})"),
    )
}

fn delta_scaling(runs: &mut Runs) -> Outcome {
    let d: Vec<f64> = [1e-7, 1e-8, 1e-9].iter().map(|&delta| diameter(runs.nopv(delta), "I")).collect();
    let f1 = d[0] / d[1];
    let f2 = d[1] / d[2];
    let ok = |f: f64| (SCALING_RANGE.0..=SCALING_RANGE.1).contains(&f);
    outcome(
        ok(f1) && ok(f2),
        format!(
            "diam I {:.4} / {:.4} / {:.4}, factors {f1:.3}, {f2:.3} (need [{}, {}])",
            d[0], d[1], d[2], SCALING_RANGE.0, SCALING_RANGE.1
        ),
    )
}

fn absolute_diameters(runs: &mut Runs) -> Outcome {
    // (label, δ, reference I, reference x)
    let rows: [(&str, f64, f64, f64); 7] = [
        ("no 1e-7", 1e-7, 13.707, 73.519e-5),
        ("no 1e-8", 1e-8, 1.369, 7.343e-5),
        ("no 1e-9", 1e-9, 0.137, 0.7343e-5),
        ("exact 1e-8", 1e-8, 9.78e-6, 0.0000471e-5),
        ("jitter 1e-7", 1e-7, 54.71, 293e-5),
        ("jitter 1e-8", 1e-8, 17.75, 95.183e-5),
        ("jitter 1e-9", 1e-9, 16.56, 88.8e-5),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, delta, ref_i, ref_x) in rows {
        let r = if label.starts_with("exact") {
            runs.exact()
        } else if label.starts_with("jitter") {
            runs.jitter(delta)
        } else {
            runs.nopv(delta)
        };
        let (i, x) = (diameter(r, "I"), diameter(r, "x"));
        let ok = within_factor(i, ref_i, DIAMETER_FACTOR) && within_factor(x, ref_x, DIAMETER_FACTOR);
        pass &= ok;
        parts.push(format!(
            "{label}: I {i:.4e}/{ref_i:.4e} x {x:.4e}/{ref_x:.4e}{}",
            if ok { "" } else { " OUT" }
        ));
    }
    outcome(pass, format!("{} (factor {DIAMETER_FACTOR})", parts.join("; ")))
}

fn requirement_values(runs: &mut Runs) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for delta in [1e-8, 1e-9] {
        let req = runs.nopv(delta).requirement.expect("requirement");
        let t_c = req.t_c.map(|t| t * 1e3);
        let v_r = req.v_r.map(|v| v * 1e3);
        let ok = req.verified
            && t_c.is_some_and(|t| (T_C_RANGE_MS.0..=T_C_RANGE_MS.1).contains(&t))
            && v_r.is_some_and(|v| (V_R_RANGE_MM_S.0..=V_R_RANGE_MM_S.1).contains(&v));
        pass &= ok;
        parts.push(format!(
            "δ={delta:e}: verified {} t_c {:?} ms v_r {:?} mm/s",
            req.verified, t_c, v_r
        ));
    }
    outcome(
        pass,
        format!(
            "{} (need t_c in [{}, {}] ms, v_r in [{}, {}] mm/s)",
            parts.join("; "),
            T_C_RANGE_MS.0,
            T_C_RANGE_MS.1,
            V_R_RANGE_MM_S.0,
            V_R_RANGE_MM_S.1
        ),
    )
}

fn order_effect(runs: &mut Runs) -> Outcome {
    let d: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&q| diameter(runs.pv("emb_pv1", q), "I")).collect();
    let gain = d[0] / d[1];
    outcome(
        gain >= ORDER_GAIN_MIN && d[2] <= d[1],
        format!(
            "pv1 diam I order 1/2/3 = {:.6} / {:.6} / {:.6}, gain 1->2 {gain:.3} (need >= {ORDER_GAIN_MIN}), 3 <= 2: {}",
            d[0],
            d[1],
            d[2],
            d[2] <= d[1]
        ),
    )
}

fn pv2_orders(runs: &mut Runs) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (order, expected) in [(1.0, false), (2.0, true), (3.0, true)] {
        let r = runs.pv("emb_pv2", order);
        let verified = r.verified().expect("requirement");
        pass &= verified == expected;
        parts.push(format!(
            "order {order}: verified {verified} (want {expected}), diam I {:.3}",
            diameter(r, "I")
        ));
    }
    outcome(pass, format!("{} at ε=0.02", parts.join("; ")))
}

fn closed_form() -> Outcome {
    let s = config("simple_det");
    let phs = s.build_system().unwrap();
    let run = reach_periodic_exact(&phs, &ReachOptions::new(s.delta, Algorithm::Exact)).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (j, jump) in run.jumps.iter().enumerate() {
        let k = j as i32 + 1;
        if k > 5 {
            break;
        }
        let expected = 2f64.powi(k) * 10.0 * (-f64::from(k)).exp();
        let (lo, hi) = jump.post_reset.axis_bounds(0);
        let err = (lo - expected).abs().max((hi - expected).abs()) / expected;
        worst = worst.max(err);
        checked += 1;
    }
    outcome(
        checked == 5 && worst <= CLOSED_FORM_RTOL,
        format!("{checked} jump seeds, worst relative error {worst:.3e} (need <= {CLOSED_FORM_RTOL:e})"),
    )
}

fn performance(runs: &mut Runs) -> Outcome {
    let t = runs.nopv(1e-7).metrics.runtime_s;
    outcome(t < RUNTIME_LIMIT_S, format!("EMB no-pv δ=1e-7 reach loop {t:.3} s (limit {RUNTIME_LIMIT_S} s)"))
}

/// Frames `[kδ, (k+1)δ]` on an integer grid that meet the window
/// `[lo, hi]` in more than a point; for a point window, the frame ending
/// at or strictly containing it.
fn grid_frames(lo: i64, hi: i64, d: i64) -> (usize, usize) {
    let frames: Vec<i64> = (0..(hi / d + 2))
        .filter(|&k| {
            let (a, b) = (k * d, (k + 1) * d);
            if lo == hi {
                b == lo || (a < lo && lo < b)
            } else {
                a.max(lo) < b.min(hi)
            }
        })
        .collect();
    (*frames.first().unwrap() as usize, *frames.last().unwrap() as usize + 1)
}

fn transition_indices() -> Outcome {
    // values in hundredths of a second
    let cases = [(100, 0, 0, 10), (100, 0, 0, 9), (100, -10, 10, 5)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (t, lo, hi, d) in cases {
        let expected = grid_frames(t + lo, t + hi, d);
        let got = compute_transition_indices(
            t as f64 / 100.0,
            Jitter::new(lo as f64 / 100.0, hi as f64 / 100.0).unwrap(),
            d as f64 / 100.0,
        )
        .unwrap();
        pass &= got == expected;
        parts.push(format!("δ={}: {got:?} vs grid {expected:?}", d as f64 / 100.0));
    }
    outcome(pass, parts.join("; "))
}

fn main() {
    let strict = std::env::args().any(|a| a == "--strict");
    let mut runs = Runs::default();
    // cheap criteria first; the soundness gate runs last so its wall time
    // is not shared with the cached reach runs
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (10, "transition indices", transition_indices()),
        (8, "running-example closed form", closed_form()),
        (9, "performance", performance(&mut runs)),
        (3, "δ-scaling law", delta_scaling(&mut runs)),
        (2, "exact-mode collapse", exact_collapse(&mut runs)),
        (5, "requirement values", requirement_values(&mut runs)),
        (4, "absolute diameters", absolute_diameters(&mut runs)),
        (6, "order effect pv1", order_effect(&mut runs)),
        (7, "pv2 order-1 failure", pv2_orders(&mut runs)),
    ];
    results.push((1, "soundness suite", soundness()));
    results.sort_by_key(|r| r.0);

    println!();
    for (n, name, o) in &results {
        println!("{} criterion {n:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
