//! Scenario files: JSON documents describing one analysis.
//!
//! ```json
//! {
//!   "name": "emb_nopv",
//!   "model": "emb",
//!   "model_params": { "r": 0.5, "l": 0.001, ... },
//!   "variation": { "kind": "none" },
//!   "algorithm": "glgm06",
//!   "delta": 1e-7,
//!   "requirement": { "epsilon": 0.002, "x0": 0.05 }
//! }
//! ```

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::discretization::Dynamics;
use crate::error::{ReachError, Result};
use crate::hybrid_engine::{compute_transition_indices, Algorithm, ReachOptions};
use crate::models::{build_emb, build_simple, EmbParams, Jitter, PeriodicHybridSystem, Variation, EMB_PV1_ENTRY};
use crate::set_calculus::IntervalMatrix;
use crate::verification::Requirement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Simple,
    Emb,
}

/// Parameters of the running example `ẋ = −x`, `x' := 2x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimpleParams {
    pub x0: f64,
    pub t_sample: f64,
    #[serde(default = "no_jitter")]
    pub zeta: Jitter,
    pub horizon: f64,
}

fn no_jitter() -> Jitter {
    Jitter::NONE
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Simple(SimpleParams),
    Emb(EmbParams),
}

impl ModelParams {
    pub fn zeta(&self) -> Jitter {
        match self {
            ModelParams::Simple(p) => p.zeta,
            ModelParams::Emb(p) => p.zeta,
        }
    }
}

/// Contact requirement `|x − x0| ≤ epsilon` from `t_c` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementConfig {
    pub epsilon: f64,
    pub x0: f64,
    /// Position variable; defaults to `x`.
    #[serde(default)]
    pub variable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the working directory.
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write the per-frame bounds CSV (can be large for small δ).
    #[serde(default = "yes")]
    pub bounds: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from(".")
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            bounds: true,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario<'a> {
    name: String,
    model: ModelKind,
    #[serde(borrow)]
    model_params: &'a RawValue,
    #[serde(default = "no_variation")]
    variation: Variation,
    algorithm: Algorithm,
    delta: f64,
    #[serde(default)]
    max_order: Option<f64>,
    #[serde(default = "one")]
    splits: usize,
    #[serde(default)]
    split_entry: Option<(usize, usize)>,
    #[serde(default)]
    taylor_order: Option<usize>,
    #[serde(default)]
    requirement: Option<RequirementConfig>,
    #[serde(default)]
    oracle_seed: u64,
    #[serde(default)]
    output: OutputConfig,
}

fn no_variation() -> Variation {
    Variation::None
}

fn one() -> usize {
    1
}

/// A validated analysis scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: ModelParams,
    pub variation: Variation,
    pub algorithm: Algorithm,
    pub delta: f64,
    /// `None` means no order cap.
    pub max_order: Option<f64>,
    pub splits: usize,
    pub split_entry: Option<(usize, usize)>,
    pub taylor_order: Option<usize>,
    pub requirement: Option<RequirementConfig>,
    pub oracle_seed: u64,
    pub output: OutputConfig,
}

fn config_err(location: impl Into<String>, message: impl Into<String>) -> ReachError {
    ReachError::Config {
        location: location.into(),
        message: message.into(),
    }
}

fn json_err(source: &str, e: &serde_json::Error, line_offset: usize) -> ReachError {
    let line = e.line() + line_offset;
    let mut message = e.to_string();
    // serde_json appends its own position; restate it relative to the file
    if let Some(idx) = message.rfind(" at line ") {
        message.truncate(idx);
    }
    config_err(format!("{source}:{line}:{}", e.column()), message)
}

impl Scenario {
    /// Parses and validates a scenario document. `source` labels diagnostics.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| json_err(source, &e, 0))?;
        let params_text = raw.model_params.get();
        let offset = params_text.as_ptr() as usize - text.as_ptr() as usize;
        let base_line = text[..offset].matches('\n').count();
        let model = match raw.model {
            ModelKind::Simple => ModelParams::Simple(
                serde_json::from_str(params_text).map_err(|e| json_err(source, &e, base_line))?,
            ),
            ModelKind::Emb => ModelParams::Emb(
                serde_json::from_str(params_text).map_err(|e| json_err(source, &e, base_line))?,
            ),
        };
        let scenario = Scenario {
            name: raw.name,
            model,
            variation: raw.variation,
            algorithm: raw.algorithm,
            delta: raw.delta,
            max_order: raw.max_order,
            splits: raw.splits,
            split_entry: raw.split_entry,
            taylor_order: raw.taylor_order,
            requirement: raw.requirement,
            oracle_seed: raw.oracle_seed,
            output: raw.output,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Checks the cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            return Err(config_err(
                "name",
                "must be nonempty and use only letters, digits, '_', '-' or '.'",
            ));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(config_err("delta", format!("must be > 0, got {}", self.delta)));
        }
        if let Some(q) = self.max_order {
            if !(q >= 1.0) {
                return Err(config_err("max_order", format!("must be >= 1, got {q}")));
            }
        }
        if self.splits == 0 {
            return Err(config_err("splits", "must be >= 1"));
        }
        if let Some(p) = self.taylor_order {
            if p < 2 {
                return Err(config_err("taylor_order", format!("must be >= 2, got {p}")));
            }
        }
        let parametric = self.variation != Variation::None;
        if parametric && self.algorithm != Algorithm::Asb07 {
            return Err(config_err(
                "algorithm",
                "parameter variation requires the asb07 algorithm",
            ));
        }
        if self.algorithm == Algorithm::Exact && !self.model.zeta().is_deterministic() {
            return Err(config_err(
                "algorithm",
                "exact mode requires deterministic switching (zeta = [0, 0])",
            ));
        }
        if self.splits > 1 && !parametric {
            return Err(config_err("splits", "splitting requires parameter variation"));
        }
        if let (ModelParams::Simple(_), Variation::Pv2 { .. }) = (&self.model, self.variation) {
            return Err(config_err(
                "variation",
                "pv2 varies physical parameters and is only defined for the emb model",
            ));
        }
        if let Some(req) = &self.requirement {
            if !(req.epsilon > 0.0) {
                return Err(config_err("requirement.epsilon", "must be > 0"));
            }
        }
        // building the system runs the model-level checks
        let phs = self.build_system().map_err(|e| config_err("model_params", e.to_string()))?;
        compute_transition_indices(phs.t_sample, phs.zeta, self.delta)
            .map_err(|e| config_err("delta", e.to_string()))?;
        if let Some(entry) = self.split_entry {
            if entry.0 >= phs.dim() || entry.1 >= phs.dim() {
                return Err(config_err("split_entry", "entry out of range"));
            }
        }
        if let Some(req) = &self.requirement {
            let var = req.variable.as_deref().unwrap_or("x");
            if phs.variable_index(var).is_none() {
                return Err(config_err(
                    "requirement.variable",
                    format!("unknown variable `{var}`"),
                ));
            }
        }
        Ok(())
    }

    /// Builds the periodic system described by the scenario.
    pub fn build_system(&self) -> Result<PeriodicHybridSystem> {
        match &self.model {
            ModelParams::Emb(p) => build_emb(p, self.variation),
            ModelParams::Simple(p) => {
                let mut phs = build_simple(p.x0, p.t_sample, p.zeta, p.horizon)?;
                if let Variation::Pv1 { width } = self.variation {
                    if !(width > 0.0) || !width.is_finite() {
                        return Err(ReachError::input(format!("pv1 width must be > 0, got {width}")));
                    }
                    let a = phs.dynamics.midpoint()[(0, 0)];
                    let im = IntervalMatrix::from_scalar(phs.dynamics.midpoint().clone())?.with_entry(
                        0,
                        0,
                        a - 0.5 * width,
                        a + 0.5 * width,
                    )?;
                    phs.dynamics = Dynamics::Interval(im);
                }
                Ok(phs)
            }
        }
    }

    /// Interval entry split by `splits > 1`.
    pub fn split_entry(&self) -> (usize, usize) {
        self.split_entry.unwrap_or(match self.model {
            ModelParams::Emb(_) => EMB_PV1_ENTRY,
            ModelParams::Simple(_) => (0, 0),
        })
    }

    pub fn reach_options(&self) -> ReachOptions {
        let mut opts = ReachOptions::new(self.delta, self.algorithm);
        opts.max_order = self.max_order.unwrap_or(f64::INFINITY);
        opts.taylor_order = self.taylor_order;
        opts
    }

    /// The requirement in engine terms; speed is the derivative of the
    /// position variable under the nominal dynamics.
    pub fn requirement(&self, phs: &PeriodicHybridSystem) -> Option<Requirement> {
        let req = self.requirement.as_ref()?;
        let var = req.variable.as_deref().unwrap_or("x");
        let position_index = phs.variable_index(var)?;
        let row = phs.dynamics.midpoint().row(position_index).transpose();
        Some(Requirement {
            epsilon: req.epsilon,
            x0: req.x0,
            position_index,
            velocity_row: DVector::from_iterator(row.len(), row.iter().copied()),
        })
    }

    pub fn bounds_path(&self) -> PathBuf {
        self.output.dir.join(format!("{}.bounds.csv", self.name))
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.output.dir.join(format!("{}.metrics.json", self.name))
    }
}
