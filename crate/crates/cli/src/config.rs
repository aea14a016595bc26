//! JSON experiment configuration: schema, presets, validation.

use serde::{Deserialize, Serialize};

use dofw_core::algorithms::{Algorithm, DogdGradientPoint, StepSchedule};
use dofw_core::feasible::FeasibleSet;
use dofw_core::network::{generate_schedule, verify_assumption1, Topology};

use crate::CliError;

/// Top-level experiment description. `seed` is mandatory; block-level seeds
/// default to values derived from it so a single `--seed` override moves the
/// whole experiment deterministically.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Run horizons; falls back to `loss.T` when empty.
    #[serde(default)]
    pub horizons: Vec<usize>,
    /// Optional dimension sweep overriding `loss.d` and `set.d`.
    #[serde(default)]
    pub dims: Vec<usize>,
    pub network: NetworkConfig,
    pub loss: LossConfig,
    pub set: SetConfig,
    /// (algorithm, step) cells; a single top-level `algorithm`/`step` pair is
    /// accepted as shorthand.
    #[serde(default)]
    pub runs: Vec<RunCell>,
    #[serde(default)]
    pub algorithm: Option<String>,
    #[serde(default)]
    pub step: Option<StepConfig>,
    #[serde(default = "default_comparator_tol")]
    pub comparator_tol: f64,
    #[serde(default)]
    pub emit: EmitConfig,
}

fn default_comparator_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub topology: String,
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// "ridge" or "static" (one frozen ridge round).
    pub kind: String,
    pub d: usize,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(rename = "T", default)]
    pub t: Option<usize>,
    #[serde(default)]
    pub static_features: bool,
}

fn default_lambda1() -> f64 {
    5e-6
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SetConfig {
    /// "simplex", "l1_ball" or "box".
    pub kind: String,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunCell {
    pub algorithm: String,
    pub step: StepConfig,
    /// DOGD gradient point: "mixed" (default) or "premix".
    #[serde(default)]
    pub gradient_at: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum StepConfig {
    #[serde(rename = "constant")]
    Constant { alpha: f64 },
    #[serde(rename = "power")]
    Power { c: f64, theta: f64 },
    #[serde(rename = "corollary1", alias = "horizon_sqrt")]
    HorizonSqrt {
        gamma: f64,
        #[serde(default)]
        h_estimate: f64,
    },
}

impl StepConfig {
    pub fn to_schedule(&self) -> StepSchedule<f64> {
        match *self {
            StepConfig::Constant { alpha } => StepSchedule::Constant(alpha),
            StepConfig::Power { c, theta } => StepSchedule::Power { coeff: c, exponent: theta },
            StepConfig::HorizonSqrt { gamma, h_estimate } => {
                StepSchedule::HorizonSqrt { gamma, h_estimate }
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            StepConfig::Constant { alpha } => format!("const{alpha}"),
            StepConfig::Power { c, theta } => format!("power{c}-{theta}"),
            StepConfig::HorizonSqrt { gamma, h_estimate } => {
                format!("sqrt{gamma}-{h_estimate}")
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EmitConfig {
    #[serde(default = "yes")]
    pub trace: bool,
    #[serde(default = "yes")]
    pub regret: bool,
    #[serde(default = "yes")]
    pub diagnostics: bool,
    #[serde(default = "yes")]
    pub budgets: bool,
    #[serde(default)]
    pub stream: bool,
    #[serde(default)]
    pub schedule: bool,
}

fn yes() -> bool {
    true
}

impl Default for EmitConfig {
    fn default() -> Self {
        EmitConfig {
            trace: true,
            regret: true,
            diagnostics: true,
            budgets: true,
            stream: false,
            schedule: false,
        }
    }
}

/// Shipped preset configurations, embedded so the binary has no path
/// dependence.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "fig1" => Some(include_str!("../presets/fig1.json")),
        "fig2" => Some(include_str!("../presets/fig2.json")),
        "fig3" => Some(include_str!("../presets/fig3.json")),
        _ => None,
    }
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// Outcome of structural validation plus pre-run certification of the
/// generated schedules.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub errors: Vec<String>,
}

impl ExperimentConfig {
    pub fn network_seed(&self) -> u64 {
        self.network.seed.unwrap_or(self.seed.wrapping_add(1))
    }

    pub fn loss_seed(&self) -> u64 {
        self.loss.seed.unwrap_or(self.seed.wrapping_add(2))
    }

    pub fn topology(&self) -> Result<Topology, CliError> {
        match self.network.topology.as_str() {
            "cycle_split" => Ok(Topology::CycleSplit),
            "random_gossip" => Ok(Topology::RandomGossip),
            "static_complete" => Ok(Topology::StaticComplete),
            other => Err(CliError::Config(format!(
                "network.topology: unknown topology {other:?}"
            ))),
        }
    }

    /// Effective (algorithm, step) cells, folding in the singleton shorthand.
    pub fn cells(&self) -> Result<Vec<(Algorithm, StepConfig, DogdGradientPoint)>, CliError> {
        let mut cells = Vec::new();
        let mut push = |algorithm: &str, step: &StepConfig, gradient_at: Option<&str>| {
            let alg = match algorithm {
                "dofw" => Algorithm::Dofw,
                "dogd" => Algorithm::Dogd,
                other => {
                    return Err(CliError::Config(format!(
                        "runs.algorithm: unknown algorithm {other:?}"
                    )))
                }
            };
            let gp = match gradient_at {
                None | Some("mixed") => DogdGradientPoint::Mixed,
                Some("premix") => DogdGradientPoint::Premix,
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "runs.gradient_at: unknown gradient point {other:?}"
                    )))
                }
            };
            cells.push((alg, step.clone(), gp));
            Ok(())
        };
        for cell in &self.runs {
            push(&cell.algorithm, &cell.step, cell.gradient_at.as_deref())?;
        }
        if let (Some(alg), Some(step)) = (&self.algorithm, &self.step) {
            push(alg, step, None)?;
        }
        if cells.is_empty() {
            return Err(CliError::Config(
                "runs: at least one (algorithm, step) cell is required".into(),
            ));
        }
        Ok(cells)
    }

    /// Dimensions to sweep; `dims` overrides the block-level `d`s.
    pub fn effective_dims(&self) -> Vec<usize> {
        if self.dims.is_empty() {
            vec![self.loss.d]
        } else {
            self.dims.clone()
        }
    }

    pub fn effective_horizons(&self) -> Result<Vec<usize>, CliError> {
        if !self.horizons.is_empty() {
            return Ok(self.horizons.clone());
        }
        if let Some(t) = self.loss.t {
            return Ok(vec![t]);
        }
        Err(CliError::Config(
            "horizons: provide a top-level horizon list or loss.T".into(),
        ))
    }

    pub fn build_set(&self, dim: usize) -> Result<FeasibleSet<f64>, CliError> {
        let set = match self.set.kind.as_str() {
            "simplex" => FeasibleSet::simplex(dim),
            "l1_ball" => {
                let radius = self.set.radius.ok_or_else(|| {
                    CliError::Config("set.radius: required for l1_ball".into())
                })?;
                FeasibleSet::l1_ball(dim, radius)
            }
            "box" => {
                let lo = self
                    .set
                    .lo
                    .ok_or_else(|| CliError::Config("set.lo: required for box".into()))?;
                let hi = self
                    .set
                    .hi
                    .ok_or_else(|| CliError::Config("set.hi: required for box".into()))?;
                FeasibleSet::boxed(dim, lo, hi)
            }
            other => {
                return Err(CliError::Config(format!("set.kind: unknown set {other:?}")))
            }
        };
        set.map_err(|e| CliError::Config(format!("set: {e}")))
    }

    /// Structural checks plus certification of the mixing assumptions on the
    /// schedule each horizon would use.
    pub fn validate(&self) -> ValidationReport {
        let mut errors = Vec::new();

        if let Some(loss_n) = self.loss.n {
            if loss_n != self.network.n {
                errors.push(format!(
                    "network.n = {} and loss.n = {loss_n} disagree",
                    self.network.n
                ));
            }
        }
        if self.dims.is_empty() {
            if let Some(set_d) = self.set.d {
                if set_d != self.loss.d {
                    errors.push(format!(
                        "loss.d = {} and set.d = {set_d} disagree",
                        self.loss.d
                    ));
                }
            }
        }
        match self.loss.kind.as_str() {
            "ridge" | "static" => {}
            other => errors.push(format!("loss.kind: unknown loss {other:?}")),
        }
        if !(self.loss.lambda1 >= 0.0) {
            errors.push("loss.lambda1: must be >= 0".into());
        }
        if !(self.comparator_tol > 0.0) {
            errors.push("comparator_tol: must be > 0".into());
        }
        if let Err(e) = self.topology() {
            errors.push(e.to_string());
        }
        let horizons = match self.effective_horizons() {
            Ok(h) => h,
            Err(e) => {
                errors.push(e.to_string());
                Vec::new()
            }
        };
        for dim in self.effective_dims() {
            if dim == 0 {
                errors.push("dims: dimensions must be >= 1".into());
            }
            if let Err(e) = self.build_set(dim) {
                errors.push(e.to_string());
            }
        }
        match self.cells() {
            Ok(cells) => {
                for (idx, (_, step, _)) in cells.iter().enumerate() {
                    for &t in &horizons {
                        if let Err(e) = step.to_schedule().alpha_at(t) {
                            errors.push(format!("runs[{idx}].step at T={t}: {e}"));
                        }
                    }
                }
            }
            Err(e) => errors.push(e.to_string()),
        }

        // Generate and certify the longest-horizon schedule; shorter runs use
        // prefixes of the same construction.
        if errors.is_empty() {
            if let (Ok(topology), Some(&t_max)) = (self.topology(), horizons.iter().max()) {
                match generate_schedule::<f64>(
                    self.network.n,
                    t_max,
                    self.network.q,
                    self.network_seed(),
                    topology,
                ) {
                    Ok(schedule) => {
                        let report = verify_assumption1(&schedule);
                        if !report.ok {
                            for v in report.violations.iter().take(5) {
                                errors.push(format!("network: {v}"));
                            }
                        }
                    }
                    Err(e) => errors.push(format!("network: {e}")),
                }
            }
        }

        ValidationReport { ok: errors.is_empty(), errors }
    }
}
