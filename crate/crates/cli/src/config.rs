//! Scenario configuration files.
//!
//! Configs are TOML. Unknown keys are rejected. A minimal single-strain
//! file looks like
//!
//! ```toml
//! [grid]
//! horizon = 730.0
//! dt = 0.05
//!
//! [initial]
//! susceptible = 217e6        # or: population = 217000255.0
//!
//! [[strains]]
//! beta = 2.41e-9
//! sigma = 0.14285714285714285
//! gamma = 0.047619047619047616
//! delta = 0.011111111111111112
//! mu = 1.152e-5
//! exposed = 252.0
//! infected = 2.0
//! removed = 1.0
//!
//! [control]
//! mode = "none"
//! ```
//!
//! Strains that activate after `grid.t0` start empty and receive their
//! `seed` (default 252 exposed, 2 infected, 1 removed) at activation.
//! `beta_ratio` may replace `beta` on any strain after the first; it scales
//! the first strain's rate. See `presets` for complete commented examples.

use std::path::{Path, PathBuf};

use multistrain_core::{
    Compartments, ControlSchedule, ControlValue, CostParams, EpidemicState, FbsmConfig, SeedEvent,
    StrainParams, TimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_SEED: SeedConfig = SeedConfig {
    exposed: 252.0,
    infected: 2.0,
    removed: 1.0,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub grid: GridConfig,
    pub initial: InitialConfig,
    pub strains: Vec<StrainConfig>,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_horizon() -> f64 {
    730.0
}

fn default_dt() -> f64 {
    0.05
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            horizon: default_horizon(),
            dt: default_dt(),
        }
    }
}

/// Exactly one of `population` (P(0)) or `susceptible` (S_1(0)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub susceptible: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default)]
    pub exposed: f64,
    #[serde(default)]
    pub infected: f64,
    #[serde(default)]
    pub removed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrainConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_ratio: Option<f64>,
    pub sigma: f64,
    pub gamma: f64,
    pub delta: f64,
    pub mu: f64,
    #[serde(default)]
    pub activation_time: f64,
    #[serde(default)]
    pub exposed: f64,
    #[serde(default)]
    pub infected: f64,
    #[serde(default)]
    pub removed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<SeedConfig>,
}

/// Which population enters `ln P(0)` when `c2_factor` is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogPopulation {
    /// `P(0) = S + E + I + R` of the first strain.
    #[default]
    Total,
    /// `S_1(0)` only.
    Susceptible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlConfig {
    None {},
    Constant {
        u: f64,
    },
    /// CSV with columns `t,u` on the scenario grid; relative paths resolve
    /// against the config file's directory.
    Schedule {
        path: PathBuf,
    },
    Optimize(OptimizeConfig),
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self::None {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    #[serde(default = "one")]
    pub c1: f64,
    /// Absolute `c2`; exclusive with `c2_factor`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    /// `c2 = c2_factor * ln(P_ref)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2_factor: Option<f64>,
    #[serde(default)]
    pub log_population: LogPopulation,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    #[serde(default = "default_min_relaxation")]
    pub min_relaxation: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub u_init: f64,
}

fn one() -> f64 {
    1.0
}
fn default_relaxation() -> f64 {
    FbsmConfig::default().relaxation
}
fn default_min_relaxation() -> f64 {
    FbsmConfig::default().min_relaxation
}
fn default_tol() -> f64 {
    FbsmConfig::default().tol
}
fn default_max_iter() -> usize {
    FbsmConfig::default().max_iter
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_window")]
    pub summary_window: f64,
    #[serde(default = "yes")]
    pub svg: bool,
}

fn default_window() -> f64 {
    multistrain_core::analysis::DEFAULT_WINDOW
}
fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            summary_window: default_window(),
            svg: true,
        }
    }
}

/// Control mode resolved against the scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlPlan {
    None,
    Constant(ControlValue),
    Schedule(ControlSchedule),
    Optimize {
        costs: CostParams,
        fbsm: FbsmConfig,
        u_init: ControlValue,
    },
}

/// A validated scenario in core types.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: Vec<StrainParams>,
    pub initial: EpidemicState,
    pub events: Vec<SeedEvent>,
    pub grid: TimeGrid,
    pub control: ControlPlan,
    pub window: f64,
    pub svg: bool,
    pub out_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn initial_population(&self) -> f64 {
        self.initial.population
    }

    /// Schedule used for a plain simulation (`u_init` for optimize mode).
    pub fn base_schedule(&self) -> ControlSchedule {
        match &self.control {
            ControlPlan::None => ControlSchedule::constant(self.grid, ControlValue::NONE),
            ControlPlan::Constant(u) => ControlSchedule::constant(self.grid, *u),
            ControlPlan::Schedule(s) => s.clone(),
            ControlPlan::Optimize { u_init, .. } => ControlSchedule::constant(self.grid, *u_init),
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: msg.to_string(),
    }
}

/// Parses and validates a config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = parse_config(&text).map_err(|e| match e {
        CliError::Parse { message, .. } => CliError::Parse {
            path: Some(path.to_path_buf()),
            message,
        },
        other => other,
    })?;
    validate(&cfg, path.parent())?;
    Ok(cfg)
}

/// Parses config text and checks types and key names only.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Parse {
            path: None,
            message: "empty configuration".into(),
        });
    }
    toml::from_str(text).map_err(|e| CliError::Parse {
        path: None,
        message: e.to_string(),
    })
}

/// Checks every invariant by building the scenario.
pub fn validate(cfg: &ScenarioConfig, base_dir: Option<&Path>) -> Result<(), CliError> {
    build_scenario(cfg, base_dir).map(|_| ())
}

/// Resolves a config into core types. `base_dir` anchors relative schedule
/// paths.
pub fn build_scenario(cfg: &ScenarioConfig, base_dir: Option<&Path>) -> Result<Scenario, CliError> {
    let g = &cfg.grid;
    let grid = TimeGrid::new(g.t0, g.horizon, g.dt).map_err(|e| invalid("grid", e))?;
    if (grid.horizon() - g.horizon).abs() > 1e-6 * g.dt {
        return Err(invalid(
            "grid.horizon",
            format!(
                "horizon - t0 = {} is not a multiple of dt = {}",
                g.horizon - g.t0,
                g.dt
            ),
        ));
    }
    if cfg.strains.is_empty() {
        return Err(invalid("strains", "at least one strain is required"));
    }

    let first_beta = match (cfg.strains[0].beta, cfg.strains[0].beta_ratio) {
        (Some(b), None) => b,
        (_, Some(_)) => {
            return Err(invalid(
                "strains[0].beta_ratio",
                "the first strain needs an absolute beta",
            ))
        }
        (None, None) => return Err(invalid("strains[0].beta", "missing")),
    };

    let mut params = Vec::with_capacity(cfg.strains.len());
    let mut compartments = Vec::with_capacity(cfg.strains.len());
    let mut events = Vec::new();
    for (j, s) in cfg.strains.iter().enumerate() {
        let field = |name: &str| format!("strains[{j}].{name}");
        let beta = match (s.beta, s.beta_ratio) {
            (Some(b), None) => b,
            (None, Some(r)) => r * first_beta,
            (Some(_), Some(_)) => {
                return Err(invalid(
                    &field("beta"),
                    "give either beta or beta_ratio, not both",
                ))
            }
            (None, None) => return Err(invalid(&field("beta"), "missing")),
        };
        let p = StrainParams::new(beta, s.sigma, s.gamma, s.delta, s.mu)
            .and_then(|p| p.activated_at(s.activation_time))
            .map_err(|e| invalid(&field("rates"), e))?;
        if s.activation_time < g.t0 {
            return Err(invalid(&field("activation_time"), "precedes grid.t0"));
        }
        if !grid.divides(s.activation_time) {
            return Err(invalid(
                &field("activation_time"),
                format!("{} is not on the grid (dt = {})", s.activation_time, g.dt),
            ));
        }
        for (name, v) in [
            ("exposed", s.exposed),
            ("infected", s.infected),
            ("removed", s.removed),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(
                    &field(name),
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        let starts_active = p.is_active(g.t0);
        if starts_active {
            if s.seed.is_some() {
                return Err(invalid(
                    &field("seed"),
                    "only strains activating after t0 take a seed",
                ));
            }
            compartments.push(Compartments::new(s.exposed, s.infected, s.removed));
        } else {
            if s.exposed != 0.0 || s.infected != 0.0 || s.removed != 0.0 {
                return Err(invalid(
                    &field("exposed"),
                    "strains activating after t0 start empty; use `seed`",
                ));
            }
            let seed = s.seed.unwrap_or(DEFAULT_SEED);
            for (name, v) in [
                ("exposed", seed.exposed),
                ("infected", seed.infected),
                ("removed", seed.removed),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(invalid(
                        &field(&format!("seed.{name}")),
                        format!("must be >= 0, got {v}"),
                    ));
                }
            }
            if s.activation_time <= grid.horizon() + 1e-9 {
                events.push(SeedEvent::new(
                    s.activation_time,
                    j,
                    seed.exposed,
                    seed.infected,
                    seed.removed,
                ));
            }
            compartments.push(Compartments::default());
        }
        params.push(p);
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));

    let first_total = compartments[0].total();
    let population = match (cfg.initial.population, cfg.initial.susceptible) {
        (Some(p), None) => p,
        (None, Some(s)) => s + first_total,
        _ => {
            return Err(invalid(
                "initial",
                "give exactly one of `population` or `susceptible`",
            ))
        }
    };
    if !(population > 0.0 && population.is_finite()) {
        return Err(invalid(
            "initial",
            format!("population must be > 0, got {population}"),
        ));
    }
    let initial = EpidemicState::new(g.t0, population, compartments);
    initial.validate().map_err(|e| invalid("initial", e))?;
    for ev in &events {
        if ev.seed.total() > population {
            return Err(invalid(
                &format!("strains[{}].seed", ev.strain),
                "seed exceeds the initial population",
            ));
        }
    }

    let control = match &cfg.control {
        ControlConfig::None {} => ControlPlan::None,
        ControlConfig::Constant { u } => {
            ControlPlan::Constant(ControlValue::new(*u).map_err(|e| invalid("control.u", e))?)
        }
        ControlConfig::Schedule { path } => {
            let full = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path.clone(),
            };
            ControlPlan::Schedule(crate::output::read_schedule(&full, &grid)?)
        }
        ControlConfig::Optimize(o) => {
            let log_ref = match o.log_population {
                LogPopulation::Total => population,
                LogPopulation::Susceptible => initial.susceptible_raw(0),
            };
            let c2 = match (o.c2, o.c2_factor) {
                (Some(c), None) => c,
                (None, Some(k)) => k * log_ref.ln(),
                _ => {
                    return Err(invalid(
                        "control.c2",
                        "give exactly one of `c2` or `c2_factor`",
                    ))
                }
            };
            let costs = CostParams::new(o.c1, c2).map_err(|e| invalid("control", e))?;
            let fbsm = FbsmConfig {
                relaxation: o.relaxation,
                min_relaxation: o.min_relaxation,
                tol: o.tol,
                max_iter: o.max_iter,
            };
            fbsm.validate().map_err(|e| invalid("control", e))?;
            if o.max_iter == 0 {
                return Err(invalid("control.max_iter", "must be >= 1"));
            }
            let u_init = ControlValue::new(o.u_init).map_err(|e| invalid("control.u_init", e))?;
            ControlPlan::Optimize {
                costs,
                fbsm,
                u_init,
            }
        }
    };

    let window = cfg.output.summary_window;
    if !(window > 0.0) || window > grid.horizon() - grid.t0() + 1e-9 {
        return Err(invalid(
            "output.summary_window",
            format!("must lie in (0, horizon - t0], got {window}"),
        ));
    }

    Ok(Scenario {
        name: cfg.name.clone().unwrap_or_else(|| "scenario".into()),
        params,
        initial,
        events,
        grid,
        control,
        window,
        svg: cfg.output.svg,
        out_dir: cfg.output.dir.clone(),
    })
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    /// New activation day for every strain that starts after `t0`.
    pub seed_day: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(dt) = self.dt {
            cfg.grid.dt = dt;
        }
        if let Some(h) = self.horizon {
            cfg.grid.horizon = h;
        }
        if let Some(day) = self.seed_day {
            let t0 = cfg.grid.t0;
            for s in cfg.strains.iter_mut().filter(|s| s.activation_time > t0) {
                s.activation_time = day;
            }
        }
    }
}

/// Sets the numeric field at a dotted path such as `control.c2_factor` or
/// `strains.1.beta_ratio`, then re-parses strictly.
pub fn set_numeric_path(
    cfg: &ScenarioConfig,
    path: &str,
    value: f64,
) -> Result<ScenarioConfig, CliError> {
    let bad = |msg: String| CliError::InvalidPath {
        path: path.to_string(),
        message: msg,
    };
    let mut root = toml::Value::try_from(cfg).map_err(|e| bad(e.to_string()))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(bad("empty path segment".into()));
    }
    let (last, parents) = keys.split_last().expect("split yields one segment");
    let mut node = &mut root;
    for key in parents {
        node = match node {
            toml::Value::Table(t) => t
                .get_mut(*key)
                .ok_or_else(|| bad(format!("no section `{key}`")))?,
            toml::Value::Array(a) => {
                let i: usize = key
                    .parse()
                    .map_err(|_| bad(format!("`{key}` is not an index")))?;
                a.get_mut(i)
                    .ok_or_else(|| bad(format!("index {i} out of range")))?
            }
            _ => return Err(bad(format!("`{key}` is not a section"))),
        };
    }
    match node {
        toml::Value::Table(t) => {
            match t.get(*last) {
                Some(toml::Value::Float(_)) | Some(toml::Value::Integer(_)) | None => {}
                Some(_) => return Err(bad(format!("`{last}` is not numeric"))),
            }
            let v = if matches!(t.get(*last), Some(toml::Value::Integer(_))) {
                if value.fract() != 0.0 {
                    return Err(bad(format!("`{last}` takes an integer")));
                }
                toml::Value::Integer(value as i64)
            } else {
                toml::Value::Float(value)
            };
            t.insert(last.to_string(), v);
        }
        _ => return Err(bad("target is not a section".into())),
    }
    let text = toml::to_string(&root).map_err(|e| bad(e.to_string()))?;
    let mut updated: ScenarioConfig = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
    // `beta` and `beta_ratio` are alternatives: setting one drops the other.
    if let (Some(i), "beta_ratio" | "beta") = (strain_index(&keys), *last) {
        let s = &mut updated.strains[i];
        if *last == "beta_ratio" {
            s.beta = None;
        } else {
            s.beta_ratio = None;
        }
    }
    Ok(updated)
}

fn strain_index(keys: &[&str]) -> Option<usize> {
    match keys {
        ["strains", i, _] => i.parse().ok(),
        _ => None,
    }
}
