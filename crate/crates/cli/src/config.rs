//! Run configuration: TOML with dotted sections plus `key=value` overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use membrane_core::{
    cap_alpha, perturb, tanh_caps, Cap, CapSet, FlowParams, GridSpec, ModelParams, Pole, SpectralField, SphereGrid,
};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub flow: FlowParams,
    #[serde(default)]
    pub initial: Initial,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub gamma: GammaConfig,
    #[serde(default)]
    pub axisym: AxisymConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub l_max: usize,
    pub oversample: f64,
    /// Longitudinal truncation; 0 gives an axisymmetric grid.
    pub max_order: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { l_max: 64, oversample: 2.0, max_order: None }
    }
}

impl GridConfig {
    pub fn spec(&self, radius: f64) -> GridSpec {
        GridSpec { radius, l_max: self.l_max, oversample: self.oversample, max_order: self.max_order }
    }
}

fn north() -> Pole {
    Pole::North
}

/// Initial composition. Caps hold the `φ = +1` phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    /// `φ ≡ α`.
    #[default]
    Constant,
    TanhCap {
        theta0: f64,
        #[serde(default = "north")]
        pole: Pole,
    },
    /// North cap of angle `theta1` and south cap of angle `theta2`.
    TanhBand {
        theta1: f64,
        theta2: f64,
    },
    Checkpoint {
        path: PathBuf,
    },
    Perturbed {
        base: Box<Initial>,
        amplitude: f64,
        seed: Option<u64>,
        max_degree: Option<usize>,
    },
}

impl Initial {
    /// Cap set behind a tanh profile, if any.
    pub fn caps(&self) -> Result<Option<CapSet>, CliError> {
        let caps = match self {
            Initial::TanhCap { theta0, pole } => Some(CapSet::single(Cap { pole: *pole, theta0: *theta0 })?),
            Initial::TanhBand { theta1, theta2 } => Some(CapSet::two(*theta1, *theta2)?),
            Initial::Perturbed { base, .. } => return base.caps(),
            Initial::Constant | Initial::Checkpoint { .. } => None,
        };
        Ok(caps)
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Initial::Perturbed { base, amplitude, seed, .. } = self {
            if !(*amplitude >= 0.0) || !amplitude.is_finite() {
                return Err(CliError::Config(format!("initial.amplitude = {amplitude} must be non-negative")));
            }
            if *amplitude > 0.0 && seed.is_none() {
                return Err(CliError::Config("initial.seed is required when amplitude > 0".into()));
            }
            base.validate()?;
        }
        self.caps()?;
        Ok(())
    }
}

/// Where the initial state comes from, with the clock it starts at.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub phi: SpectralField,
    pub t: f64,
    pub step_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    Latlon,
    Vtk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Snapshot cadence in accepted steps; 0 writes none.
    pub snapshot_every: usize,
    pub formats: Vec<SnapshotFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), snapshot_every: 0, formats: vec![SnapshotFormat::Latlon] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaConfig {
    /// Interface widths, strictly decreasing.
    pub eps: Vec<f64>,
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self { eps: vec![0.1, 0.05, 0.025] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AxisymConfig {
    pub theta_north: f64,
    pub theta_south: f64,
    pub dt: f64,
    pub t_end: f64,
    pub series_l_max: usize,
    /// Number of interior comparison times against the phase-field run.
    pub matched_times: usize,
    /// Also run the phase-field flow on `grid` and compare interface angles.
    pub compare: bool,
    /// Widths of the jump study; empty skips it.
    pub jump_eps: Vec<f64>,
    /// Cap angle of the jump study.
    pub jump_theta0: f64,
}

impl Default for AxisymConfig {
    fn default() -> Self {
        Self {
            theta_north: 0.9,
            theta_south: 0.7,
            dt: 1e-3,
            t_end: 0.3,
            series_l_max: 16384,
            matched_times: 5,
            compare: false,
            jump_eps: Vec::new(),
            jump_theta0: 1.0,
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last =
        parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Config(format!("empty key in '{key}'")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("'{p}' in '{key}' is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides and validates.
    ///
    /// When `model.alpha` is not given and the initial data is a tanh
    /// profile, `α` is taken from the cap areas so that the interface starts
    /// where it was placed.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override '{o}' is not of the form key=value")))?;
            set_dotted(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let alpha_given = table.get("model").and_then(|m| m.get("alpha")).is_some();
        let mut config: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if !alpha_given {
            if let Some(caps) = config.initial.caps()? {
                config.model.alpha = cap_alpha(&caps);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate_allow_uncoupled()?;
        self.flow.validate()?;
        if self.flow.snapshot_every != 0 {
            return Err(CliError::Config("snapshot cadence belongs in output.snapshot_every".into()));
        }
        self.initial.validate()?;
        let eps = &self.gamma.eps;
        if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::Config(format!("gamma.eps = {eps:?} must be positive and strictly decreasing")));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<SphereGrid>, CliError> {
        Ok(self.grid.spec(self.model.radius).build()?)
    }

    /// Flow controls with the snapshot cadence filled in from `output`.
    pub fn flow_params(&self) -> FlowParams {
        FlowParams { snapshot_every: self.output.snapshot_every, ..self.flow }
    }

    pub fn initial_state(&self, grid: &Arc<SphereGrid>) -> Result<InitialState, CliError> {
        initial_state(&self.initial, grid, &self.model)
    }
}

fn initial_state(init: &Initial, grid: &Arc<SphereGrid>, params: &ModelParams) -> Result<InitialState, CliError> {
    let fresh = |phi| InitialState { phi, t: 0.0, step_count: 0 };
    Ok(match init {
        Initial::Constant => fresh(SpectralField::constant(grid, params.alpha)),
        Initial::TanhCap { .. } | Initial::TanhBand { .. } => {
            let caps = init.caps()?.expect("tanh data has caps");
            fresh(tanh_caps(grid, &caps, params)?)
        }
        Initial::Checkpoint { path } => {
            let ck = Checkpoint::read(path)?;
            let phi = ck.phi_on(grid)?;
            InitialState { phi, t: ck.t, step_count: ck.step_count }
        }
        Initial::Perturbed { base, amplitude, seed, max_degree } => {
            let b = initial_state(base, grid, params)?;
            let phi = if *amplitude > 0.0 {
                let seed = seed.expect("validated");
                perturb(&b.phi, *amplitude, seed, max_degree.unwrap_or(grid.l_max()).min(grid.l_max()))
            } else {
                b.phi
            };
            InitialState { phi, ..b }
        }
    })
}
