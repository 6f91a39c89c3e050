//! Run configuration and named presets.
//!
//! A run is described by one TOML file. Every section is optional and falls
//! back to the defaults below, so a run is fully determined by the file, the
//! command-line overrides and the code version.
//!
//! ```toml
//! seed = 7
//! output_dir = "out/con3"
//!
//! [device]
//! preset = "con3"          # default, con1 ... con6
//! detuning = 0.11724       # dressed Δ (GHz); retunes omega_q2
//! g_12 = 0.007             # any DeviceParams field overrides the preset
//!
//! [pulse]
//! envelope = "standard"    # standard | flattop | flat; or `lambda = [..]`
//! amp = 0.4                # Ā (GHz)
//! target = "02"            # |11⟩ → |20⟩ ("20") or |11⟩ → |02⟩ ("02")
//! duration = 60.0          # ns
//!
//! [optimize]
//! budget = 200
//!
//! [scan]
//! delta_min = 0.05
//! delta_max = 0.15
//! points = 100
//! k = 50
//!
//! [xeb]
//! cycles = [0, 5, 10, 20]
//! circuits_per_cycle = 50
//! p_dep = 0.01
//! shots = 0                # 0 = exact mixture
//!
//! [readout]
//! q1 = "configs/readout/q1_2level.txt"
//! q2 = "configs/readout/q2_2level.txt"
//! q1_3level = "configs/readout/q1_3level.txt"
//! q2_3level = "configs/readout/q2_3level.txt"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cz::{delta_grid, FreeParam, TargetTransition, COLLISION_WINDOW, DEFAULT_DURATION};
use crate::device::{DeviceError, DeviceParams};
use crate::propagation::{Integrator, PropagationOptions};
use crate::pulse::{DriveTarget, Envelope, FLATTOP_LAMBDA, STANDARD_LAMBDA};

const DEVICE_PRESETS: &str = include_str!("../presets/devices.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown device preset `{name}` (available: {available})")]
    UnknownPreset { name: String, available: String },
    #[error("unknown envelope preset `{0}` (available: standard, flattop, flat)")]
    UnknownEnvelope(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {origin}: {source}")]
    Parse { origin: String, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Device section: a preset plus per-field overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub preset: Option<String>,
    /// Initial envelope preset attached to this device.
    pub envelope: Option<String>,
    /// Dressed detuning target (GHz); `omega_q2` is retuned to reach it.
    pub detuning: Option<f64>,
    pub omega_q1: Option<f64>,
    pub omega_q2: Option<f64>,
    pub omega_c: Option<f64>,
    pub eta_q1: Option<f64>,
    pub eta_q2: Option<f64>,
    pub eta_c: Option<f64>,
    pub g_1c: Option<f64>,
    pub g_2c: Option<f64>,
    pub g_12: Option<f64>,
    pub levels: Option<usize>,
}

impl DeviceConfig {
    /// `base` with every field set in this section replaced.
    pub fn overlay(&self, base: DeviceParams) -> DeviceParams {
        DeviceParams {
            omega_q1: self.omega_q1.unwrap_or(base.omega_q1),
            omega_q2: self.omega_q2.unwrap_or(base.omega_q2),
            omega_c: self.omega_c.unwrap_or(base.omega_c),
            eta_q1: self.eta_q1.unwrap_or(base.eta_q1),
            eta_q2: self.eta_q2.unwrap_or(base.eta_q2),
            eta_c: self.eta_c.unwrap_or(base.eta_c),
            g_1c: self.g_1c.unwrap_or(base.g_1c),
            g_2c: self.g_2c.unwrap_or(base.g_2c),
            g_12: self.g_12.unwrap_or(base.g_12),
            levels: self.levels.unwrap_or(base.levels),
        }
    }

    pub fn preset_name(&self) -> &str {
        self.preset.as_deref().unwrap_or("default")
    }

    /// Preset, then overrides, then the dressed-detuning retune.
    pub fn resolve(&self) -> Result<ResolvedDevice, ConfigError> {
        let preset = device_preset(self.preset_name())?;
        let mut params = self.overlay(preset.params);
        if let Some(delta) = self.detuning {
            params = params.with_dressed_detuning(delta)?;
        }
        params.validate()?;
        let envelope = self.envelope.clone().unwrap_or(preset.envelope);
        Ok(ResolvedDevice { params, envelope })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedDevice {
    pub params: DeviceParams,
    pub envelope: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DevicePreset {
    pub name: String,
    pub params: DeviceParams,
    pub envelope: String,
}

fn preset_table() -> Result<BTreeMap<String, DeviceConfig>, ConfigError> {
    toml::from_str(DEVICE_PRESETS)
        .map_err(|source| ConfigError::Parse { origin: "built-in device presets".into(), source })
}

pub fn preset_names() -> Vec<String> {
    preset_table().map(|t| t.into_keys().collect()).unwrap_or_default()
}

pub fn device_preset(name: &str) -> Result<DevicePreset, ConfigError> {
    let table = preset_table()?;
    let entry = table.get(name).ok_or_else(|| ConfigError::UnknownPreset {
        name: name.to_string(),
        available: table.keys().cloned().collect::<Vec<_>>().join(", "),
    })?;
    Ok(DevicePreset {
        name: name.to_string(),
        params: entry.overlay(DeviceParams::default()),
        envelope: entry.envelope.clone().unwrap_or_else(|| "standard".into()),
    })
}

pub fn envelope_preset(name: &str) -> Result<Envelope, ConfigError> {
    match name {
        "standard" => Ok(Envelope::Lambda { lambda: STANDARD_LAMBDA }),
        "flattop" => Ok(Envelope::Lambda { lambda: FLATTOP_LAMBDA }),
        "flat" => Ok(Envelope::Flat),
        other => Err(ConfigError::UnknownEnvelope(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    /// Envelope preset; when unset the device preset decides.
    pub envelope: Option<String>,
    /// Explicit λ, taking precedence over any preset.
    pub lambda: Option<[f64; 4]>,
    pub amp: f64,
    pub target: TargetTransition,
    pub drive: DriveTarget,
    pub duration: f64,
    /// Carrier (GHz); the initial-guess rule is used when unset.
    pub carrier_freq: Option<f64>,
    pub carrier_phase: f64,
    /// Samples in emitted waveform CSVs.
    pub waveform_samples: usize,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            envelope: None,
            lambda: None,
            amp: 0.4,
            target: TargetTransition::To20,
            drive: DriveTarget::Q1,
            duration: DEFAULT_DURATION,
            carrier_freq: None,
            carrier_phase: 0.0,
            waveform_samples: 601,
        }
    }
}

impl PulseConfig {
    pub fn resolve_envelope(&self, device_default: &str) -> Result<Envelope, ConfigError> {
        if let Some(lambda) = self.lambda {
            return Ok(Envelope::Lambda { lambda });
        }
        envelope_preset(self.envelope.as_deref().unwrap_or(device_default))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationConfig {
    /// Fixed time step (ns); chosen automatically when unset.
    pub dt: Option<f64>,
    /// Trace sampling stride in steps.
    pub stride: usize,
    pub integrator: Integrator,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        let d = PropagationOptions::default();
        Self { dt: d.dt, stride: d.stride, integrator: d.integrator }
    }
}

impl PropagationConfig {
    pub fn options(&self) -> PropagationOptions {
        PropagationOptions {
            dt: self.dt,
            stride: self.stride,
            integrator: self.integrator,
            ..PropagationOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    /// Nelder–Mead iteration budget.
    pub budget: usize,
    pub free_params: Vec<FreeParam>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self { budget: 200, free_params: FreeParam::DEFAULT.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub delta_min: f64,
    pub delta_max: f64,
    pub points: usize,
    /// Number of best points averaged.
    pub k: usize,
    /// Iteration budget per point; `[optimize] budget` when unset.
    pub budget: Option<usize>,
    /// Δ forced onto the grid by replacing its nearest point.
    pub anchor: Option<f64>,
    pub collision_window: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            delta_min: 0.05,
            delta_max: 0.15,
            points: 100,
            k: 50,
            budget: None,
            anchor: Some(0.07392),
            collision_window: COLLISION_WINDOW,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 || self.k > self.points {
            return Err(ConfigError::Invalid(format!(
                "scan aggregates the best k = {} of n = {} points; need 1 <= k <= n",
                self.k, self.points
            )));
        }
        if !(self.delta_min > 0.0 && self.delta_max >= self.delta_min) {
            return Err(ConfigError::Invalid(format!(
                "scan range [{}, {}] GHz must be positive and ordered",
                self.delta_min, self.delta_max
            )));
        }
        Ok(())
    }

    /// Uniform grid with the anchor substituted for its nearest point.
    pub fn grid(&self) -> Vec<f64> {
        let mut grid = delta_grid(self.delta_min, self.delta_max, self.points);
        if let Some(anchor) = self.anchor.filter(|a| (self.delta_min..=self.delta_max).contains(a)) {
            if let Some(nearest) = grid
                .iter_mut()
                .min_by(|a, b| (**a - anchor).abs().total_cmp(&(**b - anchor).abs()))
            {
                *nearest = anchor;
            }
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XebConfig {
    pub cycles: Vec<usize>,
    pub circuits_per_cycle: usize,
    /// Two-qubit depolarizing probability per cycle.
    pub p_dep: f64,
    /// Shots per circuit; 0 gives the exact mixture.
    pub shots: usize,
    /// Existing records to analyze instead of simulating.
    pub records: Option<PathBuf>,
}

impl Default for XebConfig {
    fn default() -> Self {
        Self {
            cycles: vec![0, 2, 4, 6, 8, 10, 15, 20, 30, 40],
            circuits_per_cycle: 50,
            p_dep: 0.01,
            shots: 0,
            records: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutConfig {
    /// Per-qubit two-level confusion-matrix files, resolved relative to the
    /// config file.
    pub q1: Option<PathBuf>,
    pub q2: Option<PathBuf>,
    /// Three-level matrices used to correct qutrit readout for the leak metric.
    pub q1_3level: Option<PathBuf>,
    pub q2_3level: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub device: DeviceConfig,
    pub pulse: PulseConfig,
    pub propagation: PropagationConfig,
    pub optimize: OptimizeConfig,
    pub scan: ScanConfig,
    pub xeb: XebConfig,
    pub readout: ReadoutConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            device: DeviceConfig::default(),
            pulse: PulseConfig::default(),
            propagation: PropagationConfig::default(),
            optimize: OptimizeConfig::default(),
            scan: ScanConfig::default(),
            xeb: XebConfig::default(),
            readout: ReadoutConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { origin: origin.to_string(), source })
    }

    /// Loads a config file; relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let r = &mut cfg.readout;
        for p in [&mut r.q1, &mut r.q2, &mut r.q1_3level, &mut r.q2_3level, &mut cfg.xeb.records]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.device.resolve()?;
        self.pulse.resolve_envelope("standard")?;
        self.scan.validate()?;
        if self.optimize.budget == 0 {
            return Err(ConfigError::Invalid("optimize.budget must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.xeb.p_dep) {
            return Err(ConfigError::Invalid(format!("xeb.p_dep = {} outside [0, 1]", self.xeb.p_dep)));
        }
        Ok(())
    }
}
