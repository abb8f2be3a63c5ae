//! Scenario files: sectioned `key = value` text whose dotted paths
//! (`noise.sigma`, `es.k`, ...) double as override keys.
//!
//! Files are parsed as TOML. Every scenario is layered as
//! defaults <- file <- overrides, and unknown keys are rejected at each layer.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{EsParams, SurgeParams};
use crate::error::{ConfigError, Error};
use crate::estimator::FilterParams;
use crate::geometry::{BaselineGeometry, PlanarPoint, SourcePosition};
use crate::plant::{CurrentDisturbance, ReferenceMode};

/// Parameter table of the simulation study (d = 5 m, z = 5 m).
pub const PRESET_SIMULATION: &str = include_str!("../presets/sim_v_b1.cfg");
/// Parameter set of the lake experiment (intermittent pings, position reference).
pub const PRESET_EXPERIMENT: &str = include_str!("../presets/experiment_vi.cfg");

pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "sim_v_b1" => Some(PRESET_SIMULATION),
        "experiment_vi" => Some(PRESET_EXPERIMENT),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub d: f64,
    pub sound_speed: f64,
}

/// Additive range-difference noise (meters) and the seed of its stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentSection {
    pub vx: f64,
    pub vy: f64,
    pub reference: ReferenceMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PingMode {
    /// A fresh measurement at every integration stage.
    Continuous,
    /// One measurement per period, held in between.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PingSchedule {
    pub mode: PingMode,
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    /// Direction and damping from the true relative angle and range.
    Oracle,
    /// Direction and damping from the second-order filter.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: ControlMode,
    pub dt: f64,
    pub t_max: f64,
    /// Record every n-th integration step.
    pub decimation: u32,
    pub stop_range: f64,
    /// First-order lag on both commands, seconds; 0 disables it.
    pub command_lag: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub target_range: f64,
    pub window_start: f64,
    pub window_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub source: SourceSection,
    pub vehicle: VehicleSection,
    pub baseline: BaselineSection,
    pub es: EsParams,
    pub surge: SurgeParams,
    pub filter: FilterParams,
    pub noise: NoiseModel,
    pub current: CurrentSection,
    pub ping: PingSchedule,
    pub run: RunSection,
    pub metrics: MetricsSection,
}

impl Default for ScenarioConfig {
    /// The simulation-study parameter table with the vehicle 40 m north of
    /// the source and a 1 rad heading error.
    fn default() -> Self {
        let mut cfg = Self {
            source: SourceSection {
                x: 0.0,
                y: 0.0,
                z: 5.0,
            },
            vehicle: VehicleSection {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
            },
            baseline: BaselineSection {
                d: 5.0,
                sound_speed: BaselineGeometry::DEFAULT_SOUND_SPEED,
            },
            es: EsParams {
                a: 0.15,
                omega: TAU / 16.0,
                k: -1.0,
                h: 0.19,
            },
            surge: SurgeParams {
                u0: 0.5,
                m: 100.0,
                epsilon: 4.0,
                q: 3,
                mu: 100.0,
            },
            filter: FilterParams {
                omega1: 0.8,
                omega2: 0.15,
                k1: 1000.0,
                deadband: FilterParams::DEFAULT_DEADBAND,
                scale: FilterParams::DEFAULT_SCALE,
            },
            noise: NoiseModel {
                sigma: 0.0,
                seed: 0,
            },
            current: CurrentSection {
                vx: 0.0,
                vy: 0.0,
                reference: ReferenceMode::Velocity,
            },
            ping: PingSchedule {
                mode: PingMode::Continuous,
                period: 2.0,
            },
            run: RunSection {
                mode: ControlMode::Oracle,
                dt: 0.01,
                t_max: 900.0,
                decimation: 1,
                stop_range: 0.5,
                command_lag: 0.0,
            },
            metrics: MetricsSection {
                target_range: 2.0,
                window_start: 0.0,
                window_end: f64::INFINITY,
            },
        };
        cfg.place_vehicle_polar(40.0, 1.0, 0.0);
        cfg
    }
}

impl ScenarioConfig {
    /// Puts the baseline center at `range` from the source along `bearing`
    /// with relative angle `alpha`.
    pub fn place_vehicle_polar(&mut self, range: f64, alpha: f64, bearing: f64) {
        self.vehicle.x = self.source.x + range * bearing.cos();
        self.vehicle.y = self.source.y + range * bearing.sin();
        self.vehicle.heading = alpha + bearing - PI;
    }

    pub fn source_position(&self) -> SourcePosition {
        SourcePosition::new(self.source.x, self.source.y, self.source.z)
    }

    pub fn geometry(&self, center: PlanarPoint, heading: f64) -> BaselineGeometry {
        BaselineGeometry {
            center,
            heading,
            baseline: self.baseline.d,
            sound_speed: self.baseline.sound_speed,
        }
    }

    pub fn current(&self) -> CurrentDisturbance {
        CurrentDisturbance {
            velocity: [self.current.vx, self.current.vy],
            reference: self.current.reference,
        }
    }

    pub fn from_str_with_overrides(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table = defaults_table();
        let file: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("<file>", e.message().to_string()))?;
        merge_file(&mut table, &file, "")?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ScenarioConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::new("<config>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::from_str_with_overrides(&text, overrides)?)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    /// Applies `key=value` overrides to an already parsed config.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, ConfigError> {
        Self::from_str_with_overrides(&self.to_text(), overrides)
    }

    /// Field-level validation. Returns the first violation found.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = [
            ("source.x", self.source.x),
            ("source.y", self.source.y),
            ("vehicle.x", self.vehicle.x),
            ("vehicle.y", self.vehicle.y),
            ("vehicle.heading", self.vehicle.heading),
            ("current.vx", self.current.vx),
            ("current.vy", self.current.vy),
            ("metrics.window_start", self.metrics.window_start),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(ConfigError::new(field, "must be finite"));
            }
        }
        let positive = [
            (
                "source.z",
                self.source.z,
                "source depth must be > 0 so both slant ranges stay positive",
            ),
            ("baseline.d", self.baseline.d, "baseline length must be > 0"),
            (
                "baseline.sound_speed",
                self.baseline.sound_speed,
                "speed of sound must be > 0",
            ),
            ("es.a", self.es.a, "perturbation amplitude must be > 0"),
            (
                "es.omega",
                self.es.omega,
                "perturbation frequency must be > 0",
            ),
            ("es.h", self.es.h, "high-pass parameter must be > 0"),
            ("surge.m", self.surge.m, "must be > 0"),
            (
                "surge.epsilon",
                self.surge.epsilon,
                "damping knee must be > 0",
            ),
            (
                "surge.mu",
                self.surge.mu,
                "smooth signum sharpness must be > 0",
            ),
            ("filter.omega1", self.filter.omega1, "must be > 0"),
            ("filter.omega2", self.filter.omega2, "must be > 0"),
            ("filter.k1", self.filter.k1, "must be > 0"),
            ("filter.scale", self.filter.scale, "must be > 0"),
            ("run.dt", self.run.dt, "integration step must be > 0"),
        ];
        for (field, v, msg) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(field, msg));
            }
        }
        if !(self.es.k < 0.0 && self.es.k.is_finite()) {
            return Err(ConfigError::new(
                "es.k",
                "demodulation gain must satisfy k < 0 for the heading to converge",
            ));
        }
        if !(self.surge.u0 >= 0.0 && self.surge.u0.is_finite()) {
            return Err(ConfigError::new("surge.u0", "maximum surge must be >= 0"));
        }
        if self.surge.q < 1 {
            return Err(ConfigError::new("surge.q", "damping power must be >= 1"));
        }
        let nonneg = [
            ("filter.deadband", self.filter.deadband),
            ("noise.sigma", self.noise.sigma),
            ("run.t_max", self.run.t_max),
            ("run.stop_range", self.run.stop_range),
            ("run.command_lag", self.run.command_lag),
            ("metrics.target_range", self.metrics.target_range),
        ];
        for (field, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::new(field, "must be finite and >= 0"));
            }
        }
        if self.ping.mode == PingMode::Periodic
            && !(self.ping.period > 0.0 && self.ping.period.is_finite())
        {
            return Err(ConfigError::new(
                "ping.period",
                "must be > 0 in periodic mode",
            ));
        }
        if self.run.decimation == 0 {
            return Err(ConfigError::new("run.decimation", "must be >= 1"));
        }
        if self.metrics.window_end.is_nan() || self.metrics.window_end < self.metrics.window_start {
            return Err(ConfigError::new(
                "metrics.window_end",
                "must be >= metrics.window_start",
            ));
        }
        Ok(())
    }

    /// Non-fatal advisories, e.g. too few integration steps per perturbation period.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let period = TAU / self.es.omega;
        if self.run.dt > period / 50.0 {
            out.push(format!(
                "run.dt = {} gives fewer than 50 steps per perturbation period ({period:.3} s)",
                self.run.dt
            ));
        }
        out
    }
}

fn defaults_table() -> toml::Table {
    match toml::Value::try_from(ScenarioConfig::default()) {
        Ok(toml::Value::Table(t)) => t,
        _ => unreachable!("scenario config serializes to a table"),
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn coerce(path: &str, current: &toml::Value, new: toml::Value) -> Result<toml::Value, ConfigError> {
    use toml::Value as V;
    match (current, new) {
        (V::Float(_), V::Integer(i)) => Ok(V::Float(i as f64)),
        (V::Float(_), v @ V::Float(_))
        | (V::Integer(_), v @ V::Integer(_))
        | (V::String(_), v @ V::String(_))
        | (V::Boolean(_), v @ V::Boolean(_)) => Ok(v),
        (cur, v) => Err(ConfigError::new(
            path,
            format!("expected {}, found {}", cur.type_str(), v.type_str()),
        )),
    }
}

fn merge_file(base: &mut toml::Table, file: &toml::Table, prefix: &str) -> Result<(), ConfigError> {
    for (key, value) in file {
        let path = join(prefix, key);
        let slot = base
            .get_mut(key)
            .ok_or_else(|| ConfigError::new(&path, "unknown key"))?;
        match (slot, value) {
            (toml::Value::Table(dst), toml::Value::Table(src)) => merge_file(dst, src, &path)?,
            (toml::Value::Table(_), _) => {
                return Err(ConfigError::new(&path, "expected a section"));
            }
            (slot, v) => *slot = coerce(&path, slot, v.clone())?,
        }
    }
    Ok(())
}

fn parse_scalar(raw: &str) -> toml::Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies one `section.key=value` override in place.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), ConfigError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError::new(item, "override must have the form key=value"))?;
    let path = path.trim();
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ConfigError::new(path, "empty key"))?;
    let mut node = &mut *table;
    for part in parts {
        node = match node.get_mut(part) {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(ConfigError::new(path, "unknown key")),
        };
    }
    let slot = node
        .get_mut(leaf)
        .ok_or_else(|| ConfigError::new(path, "unknown key"))?;
    if slot.is_table() {
        return Err(ConfigError::new(path, "cannot override a whole section"));
    }
    *slot = coerce(path, slot, parse_scalar(raw))?;
    Ok(())
}
