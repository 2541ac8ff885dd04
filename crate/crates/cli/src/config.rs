//! Run configuration: `section.key = value` lines, `#` comments.
//!
//! Precedence is built-in defaults, then a preset, then the file, then
//! command-line overrides. `medium.gamma_rad_s` has no default and must be
//! given. Rates accept a `2pi*` prefix (`medium.gamma_rad_s = 2pi*18e6`).

use std::f64::consts::TAU;
use std::fmt::Write as _;

use faraday_core::engine::{DopplerSpec, Engine, Experiment};
use faraday_core::optimize::{Bounds, FreeVar};
use faraday_core::polarimetry::{PolarimeterSpec, SensitivitySpec};
use faraday_core::propagation::Controls;
use faraday_core::units::{rb87, FieldParams, Gamma0Convention, MediumParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{key}: {reason}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
    pub line: Option<usize>,
}

fn err(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        reason: reason.into(),
        line: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2a,
    Fig2b,
    Fig2c,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig2a, Preset::Fig2b, Preset::Fig2c];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Fig2c => "fig2c",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn density(self) -> f64 {
        match self {
            Preset::Fig2a => 3e11,
            Preset::Fig2b => 1e12,
            Preset::Fig2c => 2e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scan {
    pub start_mg: f64,
    pub stop_mg: f64,
    pub steps: usize,
}

impl Scan {
    /// Field values in G; `steps` points including both ends.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start_mg * 1e-3];
        }
        let n = self.steps;
        let span = self.stop_mg - self.start_mg;
        let mut v: Vec<f64> = (0..n).map(|i| (self.start_mg + span * i as f64 / (n - 1) as f64) * 1e-3).collect();
        // symmetric scans are mirrored exactly, hitting B = 0 when n is odd
        if self.start_mg == -self.stop_mg {
            for i in 0..n / 2 {
                v[n - 1 - i] = -v[i];
            }
            if n % 2 == 1 {
                v[n / 2] = 0.0;
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub steps: usize,
    pub b_mg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSettings {
    pub free: Vec<FreeVar>,
    pub density: (f64, f64),
    pub length: (f64, f64),
    pub power: (f64, f64),
    pub max_evaluations: usize,
}

impl OptimizeSettings {
    pub fn bounds(&self) -> Vec<Bounds> {
        self.free
            .iter()
            .map(|&var| {
                let (lo, hi) = match var {
                    FreeVar::Density => self.density,
                    FreeVar::Length => self.length,
                    FreeVar::Power => self.power,
                };
                Bounds { var, lo, hi }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub density_cm3: f64,
    pub cell_length_cm: f64,
    pub wavelength_cm: f64,
    pub gamma: f64,
    pub gamma0: f64,
    pub gamma0_convention: Gamma0Convention,
    pub gamma_ab: f64,
    pub delta_rho: f64,
    pub power_w: f64,
    pub beam_diameter_cm: f64,
    pub optical_frequency_hz: f64,
    pub laser_detuning: f64,
    pub dipole_c_cm: f64,
    pub lande_g: f64,
    pub analyzer_deg: f64,
    pub scan: Scan,
    pub engine: Engine,
    pub doppler_enabled: bool,
    pub doppler_max_nodes: usize,
    pub temperature_k: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub samples: usize,
    pub measurement_time_s: f64,
    pub optimize: OptimizeSettings,
    pub spectrum: Spectrum,
    pub output: Option<String>,
}

impl RunConfig {
    /// Defaults for everything except gamma.
    pub fn defaults(gamma: f64) -> Self {
        RunConfig {
            density_cm3: 1e12,
            cell_length_cm: 3.0,
            wavelength_cm: rb87::D1_WAVELENGTH_CM,
            gamma,
            gamma0: TAU * 5e3,
            gamma0_convention: Gamma0Convention::Rate,
            gamma_ab: rb87::D1_GAMMA,
            delta_rho: 1.0 / 3.0,
            power_w: 3e-3,
            beam_diameter_cm: 0.2,
            optical_frequency_hz: rb87::D1_FREQUENCY_HZ,
            laser_detuning: 0.0,
            dipole_c_cm: rb87::D1_DIPOLE_C_CM,
            lande_g: 0.5,
            analyzer_deg: 45.0,
            scan: Scan {
                start_mg: -10.0,
                stop_mg: 10.0,
                steps: 21,
            },
            engine: Engine::Analytic,
            doppler_enabled: true,
            doppler_max_nodes: 129,
            temperature_k: None,
            rtol: 1e-6,
            atol: 1e-6,
            samples: 64,
            measurement_time_s: 1.0,
            optimize: OptimizeSettings {
                free: vec![FreeVar::Density],
                density: (1e10, 1e14),
                length: (0.1, 100.0),
                power: (1e-5, 0.1),
                max_evaluations: 2000,
            },
            spectrum: Spectrum {
                start_mhz: -1500.0,
                stop_mhz: 1500.0,
                steps: 121,
                b_mg: 0.0,
            },
            output: None,
        }
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        self.density_cm3 = preset.density();
        self.cell_length_cm = 3.0;
        self.power_w = 3e-3;
        self.beam_diameter_cm = 0.2;
        self.engine = Engine::Multilevel;
        self.scan = Scan {
            start_mg: -100.0,
            stop_mg: 100.0,
            steps: 41,
        };
    }

    /// Parses `text` on top of the defaults and an optional preset.
    pub fn parse(text: &str, preset: Option<Preset>) -> Result<Self, ConfigError> {
        let mut gamma = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError {
                key: line.to_string(),
                reason: "expected `key = value`".into(),
                line: Some(i + 1),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if entries.iter().any(|(_, key, _): &(usize, &str, &str)| *key == k) {
                return Err(ConfigError {
                    key: k.to_string(),
                    reason: "given twice".into(),
                    line: Some(i + 1),
                });
            }
            if k == "medium.gamma_rad_s" {
                gamma = Some(number(k, v).map_err(|e| ConfigError { line: Some(i + 1), ..e })?);
            }
            entries.push((i + 1, k, v));
        }
        let gamma = gamma.ok_or_else(|| err("medium.gamma_rad_s", "required (suggested 2pi*18e6)"))?;
        let mut cfg = RunConfig::defaults(gamma);
        if let Some(p) = preset {
            cfg.apply_preset(p);
        }
        for (line, k, v) in entries {
            cfg.set(k, v).map_err(|e| ConfigError { line: Some(line), ..e })?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let num = |v: &str| number(key, v);
        let count = |v: &str| v.parse::<usize>().map_err(|_| err(key, format!("expected a non-negative integer, got `{v}`")));
        match key {
            "medium.density_cm3" => self.density_cm3 = num(v)?,
            "medium.cell_length_cm" => self.cell_length_cm = num(v)?,
            "medium.wavelength_cm" => self.wavelength_cm = num(v)?,
            "medium.gamma_rad_s" => self.gamma = num(v)?,
            "medium.gamma0_rad_s" => self.gamma0 = num(v)?,
            "medium.gamma0_convention" => {
                self.gamma0_convention =
                    Gamma0Convention::from_name(v).ok_or_else(|| err(key, format!("expected rate or half_width, got `{v}`")))?
            }
            "medium.gamma_ab_rad_s" => self.gamma_ab = num(v)?,
            "medium.delta_rho" => self.delta_rho = num(v)?,
            "field.power_w" => self.power_w = num(v)?,
            "field.beam_diameter_cm" => self.beam_diameter_cm = num(v)?,
            "field.optical_frequency_hz" => self.optical_frequency_hz = num(v)?,
            "field.laser_detuning_rad_s" => self.laser_detuning = num(v)?,
            "field.dipole_c_cm" => self.dipole_c_cm = num(v)?,
            "magnetic.lande_g" => self.lande_g = num(v)?,
            "polarimeter.analyzer_deg" => self.analyzer_deg = num(v)?,
            "scan.b_start_mg" => self.scan.start_mg = num(v)?,
            "scan.b_stop_mg" => self.scan.stop_mg = num(v)?,
            "scan.steps" => self.scan.steps = count(v)?,
            "engine" => self.engine = Engine::from_name(v).ok_or_else(|| err(key, format!("expected analytic or multilevel, got `{v}`")))?,
            "doppler.enabled" => {
                self.doppler_enabled = match v {
                    "true" | "on" => true,
                    "false" | "off" => false,
                    _ => return Err(err(key, format!("expected true or false, got `{v}`"))),
                }
            }
            "doppler.max_nodes" => self.doppler_max_nodes = count(v)?,
            "doppler.temperature_k" => {
                self.temperature_k = if v == "auto" { None } else { Some(num(v)?) };
            }
            "propagation.rtol" => self.rtol = num(v)?,
            "propagation.atol" => self.atol = num(v)?,
            "propagation.samples" => self.samples = count(v)?,
            "sensitivity.measurement_time_s" => self.measurement_time_s = num(v)?,
            "optimize.free" => {
                self.optimize.free = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| FreeVar::from_name(s).ok_or_else(|| err(key, format!("unknown variable `{s}`"))))
                    .collect::<Result<_, _>>()?
            }
            "optimize.density_min_cm3" => self.optimize.density.0 = num(v)?,
            "optimize.density_max_cm3" => self.optimize.density.1 = num(v)?,
            "optimize.length_min_cm" => self.optimize.length.0 = num(v)?,
            "optimize.length_max_cm" => self.optimize.length.1 = num(v)?,
            "optimize.power_min_w" => self.optimize.power.0 = num(v)?,
            "optimize.power_max_w" => self.optimize.power.1 = num(v)?,
            "optimize.max_evaluations" => self.optimize.max_evaluations = count(v)?,
            "spectrum.detuning_start_mhz" => self.spectrum.start_mhz = num(v)?,
            "spectrum.detuning_stop_mhz" => self.spectrum.stop_mhz = num(v)?,
            "spectrum.steps" => self.spectrum.steps = count(v)?,
            "spectrum.b_mg" => self.spectrum.b_mg = num(v)?,
            "output.path" => self.output = Some(v.to_string()),
            _ => return Err(err(key, "unknown key")),
        }
        Ok(())
    }

    /// Enforces the parameter invariants of every module.
    pub fn check(&self) -> Result<(), ConfigError> {
        let map = |e: faraday_core::Error| match e {
            faraday_core::Error::InvalidParameter { name, reason } => err(&config_key(name), reason),
            other => err("config", other.to_string()),
        };
        self.experiment().validate().map_err(map)?;
        PolarimeterSpec::new(self.analyzer_deg.to_radians()).map_err(|_| err("polarimeter.analyzer_deg", "must lie in [0, 180)"))?;
        self.sensitivity().validate().map_err(map)?;
        if self.scan.steps == 0 {
            return Err(err("scan.steps", "must be >= 1"));
        }
        if self.spectrum.steps == 0 {
            return Err(err("spectrum.steps", "must be >= 1"));
        }
        for (k, v) in [
            ("scan.b_start_mg", self.scan.start_mg),
            ("scan.b_stop_mg", self.scan.stop_mg),
            ("spectrum.b_mg", self.spectrum.b_mg),
            ("spectrum.detuning_start_mhz", self.spectrum.start_mhz),
            ("spectrum.detuning_stop_mhz", self.spectrum.stop_mhz),
        ] {
            if !v.is_finite() {
                return Err(err(k, "must be finite"));
            }
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(err("propagation.rtol", "tolerances must be > 0"));
        }
        if self.samples < 2 {
            return Err(err("propagation.samples", "must be >= 2"));
        }
        for b in self.optimize.bounds() {
            if !(b.lo > 0.0 && b.hi >= b.lo && b.hi.is_finite()) {
                return Err(err(&format!("optimize.{}", b.var.name()), "bounds must satisfy 0 < min <= max"));
            }
        }
        Ok(())
    }

    pub fn experiment(&self) -> Experiment {
        Experiment {
            medium: MediumParams {
                density: self.density_cm3,
                cell_length: self.cell_length_cm,
                wavelength: self.wavelength_cm,
                gamma: self.gamma,
                gamma0: self.gamma0_convention.rate(self.gamma0),
                gamma_ab: self.gamma_ab,
                delta_rho: self.delta_rho,
            },
            field: FieldParams {
                power: self.power_w,
                beam_diameter: self.beam_diameter_cm,
                optical_frequency: self.optical_frequency_hz,
                laser_detuning: self.laser_detuning,
            },
            lande_g: self.lande_g,
            dipole: self.dipole_c_cm,
            doppler: DopplerSpec {
                enabled: self.doppler_enabled,
                max_nodes: self.doppler_max_nodes,
                temperature: self.temperature_k,
            },
            controls: Controls {
                rtol: self.rtol,
                atol: self.atol,
                samples: self.samples,
                ..Controls::default()
            },
        }
    }

    pub fn polarimeter(&self) -> PolarimeterSpec {
        PolarimeterSpec {
            analyzer_angle: self.analyzer_deg.to_radians(),
        }
    }

    pub fn sensitivity(&self) -> SensitivitySpec {
        SensitivitySpec {
            measurement_time: self.measurement_time_s,
            optical_frequency: self.optical_frequency_hz,
        }
    }

    /// Every key with its value; parsing the dump reproduces `self`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        put("medium.density_cm3", fmt(self.density_cm3));
        put("medium.cell_length_cm", fmt(self.cell_length_cm));
        put("medium.wavelength_cm", fmt(self.wavelength_cm));
        put("medium.gamma_rad_s", fmt(self.gamma));
        put("medium.gamma0_rad_s", fmt(self.gamma0));
        put("medium.gamma0_convention", self.gamma0_convention.name().into());
        put("medium.gamma_ab_rad_s", fmt(self.gamma_ab));
        put("medium.delta_rho", fmt(self.delta_rho));
        put("field.power_w", fmt(self.power_w));
        put("field.beam_diameter_cm", fmt(self.beam_diameter_cm));
        put("field.optical_frequency_hz", fmt(self.optical_frequency_hz));
        put("field.laser_detuning_rad_s", fmt(self.laser_detuning));
        put("field.dipole_c_cm", fmt(self.dipole_c_cm));
        put("magnetic.lande_g", fmt(self.lande_g));
        put("polarimeter.analyzer_deg", fmt(self.analyzer_deg));
        put("scan.b_start_mg", fmt(self.scan.start_mg));
        put("scan.b_stop_mg", fmt(self.scan.stop_mg));
        put("scan.steps", self.scan.steps.to_string());
        put("engine", self.engine.name().into());
        put("doppler.enabled", self.doppler_enabled.to_string());
        put("doppler.max_nodes", self.doppler_max_nodes.to_string());
        put("doppler.temperature_k", self.temperature_k.map(fmt).unwrap_or_else(|| "auto".into()));
        put("propagation.rtol", fmt(self.rtol));
        put("propagation.atol", fmt(self.atol));
        put("propagation.samples", self.samples.to_string());
        put("sensitivity.measurement_time_s", fmt(self.measurement_time_s));
        put(
            "optimize.free",
            self.optimize.free.iter().map(|v| v.name()).collect::<Vec<_>>().join(","),
        );
        put("optimize.density_min_cm3", fmt(self.optimize.density.0));
        put("optimize.density_max_cm3", fmt(self.optimize.density.1));
        put("optimize.length_min_cm", fmt(self.optimize.length.0));
        put("optimize.length_max_cm", fmt(self.optimize.length.1));
        put("optimize.power_min_w", fmt(self.optimize.power.0));
        put("optimize.power_max_w", fmt(self.optimize.power.1));
        put("optimize.max_evaluations", self.optimize.max_evaluations.to_string());
        put("spectrum.detuning_start_mhz", fmt(self.spectrum.start_mhz));
        put("spectrum.detuning_stop_mhz", fmt(self.spectrum.stop_mhz));
        put("spectrum.steps", self.spectrum.steps.to_string());
        put("spectrum.b_mg", fmt(self.spectrum.b_mg));
        if let Some(o) = &self.output {
            put("output.path", o.clone());
        }
        s
    }
}

/// Shortest representation that parses back to the same f64.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn number(key: &str, v: &str) -> Result<f64, ConfigError> {
    let (scale, body) = match v.strip_prefix("2pi*") {
        Some(rest) => (TAU, rest.trim()),
        None => (1.0, v),
    };
    let x: f64 = body.parse().map_err(|_| err(key, format!("expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(err(key, "must be finite"));
    }
    Ok(scale * x)
}

/// Config key for a library parameter name.
fn config_key(name: &str) -> String {
    let bare = name.rsplit('.').next().unwrap_or(name);
    match bare {
        "density" => "medium.density_cm3",
        "cell_length" => "medium.cell_length_cm",
        "wavelength" => "medium.wavelength_cm",
        "gamma" => "medium.gamma_rad_s",
        "gamma0" => "medium.gamma0_rad_s",
        "gamma_ab" => "medium.gamma_ab_rad_s",
        "delta_rho" => "medium.delta_rho",
        "power" => "field.power_w",
        "beam_diameter" => "field.beam_diameter_cm",
        "optical_frequency" => "field.optical_frequency_hz",
        "laser_detuning" => "field.laser_detuning_rad_s",
        "lande_g" => "magnetic.lande_g",
        "dipole" => "field.dipole_c_cm",
        "optical_frequency_hz" => "field.optical_frequency_hz",
        "analyzer_angle" => "polarimeter.analyzer_deg",
        "samples" => "propagation.samples",
        "max_nodes" => "doppler.max_nodes",
        "temperature" => "doppler.temperature_k",
        _ => return name.to_string(),
    }
    .to_string()
}
