//! The four subcommands. Each returns the text for standard output and
//! leaves file writing and exit codes to the caller.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use faraday_core::analytic::{linear_zone, local_response, optimal_slope};
use faraday_core::doppler::{average, escalate, escalate_with, make_grid, make_uniform_grid, VelocityGrid, CONVERGENCE};
use faraday_core::engine::{doppler_fwhm_hz, Engine, Experiment, MultilevelProvider};
use faraday_core::optimize::{optimize_operating_point, SearchControls};
use faraday_core::polarimetry::{central_slope, faraday_sweep, FaradayCurve};
use faraday_core::units::{rb87, zeeman_shift, MagneticSpec};

use crate::config::{ConfigError, RunConfig};
use crate::validate::{report, run_suites};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] faraday_core::Error),
    #[error("validation failed")]
    Validation,
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 1,
            CliError::Numerical(_) => 2,
            CliError::Validation => 3,
        }
    }
}

/// Fit half-width for the central slope, G.
pub fn slope_window(cfg: &RunConfig, curve: &FaradayCurve) -> faraday_core::Result<f64> {
    match cfg.engine {
        Engine::Analytic => {
            let exp = cfg.experiment();
            let dz = linear_zone(exp.input_rabi()?, &exp.medium)?;
            Ok(dz / zeeman_shift(&MagneticSpec::new(1.0, exp.lande_g)).abs())
        }
        Engine::Multilevel => curve
            .dispersive_window()
            .ok_or(faraday_core::Error::InsufficientRows { needed: 5, found: 0 }),
    }
}

pub struct SweepOutput {
    pub curve: FaradayCurve,
    pub summary: String,
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepOutput, CliError> {
    let exp = cfg.experiment();
    let curve = faraday_sweep(&exp, &cfg.scan.values(), cfg.engine, &cfg.polarimeter())?;
    let mut s = String::new();
    writeln!(s, "engine: {}", cfg.engine.name()).unwrap();
    writeln!(s, "points: {} ({} failed)", curve.rows.len(), curve.failures()).unwrap();
    match slope_window(cfg, &curve).and_then(|w| Ok((w, central_slope(&curve, w)?))) {
        Ok((w, slope)) => writeln!(s, "central slope: {slope:.6e} rad/G (fit window +-{:.4} mG)", w * 1e3).unwrap(),
        Err(e) => writeln!(s, "central slope: n/a ({e})").unwrap(),
    }
    if let Some(p) = curve.peak_rotation() {
        writeln!(s, "peak rotation: {:.6e} rad at B = {:.4} mG", p.rotation, p.b_gauss * 1e3).unwrap();
    }
    if let Some(p) = curve.peak_signal() {
        writeln!(s, "peak signal: {:.6e} at B = {:.4} mG", p.signal, p.b_gauss * 1e3).unwrap();
    }
    if cfg.engine == Engine::Analytic {
        let slope = optimal_slope(&MagneticSpec::new(1.0, exp.lande_g), exp.medium.gamma0)?;
        writeln!(s, "optimal-thickness slope: {slope:.6e} rad/G").unwrap();
    }
    Ok(SweepOutput { curve, summary: s })
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<String, CliError> {
    let exp = cfg.experiment();
    let controls = SearchControls {
        max_evaluations: cfg.optimize.max_evaluations,
        ..SearchControls::default()
    };
    let free = cfg.optimize.bounds();
    let opt = optimize_operating_point(&exp, cfg.engine, &free, &cfg.sensitivity(), &controls)?;
    let p = opt.point;
    let mut s = String::new();
    writeln!(s, "engine: {}", cfg.engine.name()).unwrap();
    if free.is_empty() {
        writeln!(s, "free variables: none (evaluation only)").unwrap();
    } else {
        let names: Vec<&str> = free.iter().map(|b| b.var.name()).collect();
        writeln!(s, "free variables: {}", names.join(",")).unwrap();
    }
    writeln!(s, "evaluations: {}", opt.evaluations).unwrap();
    writeln!(s, "density_cm3: {:.9e}", p.density).unwrap();
    writeln!(s, "cell_length_cm: {:.9e}", p.length).unwrap();
    writeln!(s, "power_w: {:.9e}", p.power).unwrap();
    match p.alpha0_l {
        Some(a) => writeln!(s, "alpha0_L: {a:.9}").unwrap(),
        None => writeln!(s, "alpha0_L: n/a").unwrap(),
    }
    writeln!(s, "transmission: {:.9e}", p.transmission).unwrap();
    writeln!(s, "slope_rad_per_G: {:.9e}", p.slope).unwrap();
    writeln!(s, "phase_noise_rad: {:.9e}", p.phase_error).unwrap();
    writeln!(s, "b_min_G_per_rtHz: {:.9e}", p.b_min).unwrap();
    Ok(s)
}

/// Report text and whether every suite passed.
pub fn cmd_validate() -> (String, bool) {
    validate_with(&local_response)
}

/// Runs the suites with an arbitrary closed-form response.
pub fn validate_with(response: &crate::validate::ResponseFn) -> (String, bool) {
    let results = run_suites(response);
    (report(&results), results.iter().all(|r| r.passed))
}

pub const SPECTRUM_HEADER: &str = "detuning_MHz,im_chi_plus,im_chi_minus,re_chi_plus,re_chi_minus";

/// Node cap of the uniform fallback rule used by the spectrum.
pub const SPECTRUM_MAX_NODES: usize = 4127;

/// Velocity grid for the spectrum, checked at line centre and half a
/// Doppler width to either side. Weak fields leave the bare optical line in
/// each class, which the Hermite rule cannot follow; the uniform rule takes
/// over when Hermite escalation gives up.
fn spectrum_grid(exp: &Experiment, base: &MultilevelProvider, omega: Complex64) -> faraday_core::Result<VelocityGrid> {
    let t = exp.temperature()?;
    let lambda = exp.medium.wavelength;
    if !exp.doppler.enabled {
        return make_grid(t, rb87::MASS_AMU, lambda, 1);
    }
    let half = 0.5 * TAU * doppler_fwhm_hz(exp)?;
    let probes: Vec<MultilevelProvider> = [-half, 0.0, half]
        .iter()
        .map(|d| MultilevelProvider {
            laser_detuning: *d,
            ..base.clone()
        })
        .collect();
    let samplers: Vec<_> = probes.iter().map(|p| move |kv: f64| p.class_response(omega, omega, kv)).collect();
    let hermite = escalate(&samplers, t, rb87::MASS_AMU, lambda, 7.min(exp.doppler.max_nodes), exp.doppler.max_nodes, CONVERGENCE);
    match hermite {
        Ok(c) => Ok(c.into_iter().next().unwrap().grid),
        Err(faraday_core::Error::QuadratureNotConverged { .. }) => {
            let c = escalate_with(&samplers, |n| make_uniform_grid(t, rb87::MASS_AMU, lambda, n), 257, SPECTRUM_MAX_NODES, CONVERGENCE)?;
            Ok(c.into_iter().next().unwrap().grid)
        }
        Err(e) => Err(e),
    }
}

/// Velocity-averaged 16-state susceptibility at the input field against
/// laser detuning.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<String, CliError> {
    let exp = cfg.experiment();
    exp.validate()?;
    let b = cfg.spectrum.b_mg * 1e-3;
    let omega = Complex64::new(exp.input_rabi()?, 0.0);
    let mut base = MultilevelProvider::new(&exp, b, make_grid(exp.temperature()?, rb87::MASS_AMU, exp.medium.wavelength, 1)?)?;
    base.grid = spectrum_grid(&exp, &base, omega)?;
    let sp = cfg.spectrum;
    let det: Vec<f64> = (0..sp.steps)
        .map(|i| {
            if sp.steps == 1 {
                sp.start_mhz
            } else {
                sp.start_mhz + (sp.stop_mhz - sp.start_mhz) * i as f64 / (sp.steps - 1) as f64
            }
        })
        .collect();
    let rows: Vec<faraday_core::Result<_>> = det
        .par_iter()
        .map(|&d| {
            let p = MultilevelProvider {
                laser_detuning: TAU * d * 1e6,
                ..base.clone()
            };
            average(|kv| p.class_response(omega, omega, kv), &p.grid)
        })
        .collect();
    let mut s = format!("{SPECTRUM_HEADER}\n");
    for (d, r) in det.iter().zip(rows) {
        let c = r?;
        writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            d, c.chi_plus.im, c.chi_minus.im, c.chi_plus.re, c.chi_minus.re
        )
        .unwrap();
    }
    Ok(s)
}
