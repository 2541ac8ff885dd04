//! Response providers for the propagator and the per-field-point pipeline.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::analytic::local_response;
use crate::bloch::{build_rb87_d1_scheme, solve_susceptibility, DriveConditions, LevelScheme, Relaxation, SusceptibilityPair};
use crate::doppler::{average, escalate, make_grid, VelocityGrid, CONVERGENCE, MAX_NODES};
use crate::error::{invalid, Result};
use crate::propagation::{propagate, Controls, PropagationTrace, ResponseProvider};
use crate::units::{rabi_from_power, rb87, zeeman_shift, FieldParams, FieldState, MagneticSpec, MediumParams};
use crate::vapor::temperature_for_density;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    #[default]
    Analytic,
    Multilevel,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Multilevel => "multilevel",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "analytic" => Some(Engine::Analytic),
            "multilevel" => Some(Engine::Multilevel),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerSpec {
    pub enabled: bool,
    pub max_nodes: usize,
    /// Cell temperature in K; derived from the density when `None`.
    pub temperature: Option<f64>,
}

impl Default for DopplerSpec {
    fn default() -> Self {
        DopplerSpec {
            enabled: true,
            max_nodes: MAX_NODES,
            temperature: None,
        }
    }
}

/// Everything that fixes one propagation apart from the magnetic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experiment {
    pub medium: MediumParams,
    pub field: FieldParams,
    /// Lande factor of the four-state model.
    pub lande_g: f64,
    /// Reduced dipole used to convert power to a Rabi frequency, C cm.
    pub dipole: f64,
    pub doppler: DopplerSpec,
    pub controls: Controls,
}

impl Experiment {
    /// 87Rb D1 cell with 3 mW in a 2 mm beam, resonant with F=2 -> F'=1.
    pub fn rb87_default(density: f64, gamma: f64) -> Self {
        Experiment {
            medium: MediumParams::rb87_cell(density, gamma),
            field: FieldParams {
                power: 3e-3,
                beam_diameter: 0.2,
                optical_frequency: rb87::D1_FREQUENCY_HZ,
                laser_detuning: 0.0,
            },
            lande_g: 0.5,
            dipole: rb87::D1_DIPOLE_C_CM,
            doppler: DopplerSpec::default(),
            controls: Controls::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        self.field.validate()?;
        if !(self.lande_g.is_finite() && self.lande_g != 0.0) {
            return Err(invalid("lande_g", "must be finite and nonzero"));
        }
        if !(self.dipole > 0.0) {
            return Err(invalid("dipole", "must be > 0"));
        }
        if self.doppler.max_nodes == 0 {
            return Err(invalid("doppler.max_nodes", "must be >= 1"));
        }
        if let Some(t) = self.doppler.temperature {
            if !(t > 0.0) {
                return Err(invalid("doppler.temperature", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Rabi frequency of each circular component at the entrance.
    pub fn input_rabi(&self) -> Result<f64> {
        rabi_from_power(&self.field, self.dipole)
    }

    pub fn input_state(&self) -> Result<FieldState> {
        Ok(FieldState::linear(0.0, self.input_rabi()?))
    }

    pub fn temperature(&self) -> Result<f64> {
        match self.doppler.temperature {
            Some(t) => Ok(t),
            None => temperature_for_density(self.medium.density),
        }
    }

    pub fn relaxation(&self) -> Relaxation {
        Relaxation {
            gamma: self.medium.gamma,
            gamma0: self.medium.gamma0,
        }
    }
}

/// Four-state closed-form response. Both components see the rms Rabi
/// frequency, which is exact for the equal-amplitude input.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticProvider {
    pub medium: MediumParams,
    /// Zeeman shift, rad/s.
    pub delta: f64,
}

impl ResponseProvider for AnalyticProvider {
    fn response(&self, _z: f64, p: Complex64, m: Complex64) -> Result<SusceptibilityPair> {
        let omega = (0.5 * (p.norm_sqr() + m.norm_sqr())).sqrt();
        let r = local_response(omega, self.delta, &self.medium)?;
        let k = self.medium.wavenumber();
        let im = r.attenuation_rate / k;
        Ok(SusceptibilityPair {
            chi_plus: Complex64::new(2.0 * r.phase_rate_plus / k, im),
            chi_minus: Complex64::new(2.0 * r.phase_rate_minus / k, im),
        })
    }
}

/// Velocity-averaged 16-state response at one magnetic field.
#[derive(Debug, Clone)]
pub struct MultilevelProvider {
    pub scheme: LevelScheme,
    pub relax: Relaxation,
    pub medium: MediumParams,
    pub laser_detuning: f64,
    pub grid: VelocityGrid,
}

impl MultilevelProvider {
    pub fn new(exp: &Experiment, b_gauss: f64, grid: VelocityGrid) -> Result<Self> {
        Ok(MultilevelProvider {
            scheme: build_rb87_d1_scheme(b_gauss)?,
            relax: exp.relaxation(),
            medium: exp.medium,
            laser_detuning: exp.field.laser_detuning,
            grid,
        })
    }

    pub fn class_response(&self, p: Complex64, m: Complex64, kv: f64) -> Result<SusceptibilityPair> {
        let drive = DriveConditions {
            omega_plus: p,
            omega_minus: m,
            laser_detuning: self.laser_detuning,
            doppler_shift: kv,
        };
        Ok(solve_susceptibility(&self.scheme, &drive, &self.relax, &self.medium)?.0)
    }
}

impl ResponseProvider for MultilevelProvider {
    fn response(&self, _z: f64, p: Complex64, m: Complex64) -> Result<SusceptibilityPair> {
        average(|kv| self.class_response(p, m, kv), &self.grid)
    }
}

/// Lowest local power, relative to the input, at which the velocity grid is
/// checked. Weaker fields at |B| of a few 100 mG resolve the bare optical
/// line in kv, which 127 Hermite nodes cannot follow.
pub const CHECK_POWER_FRACTION: f64 = 0.25;

/// Velocity grid shared by all field points of a run.
///
/// The node count is escalated until the averaged response converges at the
/// entrance power and at [`CHECK_POWER_FRACTION`] of it, each at zero field
/// and at the largest |B| requested.
pub fn velocity_grid(exp: &Experiment, b_values: &[f64]) -> Result<VelocityGrid> {
    velocity_grid_checked(exp, b_values, CHECK_POWER_FRACTION)
}

/// As [`velocity_grid`], with the weaker check field at `power_fraction` of
/// the entrance power.
pub fn velocity_grid_checked(exp: &Experiment, b_values: &[f64], power_fraction: f64) -> Result<VelocityGrid> {
    if !(power_fraction > 0.0 && power_fraction <= 1.0) {
        return Err(invalid("power_fraction", "must lie in (0, 1]"));
    }
    let t = exp.temperature()?;
    let lambda = exp.medium.wavelength;
    if !exp.doppler.enabled {
        return make_grid(t, rb87::MASS_AMU, lambda, 1);
    }
    let b_max = b_values.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let omega = exp.input_rabi()?;
    let mut providers = vec![MultilevelProvider::new(exp, 0.0, make_grid(t, rb87::MASS_AMU, lambda, 1)?)?];
    if b_max > 0.0 {
        let p0 = providers[0].clone();
        providers.push(MultilevelProvider {
            scheme: build_rb87_d1_scheme(b_max)?,
            ..p0
        });
    }
    let mut samplers: Vec<Box<dyn Fn(f64) -> Result<SusceptibilityPair> + Sync + '_>> = Vec::new();
    for p in &providers {
        for w in [omega, omega * power_fraction.sqrt()] {
            let c = Complex64::new(w, 0.0);
            samplers.push(Box::new(move |kv| p.class_response(c, c, kv)));
        }
    }
    let start = 7.min(exp.doppler.max_nodes);
    let conv = escalate(&samplers, t, rb87::MASS_AMU, lambda, start, exp.doppler.max_nodes, CONVERGENCE)?;
    Ok(conv.into_iter().next().unwrap().grid)
}

/// Propagates the input field through the cell at field `b_gauss`.
/// `grid` is required by the multilevel engine.
pub fn propagate_at(exp: &Experiment, engine: Engine, b_gauss: f64, grid: Option<&VelocityGrid>) -> Result<PropagationTrace> {
    let init = exp.input_state()?;
    let k = exp.medium.wavenumber();
    let l = exp.medium.cell_length;
    match engine {
        Engine::Analytic => {
            let provider = AnalyticProvider {
                medium: exp.medium,
                delta: zeeman_shift(&MagneticSpec::new(b_gauss, exp.lande_g)),
            };
            propagate(init, &provider, l, k, &exp.controls)
        }
        Engine::Multilevel => {
            let grid = match grid {
                Some(g) => g.clone(),
                None => velocity_grid(exp, &[b_gauss])?,
            };
            let provider = MultilevelProvider::new(exp, b_gauss, grid)?;
            propagate(init, &provider, l, k, &exp.controls)
        }
    }
}

/// Zeeman shift of the four-state model at `b_gauss`, rad/s.
pub fn four_state_delta(exp: &Experiment, b_gauss: f64) -> f64 {
    zeeman_shift(&MagneticSpec::new(b_gauss, exp.lande_g))
}

/// Doppler width sqrt(8 ln 2) sigma of the cell, Hz (diagnostics).
pub fn doppler_fwhm_hz(exp: &Experiment) -> Result<f64> {
    let t = exp.temperature()?;
    Ok((8.0 * 2f64.ln()).sqrt() * crate::doppler::doppler_sigma(t, rb87::MASS_AMU, exp.medium.wavelength) / TAU)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{alpha0, thick_medium};
    use crate::propagation::rotation_and_transmission;
    use crate::units::SUGGESTED_GAMMA;

    #[test]
    fn engine_names_round_trip() {
        for e in [Engine::Analytic, Engine::Multilevel] {
            assert_eq!(Engine::from_name(e.name()), Some(e));
        }
        assert_eq!(Engine::from_name("exact"), None);
    }

    #[test]
    fn analytic_propagation_matches_closed_form() {
        // optically thick, strongly saturated: N raised so that alpha0 L ~ 0.6
        let mut exp = Experiment::rb87_default(1e12, SUGGESTED_GAMMA);
        let omega = exp.input_rabi().unwrap();
        let a = alpha0(omega, &exp.medium).unwrap() * exp.medium.cell_length;
        exp.medium.density *= 0.6 / a;
        let a0l = 0.6;
        for b in [-2e-4, 1e-4, 5e-4] {
            let delta = four_state_delta(&exp, b);
            let closed = thick_medium(omega, delta, 1.0, &exp.medium).unwrap();
            assert!(closed.regime_ok, "b = {b}");
            let trace = propagate_at(&exp, Engine::Analytic, b, None).unwrap();
            let obs = rotation_and_transmission(&trace);
            assert!((obs.transmission - closed.transmission).abs() < 1e-2 * closed.transmission);
            assert!((obs.rotation - closed.rotation).abs() < 1e-2 * closed.rotation.abs());
            assert!((closed.transmission - (1.0 - a0l)).abs() < 1e-9);
        }
    }

    #[test]
    fn tolerance_refinement_changes_rotation_little() {
        let mut exp = Experiment::rb87_default(5e12, SUGGESTED_GAMMA);
        let coarse = rotation_and_transmission(&propagate_at(&exp, Engine::Analytic, 3e-4, None).unwrap());
        exp.controls.rtol = 1e-8;
        exp.controls.atol = 1e-8;
        let fine = rotation_and_transmission(&propagate_at(&exp, Engine::Analytic, 3e-4, None).unwrap());
        assert!((coarse.rotation - fine.rotation).abs() < 1e-4);
    }

    #[test]
    fn cold_grid_has_one_node() {
        let mut exp = Experiment::rb87_default(1e12, SUGGESTED_GAMMA);
        exp.doppler.enabled = false;
        let g = velocity_grid(&exp, &[1e-3]).unwrap();
        assert_eq!(g.len(), 1);
        assert!(exp.temperature().unwrap() > 360.0 && exp.temperature().unwrap() < 380.0);
    }

    #[test]
    fn rejects_bad_experiment() {
        let mut exp = Experiment::rb87_default(1e12, SUGGESTED_GAMMA);
        assert!(exp.validate().is_ok());
        exp.doppler.temperature = Some(-1.0);
        assert!(exp.validate().is_err());
    }

    #[test]
    fn weak_check_field_exhausts_the_rule() {
        let exp = Experiment::rb87_default(1e12, SUGGESTED_GAMMA);
        let g = velocity_grid(&exp, &[0.0]).unwrap();
        assert!(g.len() > 1 && g.len() <= crate::doppler::MAX_NODES);
        let e = velocity_grid_checked(&exp, &[0.0], 1e-3).unwrap_err();
        assert!(matches!(e, crate::Error::QuadratureNotConverged { .. }), "{e}");
        assert!(velocity_grid_checked(&exp, &[0.0], 0.0).is_err());
    }
}
