//! Physical constants, parameter records and conversions shared by every
//! other module.
//!
//! Conventions: rates and frequency shifts are angular (rad/s), magnetic
//! fields are in gauss, lengths in centimetres, powers in watts.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 2.997_924_58e8;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant, J/K.
pub const K_BOLTZMANN: f64 = 1.380_649e-23;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Bohr magneton over hbar, rad/(s G).
pub const BOHR_OVER_HBAR: f64 = TAU * 1.399_624_493_61e6;

/// 87Rb data for the D1 line.
pub mod rb87 {
    use std::f64::consts::TAU;

    /// Atomic mass, amu.
    pub const MASS_AMU: f64 = 86.909_180_527;
    /// Vacuum wavelength of the D1 line, cm.
    pub const D1_WAVELENGTH_CM: f64 = 7.949_788_511_56e-5;
    /// D1 optical frequency, Hz.
    pub const D1_FREQUENCY_HZ: f64 = 377.107_463_380e12;
    /// Natural linewidth (excited-state decay rate), rad/s.
    pub const D1_GAMMA: f64 = TAU * 5.746e6;
    /// Reduced dipole element <J=1/2||er||J'=1/2>, C cm.
    pub const D1_DIPOLE_C_CM: f64 = 2.537e-27;
    /// Ground hyperfine splitting (F=2 above F=1), rad/s.
    pub const GROUND_HFS: f64 = TAU * 6.834_682_610_904e9;
    /// 5P1/2 hyperfine splitting (F'=2 above F'=1), rad/s.
    pub const EXCITED_HFS: f64 = TAU * 814.5e6;
    /// Nuclear spin, twice its value.
    pub const TWO_I: i32 = 3;
    /// Natural isotopic abundance of 87Rb.
    pub const ABUNDANCE: f64 = 0.2783;
}

/// Suggested optical coherence decay rate for a cell with 3 Torr of Ne
/// (natural half-width plus pressure broadening), rad/s.
pub const SUGGESTED_GAMMA: f64 = TAU * 18.0e6;

/// How a configured Zeeman relaxation value maps onto the coherence decay
/// rate entering the Bloch equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gamma0Convention {
    /// The value is the rate itself. The thin-medium magnetic resonance then
    /// has half-width gamma0/2, so the value is also the resonance FWHM in
    /// units of the Zeeman shift.
    #[default]
    Rate,
    /// The value is a full width of the coherence decay; the rate is half of it.
    HalfWidth,
}

impl Gamma0Convention {
    pub fn rate(self, value: f64) -> f64 {
        match self {
            Gamma0Convention::Rate => value,
            Gamma0Convention::HalfWidth => 0.5 * value,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gamma0Convention::Rate => "rate",
            Gamma0Convention::HalfWidth => "half_width",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "rate" => Some(Gamma0Convention::Rate),
            "half_width" => Some(Gamma0Convention::HalfWidth),
            _ => None,
        }
    }
}

/// Vapor and relaxation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumParams {
    /// Density of the resonant isotope, cm^-3.
    pub density: f64,
    /// Cell length, cm.
    pub cell_length: f64,
    /// Optical wavelength, cm.
    pub wavelength: f64,
    /// Optical coherence decay rate (buffer-gas broadening included), rad/s.
    pub gamma: f64,
    /// Zeeman coherence decay rate, rad/s.
    pub gamma0: f64,
    /// Natural radiative width of the resonance, rad/s.
    pub gamma_ab: f64,
    /// Population difference between the coupled ground sublevels and the
    /// upper state (closed-form model only).
    pub delta_rho: f64,
}

impl MediumParams {
    /// Experimental cell of the reference measurement at 87Rb density
    /// `density` with optical decay rate `gamma`.
    pub fn rb87_cell(density: f64, gamma: f64) -> Self {
        MediumParams {
            density,
            cell_length: 3.0,
            wavelength: rb87::D1_WAVELENGTH_CM,
            gamma,
            gamma0: TAU * 5.0e3,
            gamma_ab: rb87::D1_GAMMA,
            delta_rho: 1.0 / 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("medium.density", self.density)?;
        positive("medium.cell_length", self.cell_length)?;
        positive("medium.wavelength", self.wavelength)?;
        positive("medium.gamma", self.gamma)?;
        positive("medium.gamma0", self.gamma0)?;
        positive("medium.gamma_ab", self.gamma_ab)?;
        if self.gamma < 0.5 * self.gamma_ab {
            return Err(invalid(
                "medium.gamma",
                format!(
                    "optical decay {} below radiative limit gamma_ab/2 = {}",
                    self.gamma,
                    0.5 * self.gamma_ab
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.delta_rho) {
            return Err(invalid("medium.delta_rho", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Optical wavenumber 2 pi / lambda, cm^-1.
    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }
}

/// Laser parameters at the cell entrance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    /// Total input power, W.
    pub power: f64,
    /// Top-hat beam diameter, cm.
    pub beam_diameter: f64,
    /// Optical frequency, Hz.
    pub optical_frequency: f64,
    /// Laser detuning from the F=2 -> F'=1 line centre, rad/s.
    pub laser_detuning: f64,
}

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(invalid("field.power", "must be finite and >= 0"));
        }
        positive("field.beam_diameter", self.beam_diameter)?;
        positive("field.optical_frequency", self.optical_frequency)?;
        if !self.laser_detuning.is_finite() {
            return Err(invalid("field.laser_detuning", "must be finite"));
        }
        Ok(())
    }

    /// Top-hat intensity, W/cm^2.
    pub fn intensity(&self) -> f64 {
        let r = 0.5 * self.beam_diameter;
        self.power / (PI * r * r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticSpec {
    /// Longitudinal field, G.
    pub b_gauss: f64,
    /// Lande factor of the ground sublevels.
    pub lande_g: f64,
}

impl MagneticSpec {
    pub fn new(b_gauss: f64, lande_g: f64) -> Self {
        MagneticSpec { b_gauss, lande_g }
    }

    pub const fn bohr_over_hbar() -> f64 {
        BOHR_OVER_HBAR
    }
}

/// The two circular field components, expressed as Rabi frequencies, at `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldState {
    /// Position, cm.
    pub z: f64,
    pub omega_plus: Complex64,
    pub omega_minus: Complex64,
}

impl FieldState {
    /// Linearly polarized input: equal, in-phase circular components.
    pub fn linear(z: f64, omega: f64) -> Self {
        FieldState {
            z,
            omega_plus: Complex64::new(omega, 0.0),
            omega_minus: Complex64::new(omega, 0.0),
        }
    }

    /// Power in units of |Omega|^2 (proportional to optical power).
    pub fn power_scale(&self) -> f64 {
        self.omega_plus.norm_sqr() + self.omega_minus.norm_sqr()
    }
}

/// Zeeman shift of the m = +1 sublevel, g mu_B B / hbar in rad/s.
pub fn zeeman_shift(mag: &MagneticSpec) -> f64 {
    mag.lande_g * BOHR_OVER_HBAR * mag.b_gauss
}

/// Weak-field inverse absorption length, 3/(4 pi) N lambda^2 gamma_ab/gamma.
pub fn kappa(medium: &MediumParams) -> Result<f64> {
    if medium.gamma == 0.0 {
        return Err(invalid("medium.gamma", "kappa undefined for gamma = 0"));
    }
    Ok(3.0 / (4.0 * PI)
        * medium.density
        * medium.wavelength
        * medium.wavelength
        * (medium.gamma_ab / medium.gamma))
}

/// Coupling frequency of EACH circular component of a linearly polarized
/// top-hat beam, each carrying half the power.
///
/// With the optical field written as E e^{-i w t} + c.c., the coupling is
/// dipole * E / hbar, half the full Rabi flopping frequency.
pub fn rabi_from_power(field: &FieldParams, dipole_c_cm: f64) -> Result<f64> {
    if !(field.beam_diameter > 0.0) {
        return Err(invalid("field.beam_diameter", "must be > 0"));
    }
    if !(dipole_c_cm > 0.0) {
        return Err(invalid("dipole", "must be > 0"));
    }
    if !(field.power >= 0.0) {
        return Err(invalid("field.power", "must be >= 0"));
    }
    // W/cm^2 -> W/m^2, half per circular component
    let intensity = 0.5 * field.intensity() * 1.0e4;
    let e_peak = (2.0 * intensity / (C_LIGHT * EPSILON_0)).sqrt();
    let dipole = dipole_c_cm * 1.0e-2;
    Ok(dipole * e_peak / (2.0 * HBAR))
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d1_field(power: f64) -> FieldParams {
        FieldParams {
            power,
            beam_diameter: 0.2,
            optical_frequency: rb87::D1_FREQUENCY_HZ,
            laser_detuning: 0.0,
        }
    }

    #[test]
    fn zeeman_shift_values() {
        assert_eq!(zeeman_shift(&MagneticSpec::new(0.0, 0.37)), 0.0);
        let up = zeeman_shift(&MagneticSpec::new(1e-3, 0.5));
        assert_relative_eq!(up, TAU * 699.8, max_relative = 1e-4);
        let down = zeeman_shift(&MagneticSpec::new(-1e-3, 0.5));
        assert_eq!(down, -up);
    }

    #[test]
    fn bohr_magneton_constant() {
        assert_relative_eq!(BOHR_OVER_HBAR, TAU * 1.399_624e6, max_relative = 1e-6);
    }

    #[test]
    fn kappa_values() {
        let mut m = MediumParams::rb87_cell(1e12, rb87::D1_GAMMA);
        m.wavelength = 7.95e-5;
        let k = kappa(&m).unwrap();
        // 3/(4 pi) * 1e12 * (7.95e-5)^2
        assert_relative_eq!(k, 0.238_732_414_6 * 6.3202_5e3, max_relative = 1e-6);
        assert!((k - 1.51e3).abs() < 5.0);
        m.density = 0.0;
        assert_eq!(kappa(&m).unwrap(), 0.0);
        m.gamma = 0.0;
        assert!(kappa(&m).is_err());
    }

    #[test]
    fn kappa_is_linear_in_density() {
        let m = MediumParams::rb87_cell(3e11, SUGGESTED_GAMMA);
        let m2 = MediumParams {
            density: 6e11,
            ..m
        };
        assert_relative_eq!(2.0 * kappa(&m).unwrap(), kappa(&m2).unwrap(), max_relative = 1e-15);
    }

    #[test]
    fn rabi_scaling() {
        assert_eq!(rabi_from_power(&d1_field(0.0), rb87::D1_DIPOLE_C_CM).unwrap(), 0.0);
        let a = rabi_from_power(&d1_field(1e-3), rb87::D1_DIPOLE_C_CM).unwrap();
        let b = rabi_from_power(&d1_field(4e-3), rb87::D1_DIPOLE_C_CM).unwrap();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-15);
        let bad = FieldParams {
            beam_diameter: 0.0,
            ..d1_field(1e-3)
        };
        assert!(rabi_from_power(&bad, rb87::D1_DIPOLE_C_CM).is_err());
    }

    #[test]
    fn rabi_hand_calculation() {
        // 3 mW through a 2 mm top-hat: 3e-3 / (pi 0.1^2) = 95.49 mW/cm^2.
        let field = d1_field(3e-3);
        assert_relative_eq!(field.intensity(), 0.095_492_965_9, max_relative = 1e-9);
        // Per-component 477.46 W/m^2; E = sqrt(2 I / (c eps0)) = 599.76 V/m;
        // Omega = 2.537e-29 * 599.76 / (2 * 1.054571817e-34) = 7.2147e7 rad/s
        let omega = rabi_from_power(&field, rb87::D1_DIPOLE_C_CM).unwrap();
        assert_relative_eq!(omega, 7.2147e7, max_relative = 2e-4);
        assert_relative_eq!(omega / TAU, 11.48e6, max_relative = 1e-3);
    }

    #[test]
    fn medium_validation() {
        let good = MediumParams::rb87_cell(1e12, SUGGESTED_GAMMA);
        assert!(good.validate().is_ok());
        let narrow = MediumParams {
            gamma: 0.4 * good.gamma_ab,
            ..good
        };
        assert!(narrow.validate().is_err());
        let bad_rho = MediumParams {
            delta_rho: 1.5,
            ..good
        };
        assert!(bad_rho.validate().is_err());
    }

    #[test]
    fn gamma0_conventions() {
        assert_eq!(Gamma0Convention::Rate.rate(10.0), 10.0);
        assert_eq!(Gamma0Convention::HalfWidth.rate(10.0), 5.0);
        for c in [Gamma0Convention::Rate, Gamma0Convention::HalfWidth] {
            assert_eq!(Gamma0Convention::from_name(c.name()), Some(c));
        }
    }
}
