//! Medium response of one velocity class assembled from optical coherences.

use num_complex::Complex64;

use super::liouvillian::{liouvillian, DriveConditions, Relaxation};
use super::scheme::LevelScheme;
use super::steady::{steady_state, SteadyState};
use crate::error::{Error, Result};
use crate::units::MediumParams;

/// Complex susceptibilities of the two circular components, defined by
/// dOmega/dz = i (k/2) chi Omega. Im chi > 0 is loss; Re chi is twice the
/// phase rate over k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SusceptibilityPair {
    pub chi_plus: Complex64,
    pub chi_minus: Complex64,
}

impl SusceptibilityPair {
    pub const ZERO: SusceptibilityPair = SusceptibilityPair {
        chi_plus: Complex64::new(0.0, 0.0),
        chi_minus: Complex64::new(0.0, 0.0),
    };

    pub fn scale(self, s: f64) -> Self {
        SusceptibilityPair {
            chi_plus: self.chi_plus * s,
            chi_minus: self.chi_minus * s,
        }
    }

}

impl std::ops::Add for SusceptibilityPair {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        SusceptibilityPair {
            chi_plus: self.chi_plus + o.chi_plus,
            chi_minus: self.chi_minus + o.chi_minus,
        }
    }
}

/// Field coupling constant 3 N lambda^2 gamma_ab / (8 pi), cm^-1 s^-1:
/// dOmega_q/dz = i eta sum_eg c_eg rho_eg in the standard phase convention.
pub fn coupling_constant(medium: &MediumParams) -> f64 {
    3.0 * medium.density * medium.wavelength * medium.wavelength * medium.gamma_ab
        / (8.0 * std::f64::consts::PI)
}

/// Susceptibilities for a given steady state. Components with zero drive
/// amplitude have no defined linear response and yield NaN; see
/// [`solve_susceptibility`] for the weak-probe treatment.
pub fn susceptibility(
    scheme: &LevelScheme,
    drive: &DriveConditions,
    state: &SteadyState,
    medium: &MediumParams,
) -> SusceptibilityPair {
    let pref = 2.0 * coupling_constant(medium) / medium.wavenumber();
    let mut sum = [Complex64::new(0.0, 0.0); 2];
    for c in &scheme.couplings {
        let slot = match c.q {
            1 => 0,
            -1 => 1,
            _ => continue,
        };
        sum[slot] += state.rho[(c.excited, c.ground)] * c.amplitude;
    }
    let chi = |s: Complex64, omega: Complex64| {
        if omega == Complex64::new(0.0, 0.0) {
            Complex64::new(f64::NAN, f64::NAN)
        } else {
            // standard convention, then mapped to the library convention
            let std = s / omega.conj() * pref;
            -std.conj()
        }
    };
    SusceptibilityPair {
        chi_plus: chi(sum[0], drive.omega_plus),
        chi_minus: chi(sum[1], drive.omega_minus),
    }
}

/// Relative amplitude of the weak probe that stands in for a vanishing component.
const PROBE: f64 = 1e-6;

/// Builds the generator, solves the steady state and returns the response.
///
/// A component weaker than 1e-6 of the reference scale (the other component
/// or, for no drive, gamma) is replaced by a probe of that size, giving its
/// linear response. A degenerate solve is retried once with the laser
/// detuning perturbed by 1e-9 gamma.
pub fn solve_susceptibility(
    scheme: &LevelScheme,
    drive: &DriveConditions,
    relax: &Relaxation,
    medium: &MediumParams,
) -> Result<(SusceptibilityPair, SteadyState)> {
    let mut d = *drive;
    let reference = d.omega_plus.norm().max(d.omega_minus.norm()).max(relax.gamma);
    let probe = Complex64::new(PROBE * reference, 0.0);
    let floor = PROBE * reference;
    if d.omega_plus.norm() < floor {
        d.omega_plus = probe;
    }
    if d.omega_minus.norm() < floor {
        d.omega_minus = probe;
    }
    let g = liouvillian(scheme, &d, relax)?;
    let state = match steady_state(&g) {
        Err(Error::DegenerateSteadyState { .. }) => {
            let mut p = d;
            p.laser_detuning += 1e-9 * relax.gamma;
            steady_state(&liouvillian(scheme, &p, relax)?)?
        }
        other => other?,
    };
    Ok((susceptibility(scheme, &d, &state, medium), state))
}
