//! Density-matrix solution of the four-state system, expressed in the
//! quantities of the closed-form model for side-by-side comparison.
//!
//! Correspondence: the closed-form Rabi frequency is the arm coupling
//! Omega/sqrt(3), its radiative width gamma_ab is the partial decay rate
//! into one ground sublevel (Gamma/3), and Delta rho is read off the steady
//! state as rho_{b b} - rho_{a a}. With the dipole phases used here the
//! closed-form coherence corresponds to -rho_{b+ b-}.

use num_complex::Complex64;

use super::liouvillian::{DriveConditions, Relaxation};
use super::scheme::{four_level_scheme, Manifold};
use super::susceptibility::solve_susceptibility;
use crate::error::{invalid, Result};
use crate::units::{MediumParams, BOHR_OVER_HBAR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    /// k Im chi, common to both components when the drive is symmetric, cm^-1.
    pub attenuation_rate: f64,
    pub phase_rate_plus: f64,
    pub phase_rate_minus: f64,
    pub coherence: Complex64,
    /// Four-state parameters equivalent to the solved system.
    pub medium: MediumParams,
    /// sigma+ minus sigma- attenuation rate.
    pub attenuation_split: f64,
}

/// Solves the four-state density matrix for closed-form Rabi frequency
/// `omega` and sublevel shift `delta` (rad/s). `medium.gamma_ab` is the
/// total radiative width of the excited state.
pub fn reduce_four_level(omega: f64, delta: f64, lande_g: f64, medium: &MediumParams) -> Result<Reduction> {
    if !(lande_g != 0.0 && lande_g.is_finite()) {
        return Err(invalid("lande_g", "must be finite and nonzero"));
    }
    let b = delta / (lande_g * BOHR_OVER_HBAR);
    let scheme = four_level_scheme(b, lande_g, medium.gamma_ab)?;
    let drive = DriveConditions::resonant(omega * 3f64.sqrt());
    let relax = Relaxation {
        gamma: medium.gamma,
        gamma0: medium.gamma0,
    };
    let (chi, ss) = solve_susceptibility(&scheme, &drive, &relax, medium)?;
    let bm = scheme.find(Manifold::Ground, 1, -1).unwrap();
    let bp = scheme.find(Manifold::Ground, 1, 1).unwrap();
    let a = scheme.find(Manifold::Excited, 0, 0).unwrap();
    let delta_rho = 0.5 * (ss.population(bm) + ss.population(bp)) - ss.population(a);
    let k = medium.wavenumber();
    let (ap, am) = (k * chi.chi_plus.im, k * chi.chi_minus.im);
    Ok(Reduction {
        attenuation_rate: 0.5 * (ap + am),
        attenuation_split: ap - am,
        phase_rate_plus: 0.5 * k * chi.chi_plus.re,
        phase_rate_minus: 0.5 * k * chi.chi_minus.re,
        coherence: -ss.rho[(bp, bm)],
        medium: MediumParams {
            gamma_ab: medium.gamma_ab / 3.0,
            delta_rho,
            ..*medium
        },
    })
}
