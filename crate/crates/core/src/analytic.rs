//! Closed-form four-state model: two ground sublevels b+ and b- (m = +-1)
//! coupled through one upper state a by the two circular components of a
//! linearly polarized field, with the ground sublevels shifted by +-delta.
//!
//! All Rabi frequencies enter only through their magnitude.

use std::f64::consts::E;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::units::{kappa, MagneticSpec, MediumParams, BOHR_OVER_HBAR};

/// Local propagation rates of the two circular components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalResponse {
    /// Power loss rate, (1/P) dP/dz = -attenuation_rate, cm^-1.
    pub attenuation_rate: f64,
    /// dphi+/dz, rad/cm.
    pub phase_rate_plus: f64,
    /// dphi-/dz, rad/cm.
    pub phase_rate_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinMediumShape {
    pub phi_max: f64,
    /// Half-width of the dispersive resonance in Zeeman shift, rad/s.
    pub half_width: f64,
}

impl ThinMediumShape {
    /// Rotation of a thin cell, phi_max * delta * delta0 / (delta^2 + delta0^2).
    pub fn rotation(&self, delta: f64) -> f64 {
        let d0 = self.half_width;
        self.phi_max * delta * d0 / (delta * delta + d0 * d0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThickMediumResult {
    /// P(L), W.
    pub power_out: f64,
    /// P(L)/P(0).
    pub transmission: f64,
    /// Rotation of the polarization plane, (phi+ - phi-)/2.
    pub rotation: f64,
    /// True when the strong-field, small-shift approximations behind the
    /// closed form hold along the whole cell (see [`regime_ok`]).
    pub regime_ok: bool,
}

fn denominator(omega2: f64, delta: f64, m: &MediumParams) -> f64 {
    let (g, g0) = (m.gamma, m.gamma0);
    let re = 2.0 * omega2 + g * g0 - 2.0 * delta * delta;
    let im = delta * (2.0 * g + g0);
    re * re + im * im
}

/// Attenuation and phase rates for Rabi frequency magnitude `omega` and
/// Zeeman shift `delta`.
pub fn local_response(omega: f64, delta: f64, medium: &MediumParams) -> Result<LocalResponse> {
    let k = kappa(medium)?;
    let (g, g0, dr) = (medium.gamma, medium.gamma0, medium.delta_rho);
    let omega2 = omega * omega;
    let d = denominator(omega2, delta, medium);
    if !(d > 0.0) || !d.is_finite() {
        return Err(invalid("omega/delta", format!("degenerate denominator {d}")));
    }
    let alpha = k * g * dr * (2.0 * omega2 * g0 + g * (4.0 * delta * delta + g0 * g0)) / d;
    let phase = 0.5 * k * g * delta * (4.0 * omega2 - 4.0 * delta * delta - g0 * g0) * dr / d;
    Ok(LocalResponse {
        attenuation_rate: alpha,
        phase_rate_plus: phase,
        phase_rate_minus: -phase,
    })
}

/// Ground-state Zeeman coherence rho_{b- b+}.
pub fn zeeman_coherence(omega: f64, delta: f64, medium: &MediumParams) -> Complex64 {
    let (g, g0) = (medium.gamma, medium.gamma0);
    let omega2 = omega * omega;
    let den = Complex64::new(2.0 * omega2 + g * g0 - 2.0 * delta * delta, delta * (2.0 * g + g0));
    Complex64::new(2.0 * omega2 * medium.delta_rho, 0.0) / den
}

/// Amplitude and width of the rotation resonance of an optically thin cell
/// (kappa L << 1), where the field is constant along z.
pub fn thin_medium_shape(omega: f64, medium: &MediumParams) -> Result<ThinMediumShape> {
    let k = kappa(medium)?;
    let omega2 = omega * omega;
    let (g, g0) = (medium.gamma, medium.gamma0);
    Ok(ThinMediumShape {
        phi_max: k * medium.cell_length * omega2 * medium.delta_rho / (2.0 * omega2 + g * g0),
        half_width: 0.5 * g0 + omega2 / g,
    })
}

/// Residual absorption of the coherently saturated medium at the entrance
/// Rabi frequency `omega0`, cm^-1.
pub fn alpha0(omega0: f64, medium: &MediumParams) -> Result<f64> {
    if omega0 == 0.0 || !omega0.is_finite() {
        return Err(invalid("omega0", "must be finite and nonzero"));
    }
    let k = kappa(medium)?;
    Ok(medium.delta_rho * k * medium.gamma * medium.gamma0 / (2.0 * omega0 * omega0))
}

/// Validity of the closed form. Both conditions are evaluated with the
/// weakest field in the cell, the exit field |Omega_L|^2 = (1 - a0 L) |Omega_0|^2:
/// |Omega_L|^2 >= 200 gamma gamma0 and
/// |delta| <= 0.05 min(|Omega_L|^2/gamma, sqrt(gamma0/gamma) |Omega_L|).
/// These keep every neglected term below about 0.5%.
pub fn regime_ok(omega0: f64, delta: f64, alpha0_l: f64, medium: &MediumParams) -> bool {
    let exit2 = (1.0 - alpha0_l) * omega0 * omega0;
    if !(exit2 > 0.0) {
        return false;
    }
    let (g, g0) = (medium.gamma, medium.gamma0);
    let strong = exit2 >= 200.0 * g * g0;
    let limit = 0.05 * (exit2 / g).min((g0 / g).sqrt() * exit2.sqrt());
    strong && delta.abs() <= limit
}

/// Integrated transmission and rotation of a thick, coherently saturated cell.
///
/// In this regime the power falls linearly, P(z) = (1 - a0 z) P(0), and the
/// ratio of phase rate to power loss rate is delta/gamma0, so
/// phi(L) = (delta/gamma0) ln[1/(1 - a0 L)].
pub fn thick_medium(
    omega0: f64,
    delta: f64,
    power_in: f64,
    medium: &MediumParams,
) -> Result<ThickMediumResult> {
    let a0l = alpha0(omega0, medium)? * medium.cell_length;
    if a0l >= 1.0 {
        return Err(Error::FullyAbsorbing { alpha0_l: a0l });
    }
    let transmission = 1.0 - a0l;
    Ok(ThickMediumResult {
        power_out: transmission * power_in,
        transmission,
        rotation: delta / medium.gamma0 * (-transmission.ln()),
        regime_ok: regime_ok(omega0, delta, a0l, medium),
    })
}

/// Optical thickness a0 L that maximizes the shot-noise-limited slope.
///
/// With T = 1 - a0 L the figure of merit is ln(1/T) sqrt(T), maximal at T = e^-2.
pub fn optimal_operating_point() -> f64 {
    1.0 - E.powi(-2)
}

/// Rotation slope at the optimal thickness, rad/G: (g mu_B/hbar)/gamma0 * ln(e^2).
pub fn optimal_slope(mag: &MagneticSpec, gamma0: f64) -> Result<f64> {
    if !(gamma0 > 0.0) {
        return Err(invalid("gamma0", "must be > 0"));
    }
    Ok(2.0 * mag.lande_g * BOHR_OVER_HBAR / gamma0)
}

/// Slope of the closed-form rotation with respect to B, rad/G.
pub fn thick_medium_slope(alpha0_l: f64, lande_g: f64, gamma0: f64) -> f64 {
    lande_g * BOHR_OVER_HBAR / gamma0 * (-(1.0 - alpha0_l).ln())
}

/// Half-width in Zeeman shift (rad/s) over which the thick-medium rotation
/// is linear in delta to better than about 0.1%, bounded by a third of the
/// thin-medium resonance width at the exit field.
pub fn linear_zone(omega0: f64, medium: &MediumParams) -> Result<f64> {
    let a0l = (alpha0(omega0, medium)? * medium.cell_length).min(1.0);
    let exit2 = ((1.0 - a0l) * omega0 * omega0).max(0.0);
    let (g, g0) = (medium.gamma, medium.gamma0);
    let thin = (0.5 * g0 + exit2 / g) / 3.0;
    let thick = 0.1 * (exit2 / g).min((g0 / g).sqrt() * exit2.sqrt());
    let w = if thick > 0.0 { thin.min(thick) } else { thin };
    Ok(w.max(0.5 * g0 / 3.0))
}
