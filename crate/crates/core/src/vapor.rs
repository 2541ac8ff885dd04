//! Rubidium saturated vapor pressure and the temperature that produces a
//! given 87Rb number density.

use crate::error::{invalid, Result};
use crate::units::{rb87, K_BOLTZMANN};

/// Melting point of rubidium, K.
const MELTING_POINT: f64 = 312.46;
const TORR: f64 = 133.322_368;

/// Saturated vapor pressure over solid or liquid rubidium, Pa.
pub fn vapor_pressure(temperature: f64) -> f64 {
    let t = temperature;
    let log10_torr = if t < MELTING_POINT {
        -94.048_26 - 1961.258 / t - 0.037_716_87 * t + 42.575_26 * t.log10()
    } else {
        15.882_53 - 4529.635 / t + 0.000_586_63 * t - 2.991_38 * t.log10()
    };
    10f64.powf(log10_torr) * TORR
}

/// Number density of all Rb isotopes at saturation, cm^-3.
pub fn total_density(temperature: f64) -> f64 {
    vapor_pressure(temperature) / (K_BOLTZMANN * temperature) * 1e-6
}

/// Temperature at which natural-abundance vapor holds `density` 87Rb atoms
/// per cm^3. Bisection over 250-700 K.
pub fn temperature_for_density(density: f64) -> Result<f64> {
    let target = |t: f64| total_density(t) * rb87::ABUNDANCE - density;
    let (mut lo, mut hi) = (250.0, 700.0);
    if !(density > 0.0) || target(lo) > 0.0 || target(hi) < 0.0 {
        return Err(invalid(
            "medium.density",
            format!("{density:e} cm^-3 not reachable by saturated vapor between {lo} and {hi} K"),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if target(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
