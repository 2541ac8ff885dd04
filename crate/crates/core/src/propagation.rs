//! Propagation of the two circular components through the cell.
//!
//! The integrated variables are ln|Omega+-| and the unwrapped phases phi+-,
//! with d ln|Omega|/dz = -(k/2) Im chi and d phi/dz = (k/2) Re chi. The
//! response is re-evaluated at the current local amplitudes, so saturation
//! follows the field along z. Integration is explicit Dormand-Prince 5(4)
//! with error control and continuous output for the uniform samples.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::bloch::SusceptibilityPair;
use crate::error::{invalid, Error, Result};
use crate::units::FieldState;

/// Local medium response at position `z` for the current field.
pub trait ResponseProvider: Sync {
    fn response(&self, z: f64, omega_plus: Complex64, omega_minus: Complex64) -> Result<SusceptibilityPair>;
}

impl<F> ResponseProvider for F
where
    F: Fn(f64, Complex64, Complex64) -> Result<SusceptibilityPair> + Sync,
{
    fn response(&self, z: f64, p: Complex64, m: Complex64) -> Result<SusceptibilityPair> {
        self(z, p, m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub rtol: f64,
    pub atol: f64,
    /// Number of uniformly spaced samples in [0, L] (both ends included).
    pub samples: usize,
    pub max_steps: usize,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            rtol: 1e-6,
            atol: 1e-6,
            samples: 64,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationTrace {
    /// Field along z, uniform samples merged with the accepted steps.
    pub samples: Vec<FieldState>,
    /// Unwrapped (phi+, phi-) at each sample.
    pub phases: Vec<(f64, f64)>,
    pub initial: FieldState,
    pub final_state: FieldState,
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl PropagationTrace {
    /// Comma-separated records with a header line.
    pub fn to_csv(&self) -> String {
        let p0 = self.initial.power_scale();
        let mut out = String::from(
            "z_cm,re_omega_plus,im_omega_plus,re_omega_minus,im_omega_minus,power_rel,phi_plus,phi_minus\n",
        );
        for (s, (pp, pm)) in self.samples.iter().zip(&self.phases) {
            let rel = if p0 > 0.0 { s.power_scale() / p0 } else { 0.0 };
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                s.z, s.omega_plus.re, s.omega_plus.im, s.omega_minus.re, s.omega_minus.im, rel, pp, pm
            )
            .unwrap();
        }
        out
    }
}

type Vec4 = [f64; 4];

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-minus-fourth order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Continuous-output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Largest phase advance of one accepted step.
const MAX_PHASE_STEP: f64 = std::f64::consts::FRAC_PI_4;
/// Relative power increase tolerated before the provider is declared active.
const POWER_SLACK: f64 = 1e-9;

struct System<'a, P: ResponseProvider> {
    provider: &'a P,
    k_half: f64,
    active: [bool; 2],
}

impl<P: ResponseProvider> System<'_, P> {
    fn fields(&self, y: &Vec4) -> (Complex64, Complex64) {
        let f = |on: bool, ln: f64, ph: f64| {
            if on {
                Complex64::from_polar(ln.exp(), ph)
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        (f(self.active[0], y[0], y[1]), f(self.active[1], y[2], y[3]))
    }

    fn rhs(&self, z: f64, y: &Vec4) -> Result<Vec4> {
        let (p, m) = self.fields(y);
        let chi = self.provider.response(z, p, m)?;
        let mut d = [
            -self.k_half * chi.chi_plus.im,
            self.k_half * chi.chi_plus.re,
            -self.k_half * chi.chi_minus.im,
            self.k_half * chi.chi_minus.re,
        ];
        for (c, on) in self.active.iter().enumerate() {
            if !on {
                d[2 * c] = 0.0;
                d[2 * c + 1] = 0.0;
            }
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(invalid("response", format!("non-finite susceptibility at z = {z}")));
        }
        Ok(d)
    }

    fn state(&self, z: f64, y: &Vec4) -> FieldState {
        let (omega_plus, omega_minus) = self.fields(y);
        FieldState {
            z,
            omega_plus,
            omega_minus,
        }
    }

    fn power(&self, y: &Vec4) -> f64 {
        let mut p = 0.0;
        if self.active[0] {
            p += (2.0 * y[0]).exp();
        }
        if self.active[1] {
            p += (2.0 * y[2]).exp();
        }
        p
    }
}

fn axpy(y: &Vec4, h: f64, ks: &[Vec4], coeffs: &[f64]) -> Vec4 {
    let mut out = *y;
    for (k, &c) in ks.iter().zip(coeffs) {
        if c != 0.0 {
            for i in 0..4 {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

/// Integrates from z = 0 to `length` (cm). `wavenumber` is 2 pi / lambda in cm^-1.
pub fn propagate<P: ResponseProvider>(
    initial: FieldState,
    provider: &P,
    length: f64,
    wavenumber: f64,
    controls: &Controls,
) -> Result<PropagationTrace> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(invalid("cell_length", "must be > 0"));
    }
    if controls.samples < 2 {
        return Err(invalid("controls.samples", "need at least 2"));
    }
    let active = [initial.omega_plus.norm() > 0.0, initial.omega_minus.norm() > 0.0];
    let sys = System {
        provider,
        k_half: 0.5 * wavenumber,
        active,
    };
    let comp = |w: Complex64| if w.norm() > 0.0 { (w.norm().ln(), w.arg()) } else { (0.0, 0.0) };
    let (a0, b0) = comp(initial.omega_plus);
    let (a1, b1) = comp(initial.omega_minus);
    let mut y: Vec4 = [a0, b0, a1, b1];
    let start = FieldState { z: 0.0, ..initial };
    let mut samples = vec![start];
    let mut phases = vec![(y[1], y[3])];
    let mut next_sample = 1;
    let sample_z = |i: usize| length * i as f64 / (controls.samples - 1) as f64;

    if !active[0] && !active[1] {
        for i in 1..controls.samples {
            samples.push(FieldState { z: sample_z(i), ..start });
            phases.push((y[1], y[3]));
        }
        return Ok(finish(samples, phases, start, 0, 0));
    }

    let mut z = 0.0;
    let mut h = length / 64.0;
    let mut k1 = sys.rhs(z, &y)?;
    let mut power = sys.power(&y);
    let (mut accepted, mut rejected) = (0usize, 0usize);
    while z < length {
        if accepted + rejected >= controls.max_steps {
            return Err(Error::StepUnderflow { z });
        }
        let last = z + h >= length * (1.0 - 1e-14);
        if last {
            h = length - z;
        }
        if h < 1e-12 * length && !last {
            return Err(Error::StepUnderflow { z });
        }
        let mut ks: Vec<Vec4> = Vec::with_capacity(7);
        ks.push(k1);
        for s in 1..7 {
            let ys = axpy(&y, h, &ks, &A[s][..s]);
            ks.push(sys.rhs(z + C[s] * h, &ys)?);
        }
        let y_new = axpy(&y, h, &ks[..6], &A[6][..6]);
        let mut err: f64 = 0.0;
        for i in 0..4 {
            let est: f64 = (0..7).map(|s| E[s] * ks[s][i]).sum::<f64>() * h;
            let scale = if i % 2 == 0 {
                controls.atol
            } else {
                controls.atol + controls.rtol * y[i].abs().max(y_new[i].abs())
            };
            err = err.max(est.abs() / scale);
        }
        let phase_jump = (y_new[1] - y[1]).abs().max((y_new[3] - y[3]).abs());
        if err <= 1.0 && phase_jump < MAX_PHASE_STEP {
            let p_new = sys.power(&y_new);
            if p_new > power * (1.0 + POWER_SLACK) {
                return Err(Error::PowerIncrease {
                    z: z + h,
                    relative: p_new / power - 1.0,
                });
            }
            let z_new = if last { length } else { z + h };
            // continuous output for uniform samples inside (z, z_new]
            let mut dense: Option<[Vec4; 5]> = None;
            while next_sample < controls.samples && sample_z(next_sample) < z_new * (1.0 - 1e-15) {
                let zs = sample_z(next_sample);
                let r = dense.get_or_insert_with(|| {
                    let mut r = [[0.0; 4]; 5];
                    for i in 0..4 {
                        let dy = y_new[i] - y[i];
                        r[0][i] = y[i];
                        r[1][i] = dy;
                        r[2][i] = h * ks[0][i] - dy;
                        r[3][i] = dy - h * ks[6][i] - r[2][i];
                        r[4][i] = h * (0..7).map(|s| D[s] * ks[s][i]).sum::<f64>();
                    }
                    r
                });
                let th = (zs - z) / h;
                let mut ys = [0.0; 4];
                for i in 0..4 {
                    ys[i] = r[0][i] + th * (r[1][i] + (1.0 - th) * (r[2][i] + th * (r[3][i] + (1.0 - th) * r[4][i])));
                }
                samples.push(sys.state(zs, &ys));
                phases.push((ys[1], ys[3]));
                next_sample += 1;
            }
            z = z_new;
            y = y_new;
            k1 = ks[6];
            power = p_new;
            accepted += 1;
            if next_sample < controls.samples && (sample_z(next_sample) - z).abs() <= 1e-15 * length {
                next_sample += 1;
            }
            samples.push(sys.state(z, &y));
            phases.push((y[1], y[3]));
            if last {
                break;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            rejected += 1;
            let fac = if err > 1.0 { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.5 };
            h *= fac;
        }
    }
    Ok(finish(samples, phases, start, accepted, rejected))
}

fn finish(
    samples: Vec<FieldState>,
    phases: Vec<(f64, f64)>,
    initial: FieldState,
    accepted: usize,
    rejected: usize,
) -> PropagationTrace {
    let final_state = *samples.last().unwrap();
    let (phi_plus, phi_minus) = *phases.last().unwrap();
    PropagationTrace {
        samples,
        phases,
        initial,
        final_state,
        phi_plus,
        phi_minus,
        accepted_steps: accepted,
        rejected_steps: rejected,
    }
}

/// Output observables of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    /// (phi+ - phi-)/2 from the unwrapped phases, rad.
    pub rotation: f64,
    /// P(L)/P(0).
    pub transmission: f64,
    /// arctan[(|Omega+| - |Omega-|)/(|Omega+| + |Omega-|)] at z = L.
    pub ellipticity: f64,
}

pub fn rotation_and_transmission(trace: &PropagationTrace) -> Observables {
    let p0 = trace.initial.power_scale();
    let f = &trace.final_state;
    let (a, b) = (f.omega_plus.norm(), f.omega_minus.norm());
    Observables {
        rotation: 0.5 * (trace.phi_plus - trace.phi_minus),
        transmission: if p0 > 0.0 { f.power_scale() / p0 } else { 1.0 },
        ellipticity: if a + b > 0.0 { ((a - b) / (a + b)).atan() } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const K: f64 = 7.9e4;

    fn linear(omega: f64) -> FieldState {
        FieldState::linear(0.0, omega)
    }

    #[test]
    fn vacuum_leaves_field_unchanged() {
        let vacuum = |_: f64, _: Complex64, _: Complex64| Ok(SusceptibilityPair::ZERO);
        let init = FieldState {
            z: 0.0,
            omega_plus: Complex64::new(3.0, 1.0),
            omega_minus: Complex64::new(-2.0, 0.5),
        };
        let t = propagate(init, &vacuum, 3.0, K, &Controls::default()).unwrap();
        assert!((t.final_state.omega_plus - init.omega_plus).norm() < 1e-14);
        assert!((t.final_state.omega_minus - init.omega_minus).norm() < 1e-14);
        assert_eq!(t.final_state.z, 3.0);
    }

    #[test]
    fn beer_law() {
        let alpha = 0.7;
        let absorber = |_: f64, _: Complex64, _: Complex64| {
            let chi = Complex64::new(0.0, alpha / K);
            Ok(SusceptibilityPair {
                chi_plus: chi,
                chi_minus: chi,
            })
        };
        let t = propagate(linear(1e7), &absorber, 2.0, K, &Controls::default()).unwrap();
        let obs = rotation_and_transmission(&t);
        assert_relative_eq!(obs.transmission, (-alpha * 2.0f64).exp(), max_relative = 1e-8);
        for s in &t.samples {
            let expect = (-alpha * s.z).exp();
            assert_relative_eq!(s.power_scale() / t.initial.power_scale(), expect, max_relative = 1e-8);
        }
    }

    #[test]
    fn samples_are_monotone_and_include_uniform_grid() {
        // saturable absorber with a rotating contribution
        let p = |_: f64, a: Complex64, b: Complex64| {
            let s = 1.0 / (1.0 + (a.norm_sqr() + b.norm_sqr()) / 2e14);
            Ok(SusceptibilityPair {
                chi_plus: Complex64::new(3.0 / K, 2.0 * s / K),
                chi_minus: Complex64::new(-3.0 / K, 2.0 * s / K),
            })
        };
        let t = propagate(linear(1e7), &p, 3.0, K, &Controls::default()).unwrap();
        assert!(t.samples.windows(2).all(|w| w[1].z > w[0].z));
        for i in 0..64 {
            let z = 3.0 * i as f64 / 63.0;
            assert!(t.samples.iter().any(|s| (s.z - z).abs() < 1e-12), "missing sample {z}");
        }
        assert!(t.samples.windows(2).all(|w| w[1].power_scale() <= w[0].power_scale()));
        // uniform phase advance 1.5 rad/cm on each component
        let obs = rotation_and_transmission(&t);
        assert_relative_eq!(obs.rotation, 4.5, max_relative = 1e-9);
        assert!(t.phases.windows(2).all(|w| (w[1].0 - w[0].0).abs() < MAX_PHASE_STEP));
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), t.samples.len() + 1);
        assert!(csv.starts_with("z_cm,re_omega_plus"));
    }

    #[test]
    fn gain_is_reported() {
        let gain = |_: f64, _: Complex64, _: Complex64| {
            Ok(SusceptibilityPair {
                chi_plus: Complex64::new(0.0, -1e-6),
                chi_minus: Complex64::new(0.0, 0.0),
            })
        };
        let err = propagate(linear(1.0), &gain, 1.0, K, &Controls::default()).unwrap_err();
        assert!(matches!(err, Error::PowerIncrease { .. }));
    }

    #[test]
    fn observables() {
        let vacuum = |_: f64, _: Complex64, _: Complex64| Ok(SusceptibilityPair::ZERO);
        let t = propagate(linear(2.0), &vacuum, 1.0, K, &Controls::default()).unwrap();
        let o = rotation_and_transmission(&t);
        assert_eq!(o.rotation, 0.0);
        assert_eq!(o.ellipticity, 0.0);
        let mut t2 = t.clone();
        t2.phi_plus = 0.7;
        t2.phi_minus = -0.7;
        assert_relative_eq!(rotation_and_transmission(&t2).rotation, 0.7);
    }

    #[test]
    fn single_component_and_dark_input() {
        let p = |_: f64, a: Complex64, b: Complex64| {
            assert_eq!(b, Complex64::new(0.0, 0.0));
            let _ = a;
            Ok(SusceptibilityPair {
                chi_plus: Complex64::new(1.0 / K, 1.0 / K),
                chi_minus: Complex64::new(f64::NAN, f64::NAN),
            })
        };
        let init = FieldState {
            z: 0.0,
            omega_plus: Complex64::new(1.0, 0.0),
            omega_minus: Complex64::new(0.0, 0.0),
        };
        let t = propagate(init, &p, 1.0, K, &Controls::default()).unwrap();
        assert_relative_eq!(rotation_and_transmission(&t).transmission, (-1.0f64).exp(), max_relative = 1e-9);
        let dark = FieldState::linear(0.0, 0.0);
        let t = propagate(dark, &p, 1.0, K, &Controls::default()).unwrap();
        assert_eq!(t.samples.len(), 64);
    }
}
