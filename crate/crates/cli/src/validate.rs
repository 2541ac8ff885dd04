//! Cross-model consistency suites run by `faraday-sim validate`.
//!
//! The closed-form response is passed in, so a deliberately broken variant
//! can be run through the same suites.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use faraday_core::analytic::{alpha0, regime_ok, thick_medium, zeeman_coherence, LocalResponse};
use faraday_core::bloch::{build_rb87_d1_scheme, liouvillian, reduce_four_level, steady_state, DriveConditions, Relaxation, SusceptibilityPair};
use faraday_core::doppler::{average, doppler_sigma, make_grid, CONVERGENCE, MAX_NODES};
use faraday_core::engine::{velocity_grid, Experiment};
use faraday_core::propagation::{propagate, rotation_and_transmission, Controls};
use faraday_core::units::{rb87, FieldState, MediumParams, SUGGESTED_GAMMA};

/// Closed-form local response, `(omega, delta, medium)`.
pub type ResponseFn = dyn Fn(f64, f64, &MediumParams) -> faraday_core::Result<LocalResponse> + Sync;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// (name, value) pairs the suites test against.
pub const TOLERANCES: &[(&str, f64)] = &[
    ("four_level.coherence_rel", 2e-2),
    ("four_level.rates_rel", 5e-2),
    ("closed_form.rel", 1e-2),
    ("doppler.refinement_rel", CONVERGENCE),
    ("doppler.max_nodes", MAX_NODES as f64),
    ("doppler.voigt_rel", 1e-3),
    ("steady_state.hermiticity", 1e-10),
    ("steady_state.trace", 1e-10),
    ("steady_state.min_eigenvalue", -1e-6),
    ("symmetry.rotation_at_zero_rad", 1e-8),
    ("propagation.step_rel", 1e-6),
    ("optimum.alpha0_l_abs", 1e-3),
    ("optimum.slope_rel", 2e-2),
];

fn tol(name: &str) -> f64 {
    TOLERANCES.iter().find(|t| t.0 == name).unwrap().1
}

fn medium(density: f64) -> MediumParams {
    MediumParams::rb87_cell(density, SUGGESTED_GAMMA)
}

fn provider<'a>(response: &'a ResponseFn, delta: f64, m: MediumParams) -> impl Fn(f64, Complex64, Complex64) -> faraday_core::Result<SusceptibilityPair> + Sync + 'a {
    move |_z, p, q| {
        let omega = (0.5 * (p.norm_sqr() + q.norm_sqr())).sqrt();
        let r = response(omega, delta, &m)?;
        let k = m.wavenumber();
        Ok(SusceptibilityPair {
            chi_plus: Complex64::new(2.0 * r.phase_rate_plus / k, r.attenuation_rate / k),
            chi_minus: Complex64::new(2.0 * r.phase_rate_minus / k, r.attenuation_rate / k),
        })
    }
}

fn antisymmetry(response: &ResponseFn) -> faraday_core::Result<(bool, String)> {
    let m = medium(2e12);
    let scale = (m.gamma * m.gamma0).sqrt();
    let mut worst_local: f64 = 0.0;
    for i in 1..=5 {
        for j in -5..=5 {
            let omega = scale * 3f64.powi(i);
            let delta = m.gamma0 * 0.7 * j as f64;
            let r = response(omega, delta, &m)?;
            let s = r.phase_rate_plus.abs().max(1e-300);
            worst_local = worst_local.max((r.phase_rate_plus + r.phase_rate_minus).abs() / s);
        }
    }
    let omega0 = TAU * 11.48e6;
    let init = FieldState::linear(0.0, omega0);
    let k = m.wavenumber();
    let mut worst_odd: f64 = 0.0;
    let mut worst_even: f64 = 0.0;
    for i in 1..=10 {
        let delta = m.gamma0 * 0.4 * i as f64;
        let up = rotation_and_transmission(&propagate(init, &provider(response, delta, m), m.cell_length, k, &Controls::default())?);
        let down = rotation_and_transmission(&propagate(init, &provider(response, -delta, m), m.cell_length, k, &Controls::default())?);
        worst_odd = worst_odd.max((up.rotation + down.rotation).abs());
        worst_even = worst_even.max((up.transmission - down.transmission).abs());
    }
    let zero = rotation_and_transmission(&propagate(init, &provider(response, 0.0, m), m.cell_length, k, &Controls::default())?);
    let lim = tol("symmetry.rotation_at_zero_rad");
    let ok = worst_local < 1e-12 && worst_odd < lim && worst_even < 1e-12 && zero.rotation.abs() < lim;
    Ok((
        ok,
        format!(
            "local {worst_local:.2e}, rotation odd {worst_odd:.2e} rad, transmission even {worst_even:.2e}, phi(0) {:.2e} rad",
            zero.rotation
        ),
    ))
}

fn four_level(response: &ResponseFn) -> faraday_core::Result<(bool, String)> {
    let mut m = medium(1e11);
    m.cell_length = 1.0;
    let (mut worst_c, mut worst_r): (f64, f64) = (0.0, 0.0);
    let scale = (m.gamma * m.gamma0).sqrt();
    for i in 0..4 {
        let omega = scale * 10f64.powf(-0.5 + i as f64);
        let d0 = 0.5 * m.gamma0 + omega * omega / m.gamma;
        for delta in [0.0, 0.3 * d0, d0, 3.0 * d0] {
            let red = reduce_four_level(omega, delta, 0.5, &m)?;
            let lr = response(omega, delta, &red.medium)?;
            let c = zeeman_coherence(omega, delta, &red.medium);
            worst_c = worst_c.max((red.coherence - c).norm() / c.norm());
            worst_r = worst_r.max((red.attenuation_rate / lr.attenuation_rate - 1.0).abs());
            for (a, b) in [(red.phase_rate_plus, lr.phase_rate_plus), (red.phase_rate_minus, lr.phase_rate_minus)] {
                let s = lr.phase_rate_plus.abs();
                if s > 0.0 {
                    worst_r = worst_r.max((a - b).abs() / s);
                } else {
                    worst_r = worst_r.max((a - b).abs() / lr.attenuation_rate);
                }
            }
        }
    }
    let ok = worst_c < tol("four_level.coherence_rel") && worst_r < tol("four_level.rates_rel");
    Ok((ok, format!("coherence {worst_c:.2e}, rates {worst_r:.2e} on 4x4 grid")))
}

fn closed_form(response: &ResponseFn) -> faraday_core::Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for omega_mhz in [15.0, 30.0] {
        let omega = TAU * omega_mhz * 1e6;
        for a0l in [0.3, 0.8647] {
            let mut m = medium(1e12);
            m.density *= a0l / (alpha0(omega, &m)? * m.cell_length);
            for frac in [-0.8, 0.2, 1.0] {
                let exit2 = (1.0 - a0l) * omega * omega;
                let d = 0.04 * frac * (exit2 / m.gamma).min((m.gamma0 / m.gamma).sqrt() * exit2.sqrt());
                if !regime_ok(omega, d, a0l, &m) {
                    continue;
                }
                let cf = thick_medium(omega, d, 1.0, &m)?;
                let tr = propagate(FieldState::linear(0.0, omega), &provider(response, d, m), m.cell_length, m.wavenumber(), &Controls::default())?;
                let obs = rotation_and_transmission(&tr);
                worst = worst.max((obs.transmission / cf.transmission - 1.0).abs());
                if cf.rotation != 0.0 {
                    worst = worst.max((obs.rotation / cf.rotation - 1.0).abs());
                }
                n += 1;
            }
        }
    }
    Ok((n >= 10 && worst < tol("closed_form.rel"), format!("{n} points, worst {worst:.2e}")))
}

fn doppler() -> faraday_core::Result<(bool, String)> {
    // Voigt oracle: Lorentzian in kv against brute-force trapezoid
    let (t, mass, lambda) = (370.0, rb87::MASS_AMU, rb87::D1_WAVELENGTH_CM);
    let sigma = doppler_sigma(t, mass, lambda);
    let (c, w) = (0.3 * sigma, 1.5 * sigma);
    let lor = |kv: f64| Complex64::new(w / (w * w + (kv - c) * (kv - c)), (kv - c) / (w * w + (kv - c) * (kv - c)));
    let sampler = |kv: f64| Ok(SusceptibilityPair { chi_plus: lor(kv), chi_minus: lor(-kv) });
    let grid = make_grid(t, mass, lambda, 63)?;
    let q = average(sampler, &grid)?;
    let n = 200_000;
    let h = 16.0 * sigma / n as f64;
    let mut exact = Complex64::new(0.0, 0.0);
    for i in 0..=n {
        let kv = -8.0 * sigma + i as f64 * h;
        let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
        exact += lor(kv) * (wgt * h * (-0.5 * (kv / sigma).powi(2)).exp() / (sigma * TAU.sqrt()));
    }
    let voigt = (q.chi_plus - exact).norm() / exact.norm();
    let exp = Experiment::rb87_default(1e12, SUGGESTED_GAMMA);
    let g = velocity_grid(&exp, &[-0.1, 0.1])?;
    let ok = voigt < tol("doppler.voigt_rel") && g.len() <= MAX_NODES;
    Ok((ok, format!("voigt {voigt:.2e}, escalation at 1e12 cm^-3 settled at {} nodes", g.len())))
}

fn invariants() -> faraday_core::Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut herm, mut trace, mut min_eig): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    let cases = 40;
    for _ in 0..cases {
        let b = rng.gen_range(-1.0..1.0);
        let s = build_rb87_d1_scheme(b)?;
        let om = rng.gen_range(0.0..TAU * 30e6);
        let drive = DriveConditions {
            omega_plus: Complex64::from_polar(om, rng.gen_range(0.0..TAU)),
            omega_minus: Complex64::from_polar(om * rng.gen_range(0.0..1.5), rng.gen_range(0.0..TAU)),
            laser_detuning: rng.gen_range(-TAU * 1e9..TAU * 1e9),
            doppler_shift: rng.gen_range(-TAU * 5e8..TAU * 5e8),
        };
        let relax = Relaxation {
            gamma: SUGGESTED_GAMMA * rng.gen_range(0.5..2.0),
            gamma0: TAU * 5e3 * rng.gen_range(0.2..5.0),
        };
        let ss = steady_state(&liouvillian(&s, &drive, &relax)?)?;
        herm = herm.max(ss.hermiticity_error());
        trace = trace.max((ss.trace() - 1.0).norm());
        min_eig = min_eig.min(ss.min_eigenvalue());
    }
    let ok = herm < tol("steady_state.hermiticity") && trace < tol("steady_state.trace") && min_eig >= tol("steady_state.min_eigenvalue");
    Ok((ok, format!("{cases} drives: hermiticity {herm:.2e}, trace {trace:.2e}, min eigenvalue {min_eig:.2e}")))
}

fn record(name: &'static str, r: faraday_core::Result<(bool, String)>) -> SuiteResult {
    match r {
        Ok((passed, detail)) => SuiteResult { name, passed, detail },
        Err(e) => SuiteResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run_suites(response: &ResponseFn) -> Vec<SuiteResult> {
    vec![
        record("antisymmetry", antisymmetry(response)),
        record("four_level_reduction", four_level(response)),
        record("closed_form_vs_integrated", closed_form(response)),
        record("doppler_convergence", doppler()),
        record("steady_state_invariants", invariants()),
    ]
}

pub fn report(results: &[SuiteResult]) -> String {
    let mut s = String::new();
    for r in results {
        writeln!(s, "suite={} result={} detail=\"{}\"", r.name, if r.passed { "pass" } else { "fail" }, r.detail).unwrap();
    }
    for (name, v) in TOLERANCES {
        if v.fract() == 0.0 && v.abs() >= 1.0 {
            writeln!(s, "tolerance {name} = {v}").unwrap();
        } else {
            writeln!(s, "tolerance {name} = {v:e}").unwrap();
        }
    }
    s
}
