//! Operating-point search: minimizes the shot-noise-limited B_min over a
//! subset of density, cell length and input power.

use std::cell::Cell;

use crate::analytic::{alpha0, thick_medium_slope};
use crate::engine::{Engine, Experiment};
use crate::error::{invalid, Error, Result};
use crate::polarimetry::{b_min, central_slope, faraday_sweep, shot_noise_floor, PolarimeterSpec, SensitivitySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeVar {
    Density,
    Length,
    Power,
}

impl FreeVar {
    pub fn name(self) -> &'static str {
        match self {
            FreeVar::Density => "density",
            FreeVar::Length => "length",
            FreeVar::Power => "power",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "density" | "N" => Some(FreeVar::Density),
            "length" | "L" => Some(FreeVar::Length),
            "power" => Some(FreeVar::Power),
            _ => None,
        }
    }

    fn get(self, exp: &Experiment) -> f64 {
        match self {
            FreeVar::Density => exp.medium.density,
            FreeVar::Length => exp.medium.cell_length,
            FreeVar::Power => exp.field.power,
        }
    }

    fn set(self, exp: &mut Experiment, v: f64) {
        match self {
            FreeVar::Density => exp.medium.density = v,
            FreeVar::Length => exp.medium.cell_length = v,
            FreeVar::Power => exp.field.power = v,
        }
    }
}

/// Search interval of one free variable (cm^-3, cm or W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub var: FreeVar,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub density: f64,
    pub length: f64,
    pub power: f64,
    /// Effective optical thickness; four-state engine only.
    pub alpha0_l: Option<f64>,
    /// P(L)/P(0) at zero field.
    pub transmission: f64,
    /// d phi / d B at zero field, rad/G.
    pub slope: f64,
    pub phase_error: f64,
    /// G/sqrt(Hz).
    pub b_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchControls {
    /// Relative width of the final bracket in each variable.
    pub tolerance: f64,
    /// Coordinate sweeps when several variables are free.
    pub sweeps: usize,
    pub max_evaluations: usize,
    /// Field step of the zero-field slope sweep (multilevel), G.
    pub slope_step: f64,
}

impl Default for SearchControls {
    fn default() -> Self {
        SearchControls {
            tolerance: 1e-8,
            sweeps: 4,
            max_evaluations: 2000,
            slope_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub point: OperatingPoint,
    pub evaluations: usize,
}

/// B_min of a fixed configuration.
pub fn evaluate(exp: &Experiment, engine: Engine, sens: &SensitivitySpec, controls: &SearchControls) -> Result<OperatingPoint> {
    exp.validate()?;
    let (alpha0_l, transmission, slope) = match engine {
        Engine::Analytic => {
            let a = alpha0(exp.input_rabi()?, &exp.medium)? * exp.medium.cell_length;
            if a >= 1.0 {
                return Err(Error::FullyAbsorbing { alpha0_l: a });
            }
            (Some(a), 1.0 - a, thick_medium_slope(a, exp.lande_g, exp.medium.gamma0))
        }
        Engine::Multilevel => {
            let h = controls.slope_step;
            let bs: Vec<f64> = (-2..=2).map(|i| i as f64 * h).collect();
            let curve = faraday_sweep(exp, &bs, engine, &PolarimeterSpec::default())?;
            if let Some(bad) = curve.rows.iter().find(|r| !r.is_ok()) {
                return Err(Error::Optimization(format!(
                    "slope sweep failed at B = {} G: {}",
                    bad.b_gauss,
                    bad.error.as_deref().unwrap_or("")
                )));
            }
            (None, curve.rows[2].transmission, central_slope(&curve, 2.0 * h)?)
        }
    };
    let power_out = exp.field.power * transmission;
    let phase_error = shot_noise_floor(power_out, sens)?;
    Ok(OperatingPoint {
        density: exp.medium.density,
        length: exp.medium.cell_length,
        power: exp.field.power,
        alpha0_l,
        transmission,
        slope,
        phase_error,
        b_min: b_min(slope, phase_error)?,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimum of `f` on [lo, hi] in ln x.
fn golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c.exp()), f(d.exp()));
    while (b - a) > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d.exp());
        }
    }
    let mid = 0.5 * (a + b);
    // endpoints win when the minimum sits on a bound
    let mut best = (f(mid.exp()), mid.exp());
    for x in [lo, hi] {
        let v = f(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    best.1
}

/// Minimizes B_min over the free variables within their bounds, starting
/// from the values in `exp`. One variable is searched by golden section in
/// log space; several are searched coordinate-wise for `controls.sweeps`
/// passes.
pub fn optimize_operating_point(
    exp: &Experiment,
    engine: Engine,
    free: &[Bounds],
    sens: &SensitivitySpec,
    controls: &SearchControls,
) -> Result<Optimum> {
    for b in free {
        if !(b.lo > 0.0 && b.hi >= b.lo && b.hi.is_finite()) {
            return Err(invalid(b.var.name(), format!("bounds [{}, {}] must satisfy 0 < lo <= hi < inf", b.lo, b.hi)));
        }
        if free.iter().filter(|o| o.var == b.var).count() > 1 {
            return Err(invalid(b.var.name(), "listed twice"));
        }
    }
    let evaluations = Cell::new(0usize);
    let cap_hit = Cell::new(false);
    let objective = |e: &Experiment| -> f64 {
        if evaluations.get() >= controls.max_evaluations {
            cap_hit.set(true);
            return f64::INFINITY;
        }
        evaluations.set(evaluations.get() + 1);
        match evaluate(e, engine, sens, controls) {
            Ok(p) => p.b_min,
            Err(_) => f64::INFINITY,
        }
    };
    let mut current = *exp;
    for b in free {
        let v = b.var.get(&current).clamp(b.lo, b.hi);
        b.var.set(&mut current, v);
    }
    let passes = if free.len() > 1 { controls.sweeps.max(1) } else { 1 };
    for _ in 0..passes {
        for b in free {
            let x = golden(
                |x| {
                    let mut e = current;
                    b.var.set(&mut e, x);
                    objective(&e)
                },
                b.lo,
                b.hi,
                controls.tolerance,
            );
            b.var.set(&mut current, x);
        }
    }
    if cap_hit.get() {
        return Err(Error::Optimization(format!(
            "evaluation cap of {} reached",
            controls.max_evaluations
        )));
    }
    let point = evaluate(&current, engine, sens, controls).map_err(|e| match e {
        Error::FullyAbsorbing { .. } | Error::ZeroTransmittedPower => {
            Error::Optimization(format!("no feasible point inside the bounds ({e})"))
        }
        other => other,
    })?;
    Ok(Optimum {
        point,
        evaluations: evaluations.get() + 1,
    })
}
