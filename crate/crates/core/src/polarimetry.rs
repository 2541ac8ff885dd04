//! Analyzer signal, magnetic-field sweeps and shot-noise sensitivity.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::doppler::VelocityGrid;
use crate::engine::{propagate_at, velocity_grid, velocity_grid_checked, Engine, Experiment, CHECK_POWER_FRACTION};
use crate::error::{invalid, Error, Result};
use crate::propagation::rotation_and_transmission;
use crate::units::{FieldState, PLANCK};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarimeterSpec {
    /// Analyzer axis measured from the input polarization, rad in [0, pi).
    pub analyzer_angle: f64,
}

impl Default for PolarimeterSpec {
    fn default() -> Self {
        PolarimeterSpec {
            analyzer_angle: PI / 4.0,
        }
    }
}

impl PolarimeterSpec {
    pub fn new(analyzer_angle: f64) -> Result<Self> {
        if !(0.0..PI).contains(&analyzer_angle) {
            return Err(invalid("polarimeter.analyzer_angle", "must lie in [0, 180) degrees"));
        }
        Ok(PolarimeterSpec { analyzer_angle })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivitySpec {
    /// Measurement time, s.
    pub measurement_time: f64,
    /// Optical frequency, Hz.
    pub optical_frequency: f64,
}

impl SensitivitySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.measurement_time > 0.0) {
            return Err(invalid("sensitivity.measurement_time_s", "must be > 0"));
        }
        if !(self.optical_frequency > 0.0) {
            return Err(invalid("field.optical_frequency_hz", "must be > 0"));
        }
        Ok(())
    }
}

/// Cartesian components of the output field,
/// E_x = (O+ + O-)/sqrt2 and E_y = -i (O+ - O-)/sqrt2, so that a positive
/// (phi+ - phi-)/2 turns the polarization from x toward y.
pub fn cartesian(state: &FieldState) -> (Complex64, Complex64) {
    let (p, m) = (state.omega_plus, state.omega_minus);
    let i = Complex64::new(0.0, 1.0);
    ((p + m) * FRAC_1_SQRT_2, -i * (p - m) * FRAC_1_SQRT_2)
}

/// Fraction of the free-space power reaching the detector behind the
/// analyzer. `input_power` is the power scale |O+|^2 + |O-|^2 at z = 0.
pub fn analyzer_signal(state: &FieldState, spec: &PolarimeterSpec, input_power: f64) -> f64 {
    let (ex, ey) = cartesian(state);
    let (s, c) = spec.analyzer_angle.sin_cos();
    (ex * c + ey * s).norm_sqr() / input_power
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaradayRow {
    pub b_gauss: f64,
    /// P(L)/P(0).
    pub transmission: f64,
    pub rotation: f64,
    pub ellipticity: f64,
    /// Detector signal normalized to the free-space power.
    pub signal: f64,
    /// Failure of this point; numeric fields are NaN when set.
    pub error: Option<String>,
}

impl FaradayRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FaradayCurve {
    pub rows: Vec<FaradayRow>,
}

pub const CURVE_HEADER: &str = "B_gauss,transmission,rotation_rad,ellipticity_rad,signal,status";

impl FaradayCurve {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CURVE_HEADER}\n");
        for r in &self.rows {
            let status = match &r.error {
                None => "ok".to_string(),
                Some(e) => e.replace([',', '\n'], ";"),
            };
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.b_gauss, r.transmission, r.rotation, r.ellipticity, r.signal, status
            )
            .unwrap();
        }
        out
    }

    fn ok_rows(&self) -> impl Iterator<Item = &FaradayRow> {
        self.rows.iter().filter(|r| r.is_ok())
    }

    /// Row of largest |rotation|.
    pub fn peak_rotation(&self) -> Option<&FaradayRow> {
        self.ok_rows().max_by(|a, b| a.rotation.abs().total_cmp(&b.rotation.abs()))
    }

    pub fn peak_signal(&self) -> Option<&FaradayRow> {
        self.ok_rows().max_by(|a, b| a.signal.total_cmp(&b.signal))
    }

    pub fn failures(&self) -> usize {
        self.rows.len() - self.ok_rows().count()
    }

    /// Half-width of the central fit window, a third of the field of peak
    /// rotation (the dispersive half-width). Falls back to a third of the
    /// scan when the peak lies at the edge.
    pub fn dispersive_window(&self) -> Option<f64> {
        let peak = self.ok_rows().filter(|r| r.b_gauss > 0.0).max_by(|a, b| a.rotation.abs().total_cmp(&b.rotation.abs()))?;
        Some(peak.b_gauss / 3.0)
    }
}

fn failed_row(b: f64, e: &Error) -> FaradayRow {
    FaradayRow {
        b_gauss: b,
        transmission: f64::NAN,
        rotation: f64::NAN,
        ellipticity: f64::NAN,
        signal: f64::NAN,
        error: Some(e.to_string()),
    }
}

fn sweep_rows(exp: &Experiment, bs: &[f64], engine: Engine, grid: Option<&VelocityGrid>, polarimeter: &PolarimeterSpec) -> Result<Vec<FaradayRow>> {
    let p0 = exp.input_state()?.power_scale();
    Ok(bs
        .par_iter()
        .map(|&b| match propagate_at(exp, engine, b, grid) {
            Ok(trace) => {
                let obs = rotation_and_transmission(&trace);
                FaradayRow {
                    b_gauss: b,
                    transmission: obs.transmission,
                    rotation: obs.rotation,
                    ellipticity: obs.ellipticity,
                    signal: analyzer_signal(&trace.final_state, polarimeter, p0),
                    error: None,
                }
            }
            Err(e) => failed_row(b, &e),
        })
        .collect())
}

/// One propagation per field value; rows come back sorted by B. A failing
/// point is recorded in its row and the sweep continues. Setup failures
/// (invalid experiment, velocity grid) abort the sweep.
///
/// Multilevel sweeps whose transmission drops below the power at which the
/// velocity grid was checked are re-checked at the lowest transmission
/// seen and rerun if the grid changes. Rows that cannot be covered
/// (escalation fails) are marked failed.
pub fn faraday_sweep(exp: &Experiment, b_list: &[f64], engine: Engine, polarimeter: &PolarimeterSpec) -> Result<FaradayCurve> {
    exp.validate()?;
    if let Some(b) = b_list.iter().find(|b| !b.is_finite()) {
        return Err(invalid("scan", format!("non-finite field {b}")));
    }
    let mut bs = b_list.to_vec();
    bs.sort_by(f64::total_cmp);
    let grid = match engine {
        Engine::Multilevel => Some(velocity_grid(exp, &bs)?),
        Engine::Analytic => None,
    };
    let mut rows = sweep_rows(exp, &bs, engine, grid.as_ref(), polarimeter)?;
    let t_min = rows.iter().filter(|r| r.is_ok()).map(|r| r.transmission).fold(f64::INFINITY, f64::min);
    if let Some(g) = grid.as_ref().filter(|g| g.len() > 1 && t_min < CHECK_POWER_FRACTION) {
        // margin for the weaker field reached inside the cell at other B
        let fraction = 0.8 * t_min;
        match velocity_grid_checked(exp, &bs, fraction) {
            Ok(finer) if finer.len() != g.len() => rows = sweep_rows(exp, &bs, engine, Some(&finer), polarimeter)?,
            Ok(_) => {}
            Err(e) => {
                for r in rows.iter_mut().filter(|r| r.is_ok() && r.transmission < CHECK_POWER_FRACTION) {
                    *r = failed_row(r.b_gauss, &e);
                }
            }
        }
    }
    Ok(FaradayCurve { rows })
}

/// Least-squares slope of rotation against B over rows with |B| <= window.
pub fn central_slope(curve: &FaradayCurve, window_gauss: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .ok_rows()
        .filter(|r| r.b_gauss.abs() <= window_gauss * (1.0 + 1e-12))
        .map(|r| (r.b_gauss, r.rotation))
        .collect();
    let has_both = pts.iter().any(|p| p.0 < 0.0) && pts.iter().any(|p| p.0 > 0.0);
    if pts.len() < 5 || !has_both {
        return Err(Error::InsufficientRows {
            needed: 5,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Photon shot-noise limit on the rotation angle, sqrt(h nu / (P t)).
pub fn shot_noise_floor(power_out: f64, spec: &SensitivitySpec) -> Result<f64> {
    spec.validate()?;
    if !(power_out > 0.0) {
        return Err(Error::ZeroTransmittedPower);
    }
    Ok((PLANCK * spec.optical_frequency / (power_out * spec.measurement_time)).sqrt())
}

/// Smallest detectable field, G (per sqrt(Hz) for a 1 s measurement).
pub fn b_min(slope: f64, phase_error: f64) -> Result<f64> {
    if slope == 0.0 || !slope.is_finite() {
        return Err(invalid("slope", "must be finite and nonzero"));
    }
    Ok(phase_error / slope.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{C_LIGHT, SUGGESTED_GAMMA};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rotated(phi: f64, amp: f64) -> FieldState {
        FieldState {
            z: 0.0,
            omega_plus: Complex64::from_polar(amp, phi),
            omega_minus: Complex64::from_polar(amp, -phi),
        }
    }

    #[test]
    fn malus_law() {
        let spec = PolarimeterSpec::default();
        let p0 = 2.0;
        assert_relative_eq!(analyzer_signal(&rotated(0.0, 1.0), &spec, p0), 0.5, epsilon = 1e-15);
        for phi in [-0.3, 0.2, 0.7] {
            let expect = (PI / 4.0 - phi).cos().powi(2);
            assert_relative_eq!(analyzer_signal(&rotated(phi, 1.0), &spec, p0), expect, epsilon = 1e-14);
        }
        assert_relative_eq!(analyzer_signal(&rotated(PI / 4.0, 1.0), &spec, p0), 1.0, epsilon = 1e-14);
        let t = (-2.0f64).exp();
        let s = analyzer_signal(&rotated(0.0, t.sqrt()), &spec, p0);
        assert_relative_eq!(s, 0.5 * t, epsilon = 1e-15);
        assert!((s - 0.0677).abs() < 1e-4);
    }

    #[test]
    fn analyzer_angle_range() {
        assert!(PolarimeterSpec::new(PI).is_err());
        assert!(PolarimeterSpec::new(-0.1).is_err());
        assert!(PolarimeterSpec::new(0.0).is_ok());
    }

    proptest! {
        #[test]
        fn global_phase_and_two_ports(
            ap in 0.0f64..2.0, am in 0.0f64..2.0,
            pp in -7.0f64..7.0, pm in -7.0f64..7.0,
            g in -7.0f64..7.0, theta in 0.0f64..(PI / 2.0),
        ) {
            let s = FieldState {
                z: 1.0,
                omega_plus: Complex64::from_polar(ap, pp),
                omega_minus: Complex64::from_polar(am, pm),
            };
            let ph = Complex64::from_polar(1.0, g);
            let t = FieldState { omega_plus: s.omega_plus * ph, omega_minus: s.omega_minus * ph, ..s };
            let spec = PolarimeterSpec::new(theta).unwrap();
            let other = PolarimeterSpec::new(theta + PI / 2.0).unwrap();
            let p0 = 8.0;
            prop_assert!((analyzer_signal(&s, &spec, p0) - analyzer_signal(&t, &spec, p0)).abs() < 1e-12);
            let sum = analyzer_signal(&s, &spec, p0) + analyzer_signal(&s, &other, p0);
            prop_assert!((sum - s.power_scale() / p0).abs() < 1e-12);
        }
    }

    fn curve(points: &[(f64, f64)]) -> FaradayCurve {
        FaradayCurve {
            rows: points
                .iter()
                .map(|&(b, r)| FaradayRow {
                    b_gauss: b,
                    transmission: 1.0,
                    rotation: r,
                    ellipticity: 0.0,
                    signal: 0.5,
                    error: None,
                })
                .collect(),
        }
    }

    #[test]
    fn slope_of_linear_curve_is_exact() {
        let pts: Vec<(f64, f64)> = (-10..=10).map(|i| (i as f64 * 1e-4, 123.0 * i as f64 * 1e-4)).collect();
        assert_relative_eq!(central_slope(&curve(&pts), 5e-4).unwrap(), 123.0, max_relative = 1e-12);
        assert!(matches!(central_slope(&curve(&pts), 1e-4), Err(Error::InsufficientRows { found: 3, .. })));
    }

    #[test]
    fn shot_noise_examples() {
        let spec = SensitivitySpec {
            measurement_time: 1.0,
            optical_frequency: C_LIGHT / 795e-9,
        };
        let p = (-2.0f64).exp() * 3e-3;
        let d = shot_noise_floor(p, &spec).unwrap();
        assert!((d - 2.5e-8).abs() < 0.05e-8, "{d}");
        let long = SensitivitySpec { measurement_time: 4.0, ..spec };
        assert_relative_eq!(shot_noise_floor(p, &long).unwrap(), d / 2.0, max_relative = 1e-14);
        assert_relative_eq!(shot_noise_floor(4.0 * p, &spec).unwrap(), d / 2.0, max_relative = 1e-14);
        assert!(matches!(shot_noise_floor(0.0, &spec), Err(Error::ZeroTransmittedPower)));
    }

    #[test]
    fn b_min_examples() {
        let b = b_min(1.8e2, 2.5e-8).unwrap();
        assert!((b - 1.39e-10).abs() < 0.01e-10);
        assert_relative_eq!(b_min(3.6e2, 2.5e-8).unwrap(), b / 2.0, max_relative = 1e-14);
        assert!(b_min(0.0, 1.0).is_err());
    }

    #[test]
    fn sweep_rows_are_sorted_and_antisymmetric() {
        let exp = Experiment::rb87_default(2e12, SUGGESTED_GAMMA);
        let bs = [3e-4, -3e-4, 0.0, 1e-4, -1e-4];
        let c = faraday_sweep(&exp, &bs, Engine::Analytic, &PolarimeterSpec::default()).unwrap();
        assert!(c.rows.windows(2).all(|w| w[0].b_gauss < w[1].b_gauss));
        assert_eq!(c.failures(), 0);
        assert_eq!(c.rows[2].rotation, 0.0);
        for i in 0..2 {
            assert_eq!(c.rows[i].rotation, -c.rows[4 - i].rotation);
            assert_eq!(c.rows[i].transmission, c.rows[4 - i].transmission);
        }
        let csv = c.to_csv();
        assert!(csv.starts_with(CURVE_HEADER));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn failing_point_is_annotated() {
        // the level scheme refuses |B| > 10 G; the other row survives
        let mut exp = Experiment::rb87_default(1e12, SUGGESTED_GAMMA);
        exp.doppler.enabled = false;
        let c = faraday_sweep(&exp, &[20.0, 0.0], Engine::Multilevel, &PolarimeterSpec::default()).unwrap();
        assert_eq!(c.failures(), 1);
        assert!(c.rows[0].is_ok());
        assert!(c.rows[0].rotation.abs() < 1e-8);
        assert!(c.rows[1].rotation.is_nan());
        let line = c.to_csv().lines().nth(2).unwrap().to_string();
        assert!(line.contains("NaN") && !line.ends_with(",ok"));
    }
}
