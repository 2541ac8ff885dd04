//! Generator of the optical Bloch equations in the rotating frame.
//!
//! The density matrix is vectorized row-major, index `i * n + j` for rho_ij.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::scheme::{LevelScheme, Manifold};
use crate::error::{invalid, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Drive of one velocity class.
///
/// Field amplitudes follow the library convention (see [`crate::bloch`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConditions {
    pub omega_plus: Complex64,
    pub omega_minus: Complex64,
    /// Laser detuning from the driven line centre, rad/s.
    pub laser_detuning: f64,
    /// Doppler shift k v of the velocity class, rad/s.
    pub doppler_shift: f64,
}

impl DriveConditions {
    pub fn resonant(omega: f64) -> Self {
        DriveConditions {
            omega_plus: Complex64::new(omega, 0.0),
            omega_minus: Complex64::new(omega, 0.0),
            laser_detuning: 0.0,
            doppler_shift: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = [
            self.omega_plus.re,
            self.omega_plus.im,
            self.omega_minus.re,
            self.omega_minus.im,
            self.laser_detuning,
            self.doppler_shift,
        ]
        .iter()
        .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(invalid("drive", "non-finite value"))
        }
    }
}

/// Relaxation rates other than radiative decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    /// Total decay rate of optical coherences, rad/s.
    pub gamma: f64,
    /// Ground-state relaxation (transit) rate, rad/s.
    pub gamma0: f64,
}

/// Sparse generator G with d vec(rho)/dt = G vec(rho), compressed rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    pub(crate) n: usize,
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) cols: Vec<usize>,
    pub(crate) vals: Vec<Complex64>,
}

impl Liouvillian {
    /// Number of levels; the operator acts on n*n vectors.
    pub fn levels(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim());
        (0..self.dim())
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.vals[k] * x[self.cols[k]])
                    .sum()
            })
            .collect()
    }

    pub fn apply_matrix(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.n;
        let x: Vec<Complex64> = (0..n * n).map(|k| rho[(k / n, k % n)]).collect();
        let y = self.apply(&x);
        DMatrix::from_fn(n, n, |i, j| y[i * n + j])
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for r in 0..self.dim() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }
}

/// Builds the generator: rotating-wave Hamiltonian, radiative decay with
/// coherence transfer, extra optical dephasing, and transit relaxation of
/// every element toward the unpolarized ground state.
pub fn liouvillian(scheme: &LevelScheme, drive: &DriveConditions, relax: &Relaxation) -> Result<Liouvillian> {
    drive.validate()?;
    let n = scheme.len();
    let gamma_rad = scheme.decay_rate;
    if !(relax.gamma0 > 0.0) {
        return Err(invalid("gamma0", "ground relaxation must be > 0"));
    }
    let extra = relax.gamma - 0.5 * gamma_rad - relax.gamma0;
    if extra < -1e-9 * relax.gamma {
        return Err(invalid(
            "gamma",
            format!("optical decay {} below gamma_ab/2 + gamma0", relax.gamma),
        ));
    }
    let extra = extra.max(0.0);
    let excited = |i: usize| scheme.states[i].manifold == Manifold::Excited;

    // Non-Hermitian effective Hamiltonian (hbar = 1, standard e^{-iwt} phases).
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    let frame = drive.laser_detuning - drive.doppler_shift;
    for i in 0..n {
        let e = scheme.energies[i] - if excited(i) { frame } else { 0.0 };
        h[(i, i)] = Complex64::new(e, 0.0);
    }
    for c in &scheme.couplings {
        let omega = match c.q {
            1 => drive.omega_plus.conj(),
            -1 => drive.omega_minus.conj(),
            _ => continue,
        };
        let v = -omega * c.amplitude;
        h[(c.excited, c.ground)] += v;
        h[(c.ground, c.excited)] += v.conj();
    }
    for q in -1..=1 {
        for a in scheme.couplings.iter().filter(|c| c.q == q) {
            for b in scheme.couplings.iter().filter(|c| c.q == q && c.ground == a.ground) {
                h[(a.excited, b.excited)] -= I * (0.5 * gamma_rad * a.amplitude * b.amplitude);
            }
        }
    }

    let dim = n * n;
    let mut dense = vec![ZERO; dim * dim];
    let mut add = |row: usize, col: usize, v: Complex64| dense[row * dim + col] += v;
    for i in 0..n {
        for k in 0..n {
            let hik = h[(i, k)];
            if hik != ZERO {
                for j in 0..n {
                    add(i * n + j, k * n + j, -I * hik);
                }
            }
            let hki = h[(i, k)].conj();
            if hki != ZERO {
                // rho H^dagger: (rho H^+)_{ji} = sum_k rho_jk conj(H_ik)
                for j in 0..n {
                    add(j * n + i, j * n + k, I * hki);
                }
            }
        }
    }
    for q in -1..=1 {
        let ops: Vec<_> = scheme.couplings.iter().filter(|c| c.q == q).collect();
        for a in &ops {
            for b in &ops {
                add(
                    a.ground * n + b.ground,
                    a.excited * n + b.excited,
                    Complex64::new(gamma_rad * a.amplitude * b.amplitude, 0.0),
                );
            }
        }
    }
    let grounds = scheme.ground_indices();
    let refill = relax.gamma0 / grounds.len() as f64;
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            let mut decay = relax.gamma0;
            if excited(i) != excited(j) {
                decay += extra;
            }
            add(r, r, Complex64::new(-decay, 0.0));
        }
    }
    for &g in &grounds {
        for k in 0..n {
            add(g * n + g, k * n + k, Complex64::new(refill, 0.0));
        }
    }

    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for r in 0..dim {
        for c in 0..dim {
            let v = dense[r * dim + c];
            if v != ZERO {
                cols.push(c);
                vals.push(v);
            }
        }
        row_ptr.push(cols.len());
    }
    Ok(Liouvillian { n, row_ptr, cols, vals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::scheme::build_rb87_d1_scheme;
    use crate::units::{rb87, SUGGESTED_GAMMA};
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn relax() -> Relaxation {
        Relaxation {
            gamma: SUGGESTED_GAMMA,
            gamma0: TAU * 5e3,
        }
    }

    fn uniform(n_ground: usize, scheme: &LevelScheme) -> DMatrix<Complex64> {
        let mut rho = DMatrix::zeros(scheme.len(), scheme.len());
        for g in scheme.ground_indices() {
            rho[(g, g)] = Complex64::new(1.0 / n_ground as f64, 0.0);
        }
        rho
    }

    #[test]
    fn undriven_uniform_state_is_stationary() {
        let s = build_rb87_d1_scheme(0.0).unwrap();
        let g = liouvillian(&s, &DriveConditions::resonant(0.0), &relax()).unwrap();
        let out = g.apply_matrix(&uniform(8, &s));
        assert!(out.iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn rejects_gamma_below_radiative_limit() {
        let s = build_rb87_d1_scheme(0.0).unwrap();
        let r = Relaxation {
            gamma: 0.4 * rb87::D1_GAMMA,
            gamma0: 1.0,
        };
        assert!(liouvillian(&s, &DriveConditions::resonant(1e6), &r).is_err());
    }

    fn random_state(seed: &[f64]) -> DMatrix<Complex64> {
        let n = 16;
        let a = DMatrix::from_fn(n, n, |i, j| Complex64::new(seed[(i * n + j) % seed.len()], seed[(j * 7 + i * 3 + 1) % seed.len()]));
        let rho = &a * a.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn trace_is_preserved(
            seed in proptest::collection::vec(-1.0f64..1.0, 37),
            om in 0.0f64..1e8,
            b in -1.0f64..1.0,
            det in -1e9f64..1e9,
        ) {
            let s = build_rb87_d1_scheme(b).unwrap();
            let drive = DriveConditions {
                omega_plus: Complex64::new(om, 0.3 * om),
                omega_minus: Complex64::new(0.5 * om, -om),
                laser_detuning: det,
                doppler_shift: 0.0,
            };
            let g = liouvillian(&s, &drive, &relax()).unwrap();
            let rho = random_state(&seed);
            let d = g.apply_matrix(&rho);
            let scale = g.norm();
            prop_assert!(d.trace().norm() <= 1e-13 * scale);
            // the generator maps Hermitian matrices to Hermitian matrices
            prop_assert!((&d - d.adjoint()).iter().all(|v| v.norm() <= 1e-13 * scale));
        }
    }
}
