//! Steady-state solve of G rho = 0 with Tr rho = 1.
//!
//! Only the block of density-matrix elements connected to the populations
//! through G can be nonzero in the steady state; everything else decays.
//! That block is found by a union-find over the sparsity pattern, rewritten
//! in real Hermitian parameters, and solved by dense LU with the first
//! population equation replaced by the trace condition.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::liouvillian::Liouvillian;
use crate::error::{Error, Result};

/// Relative pivot size below which the null space is treated as degenerate.
const PIVOT_LIMIT: f64 = 1e-13;
/// Residual bound relative to the Frobenius norm of G.
pub const RESIDUAL_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub rho: DMatrix<Complex64>,
}

impl SteadyState {
    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// max |rho - rho^dagger| / max |rho|.
    pub fn hermiticity_error(&self) -> f64 {
        let scale = self.rho.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let dev = (&self.rho - self.rho.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        dev / scale.max(f64::MIN_POSITIVE)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn population(&self, i: usize) -> f64 {
        self.rho[(i, i)].re
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Real parameter layout of the population block.
struct Layout {
    /// For element (i, j) of the block: real-variable index of Re (and Im
    /// for i != j). Elements outside the block map to None.
    slot: Vec<Option<usize>>,
    /// Rows of the real system: (element index, take imaginary part).
    rows: Vec<(usize, bool)>,
    /// Row index holding the first population equation (replaced by the trace).
    trace_row: usize,
    unknowns: usize,
}

fn layout(g: &Liouvillian) -> Layout {
    let n = g.levels();
    let dim = g.dim();
    let mut uf = UnionFind((0..dim).collect());
    for (r, c, _) in g.entries() {
        uf.union(r, c);
    }
    for i in 0..n {
        uf.union(0, i * n + i);
    }
    let root = uf.find(0);
    let in_block: Vec<bool> = (0..dim).map(|k| uf.find(k) == root).collect();
    let mut slot = vec![None; dim];
    let mut rows = Vec::new();
    let mut unknowns = 0;
    for i in 0..n {
        for j in i..n {
            let k = i * n + j;
            if !in_block[k] {
                continue;
            }
            slot[k] = Some(unknowns);
            if i == j {
                rows.push((k, false));
                unknowns += 1;
            } else {
                rows.push((k, false));
                rows.push((k, true));
                unknowns += 2;
            }
        }
    }
    let trace_row = rows.iter().position(|&(k, _)| k == 0).unwrap();
    Layout {
        slot,
        rows,
        trace_row,
        unknowns,
    }
}

/// Real coefficient pair of element (k, l) in terms of the parameters.
/// Returns (variable index, coefficient) contributions for rho_kl.
fn element_terms(lay: &Layout, n: usize, k: usize, l: usize) -> [(Option<usize>, Complex64); 2] {
    let (a, b, conj) = if k <= l { (k, l, false) } else { (l, k, true) };
    match lay.slot[a * n + b] {
        None => [(None, Complex64::new(0.0, 0.0)), (None, Complex64::new(0.0, 0.0))],
        Some(s) if a == b => [(Some(s), Complex64::new(1.0, 0.0)), (None, Complex64::new(0.0, 0.0))],
        Some(s) => {
            let im = if conj { -1.0 } else { 1.0 };
            [(Some(s), Complex64::new(1.0, 0.0)), (Some(s + 1), Complex64::new(0.0, im))]
        }
    }
}

fn assemble(g: &Liouvillian, lay: &Layout) -> DMatrix<f64> {
    let n = g.levels();
    let m = lay.unknowns;
    let mut row_of = vec![[usize::MAX; 2]; g.dim()];
    for (r, &(k, imag)) in lay.rows.iter().enumerate() {
        row_of[k][imag as usize] = r;
    }
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (r, c, v) in g.entries() {
        let (i, j) = (r / n, r % n);
        if i > j || lay.slot[r].is_none() {
            continue;
        }
        for (var, coef) in element_terms(lay, n, c / n, c % n) {
            if let Some(var) = var {
                let z = v * coef;
                a[(row_of[r][0], var)] += z.re;
                if i != j {
                    a[(row_of[r][1], var)] += z.im;
                }
            }
        }
    }
    a
}

fn unpack(lay: &Layout, n: usize, x: &DVector<f64>) -> DMatrix<Complex64> {
    let mut rho = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            if let Some(s) = lay.slot[i * n + j] {
                if i == j {
                    rho[(i, i)] = Complex64::new(x[s], 0.0);
                } else {
                    let z = Complex64::new(x[s], x[s + 1]);
                    rho[(i, j)] = z;
                    rho[(j, i)] = z.conj();
                }
            }
        }
    }
    rho
}

/// Unique trace-one null vector of `g`.
pub fn steady_state(g: &Liouvillian) -> Result<SteadyState> {
    let n = g.levels();
    let lay = layout(g);
    let mut a = assemble(g, &lay);
    let mut b = DVector::<f64>::zeros(lay.unknowns);
    // rows are equilibrated so the trace row and the physics rows are commensurate
    for r in 0..lay.unknowns {
        let s = a.row(r).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s > 0.0 {
            a.row_mut(r).scale_mut(1.0 / s);
        }
    }
    a.row_mut(lay.trace_row).fill(0.0);
    for i in 0..n {
        if let Some(s) = lay.slot[i * n + i] {
            a[(lay.trace_row, s)] = 1.0;
        }
    }
    b[lay.trace_row] = 1.0;

    let lu = a.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..lay.unknowns).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > PIVOT_LIMIT * max) {
        return Err(Error::DegenerateSteadyState { pivot: min / max });
    }
    let x = lu.solve(&b).ok_or(Error::DegenerateSteadyState { pivot: 0.0 })?;
    let rho = unpack(&lay, n, &x);
    let residual = g.apply_matrix(&rho).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let limit = RESIDUAL_LIMIT * g.norm();
    if !(residual <= limit) {
        return Err(Error::SteadyStateResidual { residual, limit });
    }
    Ok(SteadyState { rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::liouvillian::{liouvillian, DriveConditions, Relaxation};
    use crate::bloch::scheme::{build_rb87_d1_scheme, LevelScheme, Manifold};
    use crate::units::SUGGESTED_GAMMA;
    use std::f64::consts::TAU;

    fn relax() -> Relaxation {
        Relaxation {
            gamma: SUGGESTED_GAMMA,
            gamma0: TAU * 5e3,
        }
    }

    #[test]
    fn undriven_state_is_uniform_ground() {
        let s = build_rb87_d1_scheme(0.0).unwrap();
        let g = liouvillian(&s, &DriveConditions::resonant(0.0), &relax()).unwrap();
        let ss = steady_state(&g).unwrap();
        for i in 0..16 {
            let expect = if s.states[i].manifold == Manifold::Ground { 0.125 } else { 0.0 };
            assert!((ss.population(i) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn block_has_128_real_unknowns() {
        let s = build_rb87_d1_scheme(0.1).unwrap();
        let g = liouvillian(&s, &DriveConditions::resonant(TAU * 5e6), &relax()).unwrap();
        assert_eq!(layout(&g).unknowns, 128);
    }

    #[test]
    fn strong_drive_pumps_into_dark_and_trap_states() {
        // F=2 -> F'=1 only: drop the F'=2 manifold
        let table: String = build_rb87_d1_scheme(0.0)
            .unwrap()
            .to_table()
            .lines()
            .filter(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                !(f.first() == Some(&"excited") && f[1] == "2" || f.first() == Some(&"coupling") && f[3] == "2")
            })
            .map(|l| format!("{l}\n"))
            .collect();
        let s = LevelScheme::from_table(&table).unwrap();
        assert_eq!(s.len(), 11);
        let omega = 100.0 * (SUGGESTED_GAMMA * TAU * 5e3).sqrt();
        let g = liouvillian(&s, &DriveConditions::resonant(omega), &relax()).unwrap();
        let ss = steady_state(&g).unwrap();
        let excited: f64 = s.excited_indices().iter().map(|&e| ss.population(e)).sum();
        assert!(excited < 1e-3, "excited population {excited}");
        assert!(ss.hermiticity_error() < 1e-10);
        assert!((ss.trace().re - 1.0).abs() < 1e-10);
        assert!(ss.min_eigenvalue() > -1e-6);
    }
}
