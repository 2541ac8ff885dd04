//! Thermal velocity averaging of the single-class susceptibility.
//!
//! The one-dimensional Maxwell-Boltzmann distribution of k v has standard
//! deviation sigma = k sqrt(k_B T / m); its 1/e half-width is sqrt(2) sigma.
//! Gauss-Hermite abscissas x_i map to k v = sqrt(2) sigma x_i.

use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;
use rayon::prelude::*;

use crate::bloch::SusceptibilityPair;
use crate::error::{invalid, Error, Result};
use crate::units::{AMU, K_BOLTZMANN};

/// Widths below this (rad/s) are treated as a cold sample with one class.
const COLD_WIDTH: f64 = 1.0;

/// Escalation sequence n -> 2n + 1 starting from 7.
pub const NODE_SEQUENCE: [usize; 5] = [7, 15, 31, 63, 127];
pub const MAX_NODES: usize = 129;
/// Relative change between successive rules accepted as converged.
pub const CONVERGENCE: f64 = 5e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    /// Doppler shifts k v, rad/s, ascending and symmetric about 0.
    pub nodes: Vec<f64>,
    /// Probabilities, summing to 1.
    pub weights: Vec<f64>,
    /// K.
    pub temperature: f64,
    /// amu.
    pub atomic_mass: f64,
}

impl VelocityGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Standard deviation of k v, rad/s, for wavelength `lambda_cm`.
pub fn doppler_sigma(temperature: f64, mass_amu: f64, lambda_cm: f64) -> f64 {
    let k = std::f64::consts::TAU / (lambda_cm * 1e-2);
    k * (K_BOLTZMANN * temperature / (mass_amu * AMU)).sqrt()
}

pub fn make_grid(temperature: f64, mass_amu: f64, lambda_cm: f64, n_nodes: usize) -> Result<VelocityGrid> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(invalid("temperature", format!("must be > 0 K, got {temperature}")));
    }
    if !(mass_amu > 0.0) || !(lambda_cm > 0.0) {
        return Err(invalid("mass/lambda", "must be > 0"));
    }
    let n = NonZeroUsize::new(n_nodes).ok_or_else(|| invalid("n_nodes", "must be >= 1"))?;
    let sigma = doppler_sigma(temperature, mass_amu, lambda_cm);
    if sigma < COLD_WIDTH || n_nodes == 1 {
        return Ok(VelocityGrid {
            nodes: vec![0.0],
            weights: vec![1.0],
            temperature,
            atomic_mass: mass_amu,
        });
    }
    let rule = GaussHermite::new(n);
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = pairs.len();
    let scale = std::f64::consts::SQRT_2 * sigma;
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let (lo, hi) = (pairs[i], pairs[m - 1 - i]);
        let x = if 2 * i + 1 == m { 0.0 } else { 0.5 * (lo.0 - hi.0) };
        nodes.push(scale * x);
        weights.push(0.5 * (lo.1 + hi.1));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(VelocityGrid {
        nodes,
        weights,
        temperature,
        atomic_mass: mass_amu,
    })
}

/// Half-span of the uniform rule in units of sigma.
const UNIFORM_SPAN: f64 = 6.0;

/// Equally spaced classes over +-6 sigma with Gaussian trapezoid weights.
/// Converges for responses much narrower than the Doppler width, where
/// a Hermite rule of practical size does not.
pub fn make_uniform_grid(temperature: f64, mass_amu: f64, lambda_cm: f64, n_nodes: usize) -> Result<VelocityGrid> {
    let mut grid = make_grid(temperature, mass_amu, lambda_cm, 1)?;
    if n_nodes < 3 || n_nodes % 2 == 0 {
        return Err(invalid("n_nodes", format!("uniform rule needs an odd count >= 3, got {n_nodes}")));
    }
    let sigma = doppler_sigma(temperature, mass_amu, lambda_cm);
    if sigma < COLD_WIDTH {
        return Ok(grid);
    }
    let half = (n_nodes / 2) as f64;
    grid.nodes = (0..n_nodes).map(|i| UNIFORM_SPAN * sigma * (i as f64 - half) / half).collect();
    grid.weights = grid.nodes.iter().map(|kv| (-0.5 * (kv / sigma).powi(2)).exp()).collect();
    let total: f64 = grid.weights.iter().sum();
    grid.weights.iter_mut().for_each(|w| *w /= total);
    Ok(grid)
}

/// Weighted sum of `sampler` over the grid. Nodes are evaluated in
/// parallel and reduced in node order.
pub fn average<F>(sampler: F, grid: &VelocityGrid) -> Result<SusceptibilityPair>
where
    F: Fn(f64) -> Result<SusceptibilityPair> + Sync,
{
    let samples: Vec<Result<SusceptibilityPair>> = grid.nodes.par_iter().map(|&kv| sampler(kv)).collect();
    let mut weighted = Vec::with_capacity(samples.len());
    for (node, (s, &w)) in samples.into_iter().zip(&grid.weights).enumerate() {
        let s = s.map_err(|e| Error::VelocityNode {
            node,
            kv: grid.nodes[node],
            source: Box::new(e),
        })?;
        weighted.push(s.scale(w));
    }
    // mirror pairs first, so contributions odd in kv cancel exactly
    let m = weighted.len();
    let mut acc = SusceptibilityPair::ZERO;
    for i in 0..m / 2 {
        acc = acc + (weighted[i] + weighted[m - 1 - i]);
    }
    if m % 2 == 1 {
        acc = acc + weighted[m / 2];
    }
    Ok(acc)
}

/// Largest relative change of either component between two averages.
pub fn relative_change(a: &SusceptibilityPair, b: &SusceptibilityPair) -> f64 {
    let rel = |x: num_complex::Complex64, y: num_complex::Complex64| (x - y).norm() / y.norm().max(f64::MIN_POSITIVE);
    rel(a.chi_plus, b.chi_plus).max(rel(a.chi_minus, b.chi_minus))
}

/// Outcome of automatic node escalation.
#[derive(Debug, Clone, PartialEq)]
pub struct Converged {
    pub grid: VelocityGrid,
    pub value: SusceptibilityPair,
    /// Relative change of the accepted step.
    pub change: f64,
}

/// Doubles the rule (n -> 2n + 1) from `start` until two successive averages
/// agree within `tolerance` for every sampler in `samplers`; the larger rule
/// of the accepted pair is returned. Fails beyond `max_nodes`.
pub fn escalate<F>(
    samplers: &[F],
    temperature: f64,
    mass_amu: f64,
    lambda_cm: f64,
    start: usize,
    max_nodes: usize,
    tolerance: f64,
) -> Result<Vec<Converged>>
where
    F: Fn(f64) -> Result<SusceptibilityPair> + Sync,
{
    escalate_with(samplers, |n| make_grid(temperature, mass_amu, lambda_cm, n), start, max_nodes, tolerance)
}

/// [`escalate`] over an arbitrary family of rules, `rule(n)`.
pub fn escalate_with<F, R>(samplers: &[F], rule: R, start: usize, max_nodes: usize, tolerance: f64) -> Result<Vec<Converged>>
where
    F: Fn(f64) -> Result<SusceptibilityPair> + Sync,
    R: Fn(usize) -> Result<VelocityGrid>,
{
    let mut n = start.max(1);
    let grid = rule(n)?;
    if grid.len() == 1 {
        return samplers
            .iter()
            .map(|s| {
                Ok(Converged {
                    value: average(s, &grid)?,
                    grid: grid.clone(),
                    change: 0.0,
                })
            })
            .collect();
    }
    let mut values: Vec<SusceptibilityPair> = samplers.iter().map(|s| average(s, &grid)).collect::<Result<_>>()?;
    let mut last_change = f64::INFINITY;
    loop {
        let next = 2 * n + 1;
        if next > max_nodes {
            return Err(Error::QuadratureNotConverged {
                max_nodes,
                change: last_change,
            });
        }
        let next_grid = rule(next)?;
        let next_values: Vec<SusceptibilityPair> =
            samplers.iter().map(|s| average(s, &next_grid)).collect::<Result<_>>()?;
        let change = values
            .iter()
            .zip(&next_values)
            .map(|(a, b)| relative_change(a, b))
            .fold(0.0, f64::max);
        if change < tolerance {
            return Ok(next_values
                .into_iter()
                .map(|value| Converged {
                    grid: next_grid.clone(),
                    value,
                    change,
                })
                .collect());
        }
        n = next;
        values = next_values;
        last_change = change;
    }
}
