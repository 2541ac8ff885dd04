//! Null-space steady states against long-time evolution exp(G t) rho0,
//! with the matrix exponential built independently by scaling and squaring.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod support {
    pub mod expm;
}
use support::expm::expm;

use faraday_core::bloch::{build_rb87_d1_scheme, four_level_scheme, liouvillian, steady_state, DriveConditions, LevelScheme, Relaxation};
use faraday_core::units::{rb87, SUGGESTED_GAMMA};

fn random_case(rng: &mut ChaCha8Rng, i: usize) -> (LevelScheme, DriveConditions, Relaxation) {
    let b = rng.gen_range(-0.5..0.5);
    let scheme = if i % 2 == 0 {
        build_rb87_d1_scheme(b).unwrap()
    } else {
        four_level_scheme(b, 0.5, rb87::D1_GAMMA).unwrap()
    };
    let om = TAU * rng.gen_range(0.5e6..20e6);
    let drive = DriveConditions {
        omega_plus: Complex64::from_polar(om, rng.gen_range(0.0..TAU)),
        omega_minus: Complex64::from_polar(om * rng.gen_range(0.2..1.2), rng.gen_range(0.0..TAU)),
        laser_detuning: TAU * rng.gen_range(-300e6..300e6),
        doppler_shift: TAU * rng.gen_range(-200e6..200e6),
    };
    let relax = Relaxation {
        gamma: SUGGESTED_GAMMA * rng.gen_range(0.7..1.5),
        gamma0: TAU * rng.gen_range(2e3..50e3),
    };
    (scheme, drive, relax)
}

#[test]
fn null_space_matches_long_time_evolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let (scheme, drive, relax) = random_case(&mut rng, i);
        let g = liouvillian(&scheme, &drive, &relax).unwrap();
        let ss = steady_state(&g).unwrap();
        let n = g.levels();
        // unpolarized ground state as the initial condition
        let ground = scheme.ground_indices();
        let mut rho0 = nalgebra::DVector::<Complex64>::zeros(n * n);
        for &k in &ground {
            rho0[k * n + k] = Complex64::new(1.0 / ground.len() as f64, 0.0);
        }
        let t = 60.0 / relax.gamma0;
        let dense = g.to_dense();
        let prop = expm(&(&dense * Complex64::new(t, 0.0)));
        let r1 = &prop * &rho0;
        let r2 = &prop * &r1;
        let scale = ss.rho.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut dev: f64 = 0.0;
        let mut settle: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                dev = dev.max((r1[a * n + b] - ss.rho[(a, b)]).norm());
                settle = settle.max((r1[a * n + b] - r2[a * n + b]).norm());
            }
        }
        assert!(settle / scale < 1e-7, "case {i}: evolution not settled ({settle:e})");
        worst = worst.max(dev / scale);
        assert!(dev / scale < 1e-6, "case {i}: {:.3e}", dev / scale);
    }
    println!("worst relative deviation over 20 conditions: {worst:.3e}");
}
