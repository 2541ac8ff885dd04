//! Steady-state density-matrix model of a multilevel atom driven by the two
//! circular components of one laser.
//!
//! Phase convention: the library writes each field component as
//! Omega e^{+i w t} + c.c., so a positive Re chi decreases the optical phase
//! relative to the usual e^{-i w t} convention. Internally the solver works in
//! the usual convention with conj(Omega); amplitudes and susceptibilities are
//! converted at the boundary, `chi = -conj(chi_std)`. Im chi is the same in
//! both and positive for absorption.

pub mod liouvillian;
pub mod reduction;
pub mod scheme;
pub mod steady;
pub mod susceptibility;

pub use liouvillian::{liouvillian, DriveConditions, Liouvillian, Relaxation};
pub use reduction::{reduce_four_level, Reduction};
pub use scheme::{build_rb87_d1_scheme, four_level_scheme, two_level_scheme, Coupling, LevelScheme, Manifold, State};
pub use steady::{steady_state, SteadyState};
pub use susceptibility::{coupling_constant, solve_susceptibility, susceptibility, SusceptibilityPair};
