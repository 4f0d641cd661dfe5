//! Constants, parameter blocks, Laguerre polynomials and Fock-space
//! distributions shared by every other module.

mod fock;
mod laguerre;
mod params;

pub use fock::{
    double_thermal_from_levels, solve_double_thermal, thermal_distribution, DoubleThermal,
    DoubleThermalConstraint, FockDistribution, ANALYTIC_NORM_EPS, DEFAULT_N_MAX, FITTED_NORM_EPS,
};
pub use laguerre::{displaced_fock_prob, displaced_fock_table, laguerre, ln_abs_laguerre};
pub use params::{IonSpecies, LaserConfig, TrapConfig};
