//! Motional thermometry from Rabi-flop data.

mod carrier;
mod sideband;
mod thermal;

pub use carrier::{
    carrier_signal_two_mode, debye_waller_factors, fit_carrier_nbar, periodogram_peak,
    CarrierFitOptions, CarrierModel, CarrierSignal, DEFAULT_CARRIER_CEILING,
};
pub use sideband::{
    lamb_dicke_valid, sideband_flop, sideband_signal, svd_populations, PopulationEstimate,
    SvdOptions, LAMB_DICKE_LIMIT,
};
pub use thermal::{fit_thermal_from_levels, LevelEstimate};
