//! Semiclassical quantum-trajectory Monte Carlo.
//!
//! Each trajectory carries a complex phase-space displacement that is
//! kicked by field noise and photon recoil. Fock populations are read out
//! by applying the displaced-number-state overlap to the initial levels.

mod ensemble;
mod kicks;
mod trajectory;

pub use ensemble::{ensemble_average, EnsembleOptions, EnsembleResult};
pub use kicks::{
    continuous_kick, discrete_kick, heating_rate_from_spectral_density,
    spectral_density_from_heating_rate, ContinuousNoise, DiscreteNoise, EmissionSampler,
    MAX_KICK_SQ,
};
pub use trajectory::{
    run_trajectory, KickKind, KickRecord, Trajectory, TrajectorySample, TrajectorySeed,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Default continuous-noise step, 1 μs.
pub const DEFAULT_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseSource {
    Continuous(ContinuousNoise),
    Discrete(DiscreteNoise),
    Combined {
        continuous: ContinuousNoise,
        discrete: DiscreteNoise,
    },
}

impl NoiseSource {
    pub fn continuous(&self) -> Option<&ContinuousNoise> {
        match self {
            Self::Continuous(c) | Self::Combined { continuous: c, .. } => Some(c),
            Self::Discrete(_) => None,
        }
    }

    pub fn discrete(&self) -> Option<&DiscreteNoise> {
        match self {
            Self::Discrete(d) | Self::Combined { discrete: d, .. } => Some(d),
            Self::Continuous(_) => None,
        }
    }

    /// Expected n̄ growth rate at the ground state, quanta/s.
    pub fn initial_heating_rate(&self) -> Result<f64> {
        let mut rate = self.continuous().map_or(0.0, |c| c.heating_rate());
        if let Some(d) = self.discrete() {
            rate += crate::scattering::linear_heating_rate(&d.model, &d.trap)?;
        }
        Ok(rate)
    }
}
