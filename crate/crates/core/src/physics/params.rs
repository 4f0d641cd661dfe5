//! Species, trap and laser parameter blocks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{hz_to_rad, ATOMIC_MASS_UNIT, ELECTRON_MASS, HBAR, YB171_MASS_U};
use crate::error::{invalid, Result};

/// Atomic constants of the cooling/detection transition.
///
/// All frequencies are angular (rad/s). The wavevector is always derived
/// from the wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// Ion mass in kg.
    pub mass: f64,
    /// Transition wavelength in m.
    pub transition_wavelength: f64,
    /// Natural linewidth γ in rad/s.
    pub natural_linewidth: f64,
    /// Zeeman splitting δ_B in rad/s.
    pub zeeman_splitting: f64,
}

impl IonSpecies {
    pub fn new(
        mass: f64,
        transition_wavelength: f64,
        natural_linewidth: f64,
        zeeman_splitting: f64,
    ) -> Result<Self> {
        let s = Self {
            mass,
            transition_wavelength,
            natural_linewidth,
            zeeman_splitting,
        };
        s.validate()?;
        Ok(s)
    }

    /// ¹⁷¹Yb⁺ on the 369.5 nm S–P line.
    pub fn yb171() -> Self {
        Self {
            mass: YB171_MASS_U * ATOMIC_MASS_UNIT - ELECTRON_MASS,
            transition_wavelength: 369.5e-9,
            natural_linewidth: hz_to_rad(19.6e6),
            zeeman_splitting: hz_to_rad(5.288e6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        positive("transition_wavelength", self.transition_wavelength)?;
        positive("natural_linewidth", self.natural_linewidth)?;
        positive("zeeman_splitting", self.zeeman_splitting)
    }

    /// k = 2π/λ in 1/m.
    pub fn wavevector(&self) -> f64 {
        2.0 * PI / self.transition_wavelength
    }

    /// Single-photon recoil energy ħ²k²/(2m) in J.
    pub fn recoil_energy(&self) -> f64 {
        let k = self.wavevector();
        HBAR * HBAR * k * k / (2.0 * self.mass)
    }
}

impl Default for IonSpecies {
    fn default() -> Self {
        Self::yb171()
    }
}

/// Harmonic confinement of the probed radial mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Secular frequency ω in rad/s.
    pub secular_frequency: f64,
    pub lamb_dicke_x: f64,
    pub lamb_dicke_y: f64,
    /// ω_x/ω_y, used to tie the y-mode occupation to the x-mode one.
    pub mode_frequency_ratio: f64,
}

impl TrapConfig {
    pub fn new(
        secular_frequency: f64,
        lamb_dicke_x: f64,
        lamb_dicke_y: f64,
        mode_frequency_ratio: f64,
    ) -> Result<Self> {
        let t = Self {
            secular_frequency,
            lamb_dicke_x,
            lamb_dicke_y,
            mode_frequency_ratio,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        positive("secular_frequency", self.secular_frequency)?;
        for (name, eta) in [
            ("lamb_dicke_x", self.lamb_dicke_x),
            ("lamb_dicke_y", self.lamb_dicke_y),
        ] {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(invalid(name, format!("must lie in (0, 1), got {eta}")));
            }
        }
        positive("mode_frequency_ratio", self.mode_frequency_ratio)
    }

    /// Zero-point length scale √(ħ/(2mω)) in m.
    pub fn ground_state_extent(&self, mass: f64) -> f64 {
        (HBAR / (2.0 * mass * self.secular_frequency)).sqrt()
    }
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            secular_frequency: hz_to_rad(1.09e6),
            lamb_dicke_x: 0.104,
            lamb_dicke_y: 0.112,
            mode_frequency_ratio: 1.48,
        }
    }
}

/// Detection beam parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserConfig {
    /// s = I/I_sat.
    pub saturation: f64,
    /// Signed detuning Δ in rad/s; negative is red.
    pub detuning: f64,
    /// Projection f_x of the beam onto the motional axis.
    pub absorption_geometry: f64,
    /// Duration of one absorption/emission pair in s.
    pub scatter_duration: f64,
}

impl LaserConfig {
    pub fn new(
        saturation: f64,
        detuning: f64,
        absorption_geometry: f64,
        scatter_duration: f64,
    ) -> Result<Self> {
        let l = Self {
            saturation,
            detuning,
            absorption_geometry,
            scatter_duration,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.saturation >= 0.0 && self.saturation.is_finite()) {
            return Err(invalid(
                "saturation",
                format!("must be >= 0, got {}", self.saturation),
            ));
        }
        if !self.detuning.is_finite() {
            return Err(invalid("detuning", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.absorption_geometry) {
            return Err(invalid(
                "absorption_geometry",
                format!("must lie in [0, 1], got {}", self.absorption_geometry),
            ));
        }
        if !(self.scatter_duration >= 0.0) {
            return Err(invalid("scatter_duration", "must be >= 0"));
        }
        Ok(())
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_saturation(mut self, saturation: f64) -> Self {
        self.saturation = saturation;
        self
    }
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self {
            saturation: 1.27,
            detuning: 0.0,
            absorption_geometry: 0.25,
            scatter_duration: 10e-9,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yb_defaults_are_valid() {
        IonSpecies::yb171().validate().unwrap();
        TrapConfig::default().validate().unwrap();
        LaserConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(IonSpecies::new(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(TrapConfig::new(1.0, 1.2, 0.1, 1.0).is_err());
        assert!(LaserConfig::new(1.0, 0.0, 1.5, 0.0).is_err());
        assert!(LaserConfig::new(-0.1, 0.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn recoil_in_trap_quanta() {
        // E_rec/(ħω) for Yb+ at 1.09 MHz is ≈ 7.84e-3.
        let ion = IonSpecies::yb171();
        let trap = TrapConfig::default();
        let ratio = ion.recoil_energy() / (HBAR * trap.secular_frequency);
        assert!((ratio - 7.84e-3).abs() < 0.02e-3, "{ratio}");
        let kx0 = ion.wavevector() * trap.ground_state_extent(ion.mass);
        assert!((kx0 * kx0 - ratio).abs() < 1e-12);
    }
}
