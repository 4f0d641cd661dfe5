//! Phase-space kicks from continuous field noise and from photon recoil.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, HBAR};
use crate::error::{invalid, Error, Result};
use crate::physics::TrapConfig;
use crate::scattering::ScatterModel;

/// Largest allowed ⟨|α_k|²⟩ per continuous step.
pub const MAX_KICK_SQ: f64 = 0.01;

/// e²S_E/(4mħω): heating rate in quanta/s from a single-sided field
/// spectral density in V²/m²/Hz.
pub fn heating_rate_from_spectral_density(
    spectral_density: f64,
    trap_frequency: f64,
    mass: f64,
) -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE * spectral_density / (4.0 * mass * HBAR * trap_frequency)
}

pub fn spectral_density_from_heating_rate(rate: f64, trap_frequency: f64, mass: f64) -> f64 {
    rate * 4.0 * mass * HBAR * trap_frequency / (ELEMENTARY_CHARGE * ELEMENTARY_CHARGE)
}

/// Fluctuating electric field sampled on a fixed step.
///
/// The step is assumed long compared with the field correlation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousNoise {
    /// S_E(ω) at the trap frequency, V²/m²/Hz.
    pub spectral_density: f64,
    /// Δt in s.
    pub step: f64,
    /// ω in rad/s.
    pub trap_frequency: f64,
    /// Ion mass in kg.
    pub mass: f64,
}

impl ContinuousNoise {
    /// Refuses steps whose mean squared kick is not small.
    pub fn new(spectral_density: f64, step: f64, trap_frequency: f64, mass: f64) -> Result<Self> {
        if !(spectral_density >= 0.0 && spectral_density.is_finite()) {
            return Err(invalid(
                "spectral_density",
                format!("must be finite and >= 0, got {spectral_density}"),
            ));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid("step", format!("must be > 0, got {step}")));
        }
        if !(trap_frequency > 0.0 && mass > 0.0) {
            return Err(invalid(
                "trap_frequency",
                "trap frequency and mass must be > 0",
            ));
        }
        let noise = Self {
            spectral_density,
            step,
            trap_frequency,
            mass,
        };
        let mean_sq = noise.mean_kick_sq();
        if mean_sq >= MAX_KICK_SQ {
            return Err(Error::KickTooLarge {
                mean_sq,
                limit: MAX_KICK_SQ,
            });
        }
        Ok(noise)
    }

    pub fn from_heating_rate(rate: f64, step: f64, trap_frequency: f64, mass: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(invalid(
                "heating_rate",
                format!("must be finite and >= 0, got {rate}"),
            ));
        }
        Self::new(
            spectral_density_from_heating_rate(rate, trap_frequency, mass),
            step,
            trap_frequency,
            mass,
        )
    }

    /// n̄̇ in quanta/s.
    pub fn heating_rate(&self) -> f64 {
        heating_rate_from_spectral_density(self.spectral_density, self.trap_frequency, self.mass)
    }

    /// ⟨|α_k|²⟩ = n̄̇Δt.
    pub fn mean_kick_sq(&self) -> f64 {
        self.heating_rate() * self.step
    }
}

/// Circularly symmetric Gaussian kick with ⟨|α_k|²⟩ = e²S_EΔt/(4mħω).
pub fn continuous_kick<R: Rng + ?Sized>(
    rng: &mut R,
    spectral_density: f64,
    step: f64,
    trap_frequency: f64,
    mass: f64,
) -> Complex64 {
    let var = heating_rate_from_spectral_density(spectral_density, trap_frequency, mass) * step;
    gaussian_kick(rng, var)
}

#[inline]
pub(crate) fn gaussian_kick<R: Rng + ?Sized>(rng: &mut R, mean_sq: f64) -> Complex64 {
    let sigma = (0.5 * mean_sq).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sigma * re, sigma * im)
}

/// Emission-direction sampling for the scattered photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionSampler {
    /// θ with density ∝ sinθ, φ uniform.
    #[default]
    Isotropic,
    /// θ pinned to 0: emission carries no momentum along x.
    Suppressed,
}

impl EmissionSampler {
    /// sinθ·cosφ, the x-projection of a unit emission direction.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Isotropic => {
                let cos_theta = 1.0 - 2.0 * rng.random::<f64>();
                let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
                let phi = 2.0 * PI * rng.random::<f64>();
                sin_theta * phi.cos()
            }
            Self::Suppressed => 0.0,
        }
    }
}

/// Photon scattering by the detection beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteNoise {
    pub model: ScatterModel,
    pub trap: TrapConfig,
    pub emission: EmissionSampler,
}

impl DiscreteNoise {
    pub fn new(model: ScatterModel, trap: TrapConfig) -> Self {
        Self {
            model,
            trap,
            emission: EmissionSampler::Isotropic,
        }
    }

    /// Poisson event rate Γ₀ in 1/s.
    pub fn event_rate(&self) -> Result<f64> {
        Ok(self.model.effective_coefficients()?.effective_rate)
    }

    pub(crate) fn kicker(&self) -> Result<Kicker> {
        Ok(Kicker {
            scale: self.model.species.wavevector()
                * self.trap.ground_state_extent(self.model.species.mass),
            sqrt_fx: self.model.laser.absorption_geometry.sqrt(),
            doppler_slope: self.model.doppler_kick_slope(&self.trap)?,
            omega: self.trap.secular_frequency,
            emission: self.emission,
        })
    }
}

/// Per-run constants of the discrete kick.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kicker {
    /// ħk/√(2mωħ) = k·√(ħ/2mω).
    scale: f64,
    sqrt_fx: f64,
    doppler_slope: f64,
    omega: f64,
    emission: EmissionSampler,
}

impl Kicker {
    #[inline]
    pub(crate) fn kick<R: Rng + ?Sized>(&self, rng: &mut R, n_eff: f64, t: f64) -> Complex64 {
        let momentum =
            self.sqrt_fx * (1.0 + self.doppler_slope * n_eff) + self.emission.sample(rng);
        // i·e^{iωt}; absorption and emission share the phase of the event time.
        let (s, c) = (self.omega * t).sin_cos();
        Complex64::new(-s, c) * (self.scale * momentum)
    }
}

/// One absorption–emission pair at time `t`, with the Doppler factor
/// evaluated at the instantaneous phonon number `n_eff`.
pub fn discrete_kick<R: Rng + ?Sized>(
    rng: &mut R,
    source: &DiscreteNoise,
    n_eff: f64,
    t: f64,
) -> Result<Complex64> {
    if !(n_eff >= 0.0) {
        return Err(invalid("n_eff", format!("must be >= 0, got {n_eff}")));
    }
    Ok(source.kicker()?.kick(rng, n_eff, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::hz_to_rad;
    use crate::physics::{IonSpecies, LaserConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trap() -> TrapConfig {
        TrapConfig::default()
    }

    #[test]
    fn zero_field_gives_zero_kicks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = IonSpecies::yb171().mass;
        for _ in 0..100 {
            assert_eq!(
                continuous_kick(&mut rng, 0.0, 1e-6, trap().secular_frequency, m),
                Complex64::new(0.0, 0.0)
            );
        }
    }

    #[test]
    fn spectral_density_round_trip() {
        let m = IonSpecies::yb171().mass;
        let w = trap().secular_frequency;
        let s = spectral_density_from_heating_rate(770.0, w, m);
        assert!((heating_rate_from_spectral_density(s, w, m) - 770.0).abs() < 1e-9);
    }

    #[test]
    fn continuous_kick_variance() {
        let m = IonSpecies::yb171().mass;
        let w = trap().secular_frequency;
        let noise = ContinuousNoise::from_heating_rate(770.0, 1e-6, w, m).unwrap();
        let target = noise.mean_kick_sq();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let (mut sum, mut sumsq, mut mean) = (0.0, 0.0, Complex64::new(0.0, 0.0));
        for _ in 0..n {
            let k = continuous_kick(&mut rng, noise.spectral_density, noise.step, w, m);
            let a = k.norm_sqr();
            sum += a;
            sumsq += a * a;
            mean += k;
        }
        let avg = sum / n as f64;
        let se = ((sumsq / n as f64 - avg * avg) / n as f64).sqrt();
        assert!((avg - target).abs() < 3.0 * se, "{avg} vs {target} ± {se}");
        assert!((mean / n as f64).norm() < 3.0 * (target / n as f64).sqrt());
    }

    #[test]
    fn large_steps_are_refused() {
        let m = IonSpecies::yb171().mass;
        let r = ContinuousNoise::from_heating_rate(770.0, 1e-4, trap().secular_frequency, m);
        assert!(matches!(r, Err(Error::KickTooLarge { .. })));
    }

    #[test]
    fn emission_isotropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = EmissionSampler::Isotropic.sample(&mut rng).powi(2);
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 3.0 * se, "{mean} ± {se}");
    }

    fn source(detuning_mhz: f64, fx: f64, emission: EmissionSampler) -> DiscreteNoise {
        let laser = LaserConfig {
            absorption_geometry: fx,
            ..LaserConfig::default()
        }
        .with_detuning(hz_to_rad(detuning_mhz * 1e6));
        let mut s = DiscreteNoise::new(
            ScatterModel::new(IonSpecies::yb171(), laser).unwrap(),
            trap(),
        );
        s.emission = emission;
        s
    }

    #[test]
    fn no_momentum_transfer_no_kick() {
        let s = source(0.0, 0.0, EmissionSampler::Suppressed);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..10 {
            assert_eq!(
                discrete_kick(&mut rng, &s, 3.0, i as f64 * 1e-7)
                    .unwrap()
                    .norm(),
                0.0
            );
        }
    }

    fn mean_kick_energy(s: &DiscreteNoise, n_eff: f64, draws: usize) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..draws {
            let v = discrete_kick(&mut rng, s, n_eff, i as f64 * 3.3e-8)
                .unwrap()
                .norm_sqr();
            a += v;
            b += v * v;
        }
        let m = a / draws as f64;
        (m, ((b / draws as f64 - m * m) / draws as f64).sqrt())
    }

    #[test]
    fn resonant_kick_energy() {
        let s = source(0.0, 0.25, EmissionSampler::Isotropic);
        let ion = IonSpecies::yb171();
        let expected = (0.25 + 1.0 / 3.0) * ion.recoil_energy() / (HBAR * trap().secular_frequency);
        let (m, se) = mean_kick_energy(&s, 0.0, 400_000);
        assert!((m - expected).abs() < 3.0 * se, "{m} vs {expected} ± {se}");
    }

    #[test]
    fn per_scatter_energy_matches_linearized_form() {
        // Binomial-approximated energy per event, E/(ħω) = R/(ħω) + D·n.
        let s = source(0.0, 0.25, EmissionSampler::Isotropic);
        let c = s.model.effective_coefficients().unwrap();
        let hw = HBAR * trap().secular_frequency;
        for n in [0.0, 5.0, 20.0] {
            let expected = c.recoil / hw + c.doppler * n;
            let (m, _) = mean_kick_energy(&s, n, 400_000);
            assert!(
                (m - expected).abs() / expected < 0.01,
                "n={n}: {m} vs {expected}"
            );
        }
        // Off resonance the kick follows the unexpanded square.
        let s = source(-11.0, 0.25, EmissionSampler::Isotropic);
        let slope = s.model.doppler_kick_slope(&trap()).unwrap();
        let erec = IonSpecies::yb171().recoil_energy() / hw;
        for n in [2.0, 12.0] {
            let exact = erec * (0.25 * (1.0 + slope * n).powi(2) + 1.0 / 3.0);
            let (m, se) = mean_kick_energy(&s, n, 400_000);
            assert!((m - exact).abs() < 4.0 * se, "n={n}: {m} vs {exact}");
        }
    }
}
