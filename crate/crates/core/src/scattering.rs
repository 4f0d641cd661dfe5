//! Detection-light scattering for ¹⁷¹Yb⁺ and the semiclassical
//! heating/cooling rate equation it drives.
//!
//! Energy in the probed mode obeys dE/dt = Γ₀(R + D·E) with D carrying the
//! sign of the detuning: red detuning cools towards −R/D, blue detuning
//! heats without bound, and zero detuning heats linearly at Γ₀R.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::curve::HeatingCurve;
use crate::error::{invalid, Error, Result};
use crate::physics::{IonSpecies, LaserConfig, TrapConfig, DEFAULT_N_MAX};

/// Isotropic average of sin²θ·cos²φ.
pub const ISOTROPIC_EMISSION: f64 = 1.0 / 3.0;

/// Species and beam, with the emission geometry factor f_sx.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterModel {
    pub species: IonSpecies,
    pub laser: LaserConfig,
    pub emission_geometry: f64,
}

/// Γ₀, R and D of the rate equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoefficients {
    /// Γ₀ in 1/s.
    pub effective_rate: f64,
    /// R = (f_x + f_sx)·ħ²k²/(2m) in J.
    pub recoil: f64,
    /// Dimensionless; same sign as the detuning.
    pub doppler: f64,
}

impl ScatterModel {
    pub fn new(species: IonSpecies, laser: LaserConfig) -> Result<Self> {
        if species.zeeman_splitting == 0.0 {
            return Err(Error::SingularModel("Zeeman splitting δ_B is zero".into()));
        }
        species.validate()?;
        laser.validate()?;
        Ok(Self {
            species,
            laser,
            emission_geometry: ISOTROPIC_EMISSION,
        })
    }

    pub fn with_laser(&self, laser: LaserConfig) -> Result<Self> {
        Self::new(self.species, laser)
    }

    fn check(&self) -> Result<()> {
        if self.species.zeeman_splitting == 0.0 {
            return Err(Error::SingularModel("Zeeman splitting δ_B is zero".into()));
        }
        Ok(())
    }

    /// s′ = (1/216)(sγ/δ_B)² + (8/3)(δ_B/γ)².
    pub fn modified_saturation(&self) -> Result<f64> {
        self.check()?;
        let g = self.species.natural_linewidth;
        let db = self.species.zeeman_splitting;
        let s = self.laser.saturation;
        Ok((s * g / db).powi(2) / 216.0 + 8.0 / 3.0 * (db / g).powi(2))
    }

    /// Photon scattering rate Γ in 1/s, written out term by term.
    pub fn scattering_rate(&self) -> Result<f64> {
        self.check()?;
        let g = self.species.natural_linewidth;
        let db = self.species.zeeman_splitting;
        let s = self.laser.saturation;
        let d = self.laser.detuning;
        let denom = 1.0
            + (s * g / db).powi(2) / 216.0
            + 8.0 / 3.0 * (db / g).powi(2)
            + (2.0 * d / g).powi(2);
        Ok(g * (s / 18.0) / denom)
    }

    /// γ²(1+s′) + 4Δ², the Lorentzian denominator shared by Γ₀ and D.
    fn lorentz(&self) -> Result<f64> {
        let g = self.species.natural_linewidth;
        let d = self.laser.detuning;
        Ok(g * g * (1.0 + self.modified_saturation()?) + 4.0 * d * d)
    }

    pub fn effective_coefficients(&self) -> Result<EffectiveCoefficients> {
        let g = self.species.natural_linewidth;
        let s = self.laser.saturation;
        let d = self.laser.detuning;
        let fx = self.laser.absorption_geometry;
        let m = self.species.mass;
        let k = self.species.wavevector();
        let sp = self.modified_saturation()?;
        let effective_rate = g * (s / 18.0) / (1.0 + sp + 4.0 * d * d / (g * g));
        let recoil = (fx + self.emission_geometry) * HBAR * HBAR * k * k / (2.0 * m);
        let doppler = 8.0 * d * HBAR * fx * k * k / (m * self.lorentz()?);
        Ok(EffectiveCoefficients {
            effective_rate,
            recoil,
            doppler,
        })
    }

    /// Fractional change of the absorption kick per motional quantum,
    /// 8Δω/(γ²(1+s′)+4Δ²).
    pub fn doppler_kick_slope(&self, trap: &TrapConfig) -> Result<f64> {
        Ok(8.0 * self.laser.detuning * trap.secular_frequency / self.lorentz()?)
    }
}

/// n̄(t) from the rate equation, starting at n̄(0) = `nbar0`.
///
/// Written as n̄₀e^{x} + (Γ₀R t/ħω)·(e^{x}−1)/x with x = Γ₀Dt, which is the
/// closed-form solution without the cancellation of R/D at small |Δ|.
pub fn nbar_of_t(model: &ScatterModel, trap: &TrapConfig, nbar0: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    let c = model.effective_coefficients()?;
    let quantum = HBAR * trap.secular_frequency;
    let linear = c.effective_rate * c.recoil * t / quantum;
    if model.laser.detuning == 0.0 || c.doppler == 0.0 {
        return Ok(nbar0 + linear);
    }
    let x = c.effective_rate * c.doppler * t;
    let growth = if x.abs() < 1e-300 {
        1.0
    } else {
        x.exp_m1() / x
    };
    Ok(nbar0 * x.exp() + linear * growth)
}

/// Initial slope Γ₀R/(ħω) in quanta/s.
pub fn linear_heating_rate(model: &ScatterModel, trap: &TrapConfig) -> Result<f64> {
    let c = model.effective_coefficients()?;
    Ok(c.effective_rate * c.recoil / (HBAR * trap.secular_frequency))
}

/// −R/(D·ħω) for red detuning; `None` when the solution does not settle.
pub fn steady_state_nbar(model: &ScatterModel, trap: &TrapConfig) -> Result<Option<f64>> {
    let c = model.effective_coefficients()?;
    if c.doppler < 0.0 {
        Ok(Some(
            -c.recoil / (c.doppler * HBAR * trap.secular_frequency),
        ))
    } else {
        Ok(None)
    }
}

/// Size of the r.m.s. Doppler shift implied by n̄ relative to the
/// linewidth; the rate equation linearizes in k·v and degrades once this
/// is no longer small.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerCheck {
    /// √f_x·k·v_rms in rad/s, with m⟨v²⟩ = n̄ħω.
    pub rms_shift: f64,
    /// γ/4.
    pub limit: f64,
}

impl DopplerCheck {
    pub fn valid(&self) -> bool {
        self.rms_shift <= self.limit
    }
}

pub fn doppler_check(model: &ScatterModel, trap: &TrapConfig, nbar: f64) -> DopplerCheck {
    let v_rms = (nbar.max(0.0) * HBAR * trap.secular_frequency / model.species.mass).sqrt();
    DopplerCheck {
        rms_shift: model.laser.absorption_geometry.sqrt() * model.species.wavevector() * v_rms,
        limit: model.species.natural_linewidth / 4.0,
    }
}

/// One detection setting in a scan; `saturation` overrides the template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningEntry {
    pub detuning: f64,
    pub saturation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    /// Grid values are seconds.
    Time,
    /// Grid values are scattering events Γt, Γ taken at the nominal detuning.
    ScatterEvents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Half-width of the detuning uncertainty band in rad/s.
    pub band: f64,
    /// Detunings sampled across the band, ends and centre included.
    pub band_samples: usize,
    pub axis: ScanAxis,
    /// n̄ above which a curve is flagged as leaving the range that Fock
    /// truncations downstream can represent.
    pub ceiling: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            band: 2.0 * PI * 2e6,
            band_samples: 9,
            axis: ScanAxis::ScatterEvents,
            ceiling: DEFAULT_N_MAX as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetuningCurve {
    pub detuning: f64,
    pub saturation: f64,
    /// Γ at the nominal detuning, 1/s.
    pub scattering_rate: f64,
    /// Axis values as given, with n̄ and its detuning-band envelope.
    pub curve: HeatingCurve,
    /// Elapsed time in s for each axis value.
    pub times: Vec<f64>,
    pub doppler_warning: bool,
    pub above_ceiling: bool,
}

/// Rate-equation curves for a list of detunings, each with the envelope
/// spanned by detunings within ±`band`.
pub fn detuning_scan(
    template: &ScatterModel,
    entries: &[DetuningEntry],
    trap: &TrapConfig,
    nbar0: f64,
    grid: &[f64],
    options: &ScanOptions,
) -> Result<Vec<DetuningCurve>> {
    if entries.is_empty() || grid.is_empty() {
        return Err(invalid("scan", "detuning list and grid must be non-empty"));
    }
    let samples = options.band_samples.max(1);
    entries
        .iter()
        .map(|entry| {
            let saturation = entry.saturation.unwrap_or(template.laser.saturation);
            let laser = template
                .laser
                .with_detuning(entry.detuning)
                .with_saturation(saturation);
            let model = template.with_laser(laser)?;
            let gamma = model.scattering_rate()?;
            let times: Vec<f64> = match options.axis {
                ScanAxis::Time => grid.to_vec(),
                ScanAxis::ScatterEvents => {
                    if gamma <= 0.0 {
                        return Err(invalid(
                            "saturation",
                            "zero scattering rate cannot scale the axis",
                        ));
                    }
                    grid.iter().map(|n| n / gamma).collect()
                }
            };
            let perturbed: Vec<ScatterModel> = (0..samples)
                .map(|i| {
                    let frac = if samples == 1 {
                        0.0
                    } else {
                        -1.0 + 2.0 * i as f64 / (samples - 1) as f64
                    };
                    template.with_laser(laser.with_detuning(entry.detuning + frac * options.band))
                })
                .collect::<Result<_>>()?;
            let mut values = Vec::with_capacity(times.len());
            let mut lo = Vec::with_capacity(times.len());
            let mut hi = Vec::with_capacity(times.len());
            let mut doppler_warning = false;
            for &t in &times {
                let n = nbar_of_t(&model, trap, nbar0, t)?;
                let (mut a, mut b) = (n, n);
                for m in &perturbed {
                    let v = nbar_of_t(m, trap, nbar0, t)?;
                    a = a.min(v);
                    b = b.max(v);
                }
                doppler_warning |= !doppler_check(&model, trap, n).valid();
                values.push(n);
                lo.push(a);
                hi.push(b);
            }
            let above_ceiling = values.iter().any(|v| *v > options.ceiling);
            Ok(DetuningCurve {
                detuning: entry.detuning,
                saturation,
                scattering_rate: gamma,
                curve: HeatingCurve::new(grid.to_vec(), values, lo, hi)?,
                times,
                doppler_warning,
                above_ceiling,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::hz_to_rad;

    fn model(s: f64, detuning_mhz: f64) -> ScatterModel {
        let laser = LaserConfig::default()
            .with_saturation(s)
            .with_detuning(hz_to_rad(detuning_mhz * 1e6));
        ScatterModel::new(IonSpecies::yb171(), laser).unwrap()
    }

    #[test]
    fn zero_saturation_scatters_nothing() {
        assert_eq!(model(0.0, 0.0).scattering_rate().unwrap(), 0.0);
    }

    #[test]
    fn resonant_rate_is_1_07_mhz() {
        let g = model(1.27, 0.0).scattering_rate().unwrap();
        let target = hz_to_rad(1.07e6);
        assert!(
            (g - target).abs() / target < 0.01,
            "Γ/2π = {}",
            g / (2.0 * PI)
        );
    }

    #[test]
    fn detuned_rates() {
        let red = model(1.27, -11.0).scattering_rate().unwrap() / (2.0 * PI * 1e6);
        let blue = model(1.27, 9.0).scattering_rate().unwrap() / (2.0 * PI * 1e6);
        assert!((red - 0.54).abs() < 0.01, "{red}");
        assert!((blue - 0.65).abs() < 0.01, "{blue}");
    }

    #[test]
    fn modified_saturation_values() {
        let m0 = model(0.0, 0.0);
        let g = m0.species.natural_linewidth;
        let db = m0.species.zeeman_splitting;
        assert_eq!(
            m0.modified_saturation().unwrap(),
            8.0 / 3.0 * (db / g).powi(2)
        );
        let sp = model(1.27, 0.0).modified_saturation().unwrap();
        assert!((sp - 0.297).abs() < 5e-4, "{sp}");
        let base = 8.0 / 3.0 * (db / g).powi(2);
        let first = model(1.0, 0.0).modified_saturation().unwrap() - base;
        let doubled = model(2.0, 0.0).modified_saturation().unwrap() - base;
        assert!((doubled - first - 3.0 * first).abs() < 1e-15);
    }

    #[test]
    fn singular_without_zeeman_splitting() {
        let mut species = IonSpecies::yb171();
        species.zeeman_splitting = 0.0;
        assert!(matches!(
            ScatterModel::new(species, LaserConfig::default()),
            Err(Error::SingularModel(_))
        ));
    }

    #[test]
    fn coefficients() {
        let trap = TrapConfig::default();
        for (s, d) in [(1.27, 0.0), (0.4, -7.0), (2.0, 12.0)] {
            let m = model(s, d);
            let c = m.effective_coefficients().unwrap();
            assert!(
                (c.effective_rate - m.scattering_rate().unwrap()).abs() < 1e-9 * c.effective_rate
            );
            if d == 0.0 {
                assert_eq!(c.doppler, 0.0);
            } else {
                assert_eq!(c.doppler.signum(), d.signum());
            }
        }
        let c = model(1.27, 0.0).effective_coefficients().unwrap();
        let quanta = c.recoil / (HBAR * trap.secular_frequency);
        let erec = IonSpecies::yb171().recoil_energy() / (HBAR * trap.secular_frequency);
        assert!((quanta - 7.0 / 12.0 * erec).abs() < 1e-15);
        assert!((quanta - 4.6e-3).abs() < 0.05e-3, "{quanta}");
    }

    #[test]
    fn resonant_heating_is_linear() {
        let m = model(1.27, 0.0);
        let trap = TrapConfig::default();
        let rate = linear_heating_rate(&m, &trap).unwrap();
        assert!(rate > 2e4 && rate < 3.5e4, "{rate}");
        for t in [0.0, 1e-5, 1e-4, 2e-3] {
            assert!(
                (nbar_of_t(&m, &trap, 0.3, t).unwrap() - (0.3 + rate * t)).abs()
                    < 1e-12 * (1.0 + rate * t)
            );
        }
    }

    #[test]
    fn red_detuned_equilibrium() {
        let m = model(1.27, -11.0);
        let trap = TrapConfig::default();
        let ss = steady_state_nbar(&m, &trap).unwrap().unwrap();
        let g = m.species.natural_linewidth;
        let d = m.laser.detuning.abs();
        let sp = m.modified_saturation().unwrap();
        let closed = g / (8.0 * trap.secular_frequency)
            * (1.0 + ISOTROPIC_EMISSION / m.laser.absorption_geometry)
            * (g * (1.0 + sp) / (2.0 * d) + 2.0 * d / g);
        assert!((ss - closed).abs() < 1e-10 * closed);
        assert!(ss > 11.0 && ss < 14.0, "{ss}");
        let late = nbar_of_t(&m, &trap, 0.0, 1.0).unwrap();
        assert!((late - ss).abs() < 1e-9 * ss);
        assert!(steady_state_nbar(&model(1.27, 9.0), &trap)
            .unwrap()
            .is_none());
    }

    #[test]
    fn satisfies_rate_equation() {
        let trap = TrapConfig::default();
        let hw = HBAR * trap.secular_frequency;
        for d in [-11.0, -1.0, 9.0] {
            let m = model(1.27, d);
            let c = m.effective_coefficients().unwrap();
            for &t in &[1e-5, 1e-4, 1e-3] {
                let h = t * 1e-3;
                let e = |t| nbar_of_t(&m, &trap, 2.0, t).unwrap() * hw;
                let deriv = (e(t - 2.0 * h) - 8.0 * e(t - h) + 8.0 * e(t + h) - e(t + 2.0 * h))
                    / (12.0 * h);
                let rhs = c.effective_rate * (c.recoil + c.doppler * e(t));
                // Relative to the size of the two competing terms.
                let scale = c.effective_rate * (c.recoil + (c.doppler * e(t)).abs());
                assert!(
                    (deriv - rhs).abs() < 1e-9 * scale,
                    "Δ={d} t={t}: {deriv} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn monotone_towards_equilibrium() {
        let trap = TrapConfig::default();
        let m = model(1.27, -11.0);
        let ss = steady_state_nbar(&m, &trap).unwrap().unwrap();
        let ts: Vec<f64> = (0..200).map(|i| i as f64 * 1e-5).collect();
        let above: Vec<f64> = ts
            .iter()
            .map(|&t| nbar_of_t(&m, &trap, 30.0, t).unwrap())
            .collect();
        let below: Vec<f64> = ts
            .iter()
            .map(|&t| nbar_of_t(&m, &trap, 0.0, t).unwrap())
            .collect();
        assert!(above.windows(2).all(|w| w[1] < w[0]) && above.iter().all(|v| *v > ss));
        assert!(below.windows(2).all(|w| w[1] > w[0]) && below.iter().all(|v| *v < ss));
    }

    #[test]
    fn continuous_through_zero_detuning() {
        let trap = TrapConfig::default();
        let eps = hz_to_rad(1.0) / (2.0 * PI * 1e6);
        let zero = model(1.27, 0.0);
        for sign in [-1.0, 1.0] {
            let m = model(1.27, sign * eps);
            for i in 1..=20 {
                let t = i as f64 * 1e-4;
                let a = nbar_of_t(&m, &trap, 0.1, t).unwrap();
                let b = nbar_of_t(&zero, &trap, 0.1, t).unwrap();
                assert!((a - b).abs() / b < 1e-4);
            }
        }
    }

    #[test]
    fn resonance_maximizes_effective_rate() {
        let g0 = model(1.27, 0.0)
            .effective_coefficients()
            .unwrap()
            .effective_rate;
        for d in [-20.0, -3.0, -0.1, 0.1, 5.0] {
            assert!(
                model(1.27, d)
                    .effective_coefficients()
                    .unwrap()
                    .effective_rate
                    < g0
            );
        }
    }

    #[test]
    fn doppler_guard() {
        let m = model(1.27, -11.0);
        let trap = TrapConfig::default();
        assert!(doppler_check(&m, &trap, 12.0).valid());
        assert!(!doppler_check(&m, &trap, 1e5).valid());
    }

    #[test]
    fn scan_single_resonant_entry_is_linear() {
        let trap = TrapConfig::default();
        let m = model(1.27, 0.0);
        let grid: Vec<f64> = (0..11).map(|i| i as f64 * 500.0).collect();
        let curves = detuning_scan(
            &m,
            &[DetuningEntry {
                detuning: 0.0,
                saturation: None,
            }],
            &trap,
            0.0,
            &grid,
            &ScanOptions {
                band: 0.0,
                band_samples: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let c = &curves[0].curve;
        let slope = (c.values[1] - c.values[0]) / (grid[1] - grid[0]);
        for i in 1..grid.len() {
            assert!((c.values[i] - slope * grid[i]).abs() < 1e-10);
        }
        // Per scattering event the slope is R/(ħω).
        let per_event =
            m.effective_coefficients().unwrap().recoil / (HBAR * trap.secular_frequency);
        assert!((slope - per_event).abs() < 1e-12);
        assert!(detuning_scan(&m, &[], &trap, 0.0, &grid, &ScanOptions::default()).is_err());
    }
}
