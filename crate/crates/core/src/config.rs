//! TOML run configuration with unit-checked frequencies.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bath::Weighting;
use crate::constants::{ATOMIC_MASS_UNIT, ELECTRON_MASS, YB171_MASS_U};
use crate::data::ProbeKind;
use crate::error::{invalid, Result};
use crate::physics::{DoubleThermal, FockDistribution, IonSpecies, LaserConfig, TrapConfig};
use crate::qtt::EmissionSampler;
use crate::scattering::{ScanAxis, ScatterModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyUnit {
    Hz,
    #[serde(rename = "kHz")]
    KHz,
    #[serde(rename = "MHz")]
    MHz,
    #[serde(rename = "GHz")]
    GHz,
    #[serde(rename = "rad/s")]
    RadPerSecond,
}

impl FrequencyUnit {
    const ALL: [(Self, &'static str); 5] = [
        (Self::Hz, "Hz"),
        (Self::KHz, "kHz"),
        (Self::MHz, "MHz"),
        (Self::GHz, "GHz"),
        (Self::RadPerSecond, "rad/s"),
    ];

    fn symbol(self) -> &'static str {
        Self::ALL.iter().find(|(u, _)| *u == self).unwrap().1
    }

    /// rad/s per unit.
    fn scale(self) -> f64 {
        match self {
            Self::Hz => 2.0 * PI,
            Self::KHz => 2.0 * PI * 1e3,
            Self::MHz => 2.0 * PI * 1e6,
            Self::GHz => 2.0 * PI * 1e9,
            Self::RadPerSecond => 1.0,
        }
    }
}

/// A frequency written with an explicit unit, e.g. `"1.09 MHz"` or
/// `"6.85e6 rad/s"`. Cyclic units are converted with a factor 2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    pub value: f64,
    pub unit: FrequencyUnit,
}

impl Frequency {
    pub fn new(value: f64, unit: FrequencyUnit) -> Self {
        Self { value, unit }
    }

    pub fn mhz(value: f64) -> Self {
        Self::new(value, FrequencyUnit::MHz)
    }

    pub fn khz(value: f64) -> Self {
        Self::new(value, FrequencyUnit::KHz)
    }

    pub fn rad_per_s(&self) -> f64 {
        self.value * self.unit.scale()
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit.symbol())
    }
}

impl FromStr for Frequency {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        // Longest symbols first so "kHz" is not read as "Hz".
        let mut units = FrequencyUnit::ALL;
        units.sort_by_key(|(_, sym)| std::cmp::Reverse(sym.len()));
        for (unit, sym) in units {
            if let Some(num) = s.strip_suffix(sym) {
                let num = num.trim();
                let value: f64 = num
                    .parse()
                    .map_err(|_| format!("`{num}` is not a number in frequency `{s}`"))?;
                if !value.is_finite() {
                    return Err(format!("frequency `{s}` is not finite"));
                }
                return Ok(Self { value, unit });
            }
        }
        Err(format!(
            "frequency `{s}` needs a unit suffix: Hz, kHz, MHz, GHz or rad/s"
        ))
    }
}

impl Serialize for Frequency {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Frequency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IonSection {
    /// Neutral-atom mass in u; one electron mass is removed.
    pub mass_u: f64,
    pub wavelength_nm: f64,
    pub linewidth: Frequency,
    pub zeeman_splitting: Frequency,
}

impl Default for IonSection {
    fn default() -> Self {
        Self {
            mass_u: YB171_MASS_U,
            wavelength_nm: 369.5,
            linewidth: Frequency::mhz(19.6),
            zeeman_splitting: Frequency::mhz(5.288),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapSection {
    pub secular_frequency: Frequency,
    pub lamb_dicke_x: f64,
    pub lamb_dicke_y: f64,
    pub mode_frequency_ratio: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            secular_frequency: Frequency::mhz(1.09),
            lamb_dicke_x: 0.104,
            lamb_dicke_y: 0.112,
            mode_frequency_ratio: 1.48,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserSection {
    pub saturation: f64,
    pub detuning: Frequency,
    pub absorption_geometry: f64,
    pub scatter_duration_s: f64,
}

impl Default for LaserSection {
    fn default() -> Self {
        Self {
            saturation: 1.27,
            detuning: Frequency::mhz(0.0),
            absorption_geometry: 0.25,
            scatter_duration_s: 10e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Ground,
    Fock,
    Thermal,
    DoubleThermal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    /// Level for `fock`.
    pub level: usize,
    /// Mean for `thermal`.
    pub nbar: f64,
    /// Cold weight and component means for `double_thermal`.
    pub weight: f64,
    pub nbar_cold: f64,
    pub nbar_hot: f64,
    pub n_max: usize,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialKind::Ground,
            level: 0,
            nbar: 0.0,
            weight: 0.9,
            nbar_cold: 0.02,
            nbar_hot: 10.0,
            n_max: 400,
        }
    }
}

impl InitialSection {
    pub fn distribution(&self) -> Result<FockDistribution> {
        match self.kind {
            InitialKind::Ground => Ok(FockDistribution::ground(0)),
            InitialKind::Fock => Ok(FockDistribution::fock(self.level, self.level)),
            InitialKind::Thermal => crate::physics::thermal_distribution(self.nbar, self.n_max),
            InitialKind::DoubleThermal => {
                if !(0.0..=1.0).contains(&self.weight) {
                    return Err(invalid(
                        "initial.weight",
                        format!("must lie in [0, 1], got {}", self.weight),
                    ));
                }
                if !(self.nbar_cold >= 0.0 && self.nbar_hot >= 0.0) {
                    return Err(invalid("initial.nbar_cold", "component means must be >= 0"));
                }
                let d = DoubleThermal {
                    weight: self.weight,
                    nbar_cold: self.nbar_cold,
                    nbar_hot: self.nbar_hot,
                };
                Ok(d.distribution(self.n_max))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmbientSection {
    /// n̄̇ in quanta/s.
    pub heating_rate: f64,
    pub t_max_s: f64,
    pub points: usize,
    pub step_s: f64,
    pub trajectories: usize,
    pub readout_levels: usize,
}

impl Default for AmbientSection {
    fn default() -> Self {
        Self {
            heating_rate: 770.0,
            t_max_s: 8e-3,
            points: 17,
            step_s: 1e-6,
            trajectories: 1000,
            readout_levels: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSection {
    pub t_max_s: f64,
    pub points: usize,
    pub trajectories: usize,
    /// Field-noise heating present in both branches, quanta/s.
    pub dark_heating_rate: f64,
    pub step_s: f64,
    pub emission: EmissionSampler,
    pub readout_levels: usize,
    /// Levels 0..thermal_levels enter the thermal fit.
    pub thermal_levels: usize,
}

impl Default for MeasureSection {
    fn default() -> Self {
        Self {
            t_max_s: 100e-6,
            points: 21,
            trajectories: 1000,
            dark_heating_rate: 770.0,
            step_s: 1e-6,
            emission: EmissionSampler::Isotropic,
            readout_levels: 40,
            thermal_levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub detunings: Vec<Frequency>,
    /// Per-detuning saturation overrides; empty uses the laser value.
    pub saturations: Vec<f64>,
    pub band: Frequency,
    pub band_samples: usize,
    pub axis: ScanAxis,
    /// Last axis value (Γt or seconds).
    pub axis_max: f64,
    pub points: usize,
    pub ceiling: f64,
    /// Trajectories for the optional scattering ensemble; 0 skips it.
    pub trajectories: usize,
    pub readout_levels: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            detunings: vec![
                Frequency::mhz(-11.0),
                Frequency::mhz(-1.0),
                Frequency::mhz(9.0),
            ],
            saturations: Vec::new(),
            band: Frequency::mhz(2.0),
            band_samples: 9,
            axis: ScanAxis::ScatterEvents,
            axis_max: 5e3,
            points: 51,
            ceiling: 400.0,
            trajectories: 0,
            readout_levels: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Levels used by the bath fit.
    pub levels: Vec<usize>,
    pub weighting: Weighting,
    pub svd_levels: usize,
    pub bootstrap: usize,
    pub svd_threshold: f64,
    /// Ω₀ of the probe.
    pub rabi_frequency: Frequency,
    /// Use `rabi_frequency` as the carrier-fit starting point instead of
    /// the periodogram peak.
    pub rabi_prior: bool,
    pub f_tol: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            levels: vec![0, 1],
            weighting: Weighting::Binomial,
            svd_levels: 10,
            bootstrap: 1000,
            svd_threshold: 1e-8,
            rabi_frequency: Frequency::khz(160.3),
            rabi_prior: false,
            f_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    #[default]
    Bath,
    Qtt,
    Eq7,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub truth: TruthKind,
    pub probe: ProbeKind,
    pub delays_s: Vec<f64>,
    pub pulse_t_max_s: f64,
    pub pulse_points: usize,
    /// Repetitions per pulse; 0 writes noise-free data.
    pub shots: u64,
    pub rabi_frequency: Frequency,
    pub heating_rate: f64,
    pub trajectories: usize,
    pub readout_levels: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            truth: TruthKind::Bath,
            probe: ProbeKind::BlueSideband,
            delays_s: vec![0.0, 1e-3, 2e-3, 4e-3, 6e-3, 8e-3],
            pulse_t_max_s: 300e-6,
            pulse_points: 60,
            shots: 500,
            rabi_frequency: Frequency::khz(160.3),
            heating_rate: 770.0,
            trajectories: 1000,
            readout_levels: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// 0 uses every available core.
    pub workers: usize,
    pub chunk: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            chunk: 50,
        }
    }
}

/// Complete configuration; every section and key has a default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub ion: IonSection,
    pub trap: TrapSection,
    pub laser: LaserSection,
    pub initial: InitialSection,
    pub ambient: AmbientSection,
    pub measure: MeasureSection,
    pub scan: ScanSection,
    pub fit: FitSection,
    pub synth: SynthSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn species(&self) -> Result<IonSpecies> {
        IonSpecies::new(
            self.ion.mass_u * ATOMIC_MASS_UNIT - ELECTRON_MASS,
            self.ion.wavelength_nm * 1e-9,
            self.ion.linewidth.rad_per_s(),
            self.ion.zeeman_splitting.rad_per_s(),
        )
    }

    pub fn trap(&self) -> Result<TrapConfig> {
        TrapConfig::new(
            self.trap.secular_frequency.rad_per_s(),
            self.trap.lamb_dicke_x,
            self.trap.lamb_dicke_y,
            self.trap.mode_frequency_ratio,
        )
    }

    pub fn laser(&self) -> Result<LaserConfig> {
        LaserConfig::new(
            self.laser.saturation,
            self.laser.detuning.rad_per_s(),
            self.laser.absorption_geometry,
            self.laser.scatter_duration_s,
        )
    }

    pub fn scatter_model(&self) -> Result<ScatterModel> {
        ScatterModel::new(self.species()?, self.laser()?)
    }

    /// Checks every derived parameter block.
    pub fn validate(&self) -> Result<()> {
        self.scatter_model()?;
        self.trap()?;
        self.initial.distribution()?;
        if !self.scan.saturations.is_empty()
            && self.scan.saturations.len() != self.scan.detunings.len()
        {
            return Err(invalid(
                "scan.saturations",
                "must be empty or match scan.detunings in length",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::hz_to_rad;

    #[test]
    fn frequency_units() {
        let f: Frequency = "1.09 MHz".parse().unwrap();
        assert!((f.rad_per_s() - hz_to_rad(1.09e6)).abs() < 1e-6);
        let f: Frequency = "150kHz".parse().unwrap();
        assert_eq!(f.unit, FrequencyUnit::KHz);
        let f: Frequency = "-6.9e7 rad/s".parse().unwrap();
        assert_eq!(f.rad_per_s(), -6.9e7);
        let f: Frequency = "10 Hz".parse().unwrap();
        assert!((f.rad_per_s() - 20.0 * PI).abs() < 1e-12);
        assert!("1.09".parse::<Frequency>().is_err());
        assert!("fast MHz".parse::<Frequency>().is_err());
    }

    #[test]
    fn defaults_match_library_defaults() {
        let c = RunConfig::default();
        let trap = c.trap().unwrap();
        let d = TrapConfig::default();
        assert!((trap.secular_frequency - d.secular_frequency).abs() < 1e-6);
        let s = c.species().unwrap();
        let y = IonSpecies::yb171();
        assert!((s.mass / y.mass - 1.0).abs() < 1e-14);
        assert!((s.natural_linewidth - y.natural_linewidth).abs() < 1e-3);
        c.validate().unwrap();
    }

    #[test]
    fn round_trip_is_idempotent() {
        let text = r#"
[trap]
secular_frequency = "6.848e6 rad/s"
[scan]
detunings = ["-11 MHz", "9000 kHz"]
[run]
seed = 7
"#;
        let a = RunConfig::from_toml(text).unwrap();
        let b = RunConfig::from_toml(&a.to_toml()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_toml(), b.to_toml());
        assert_eq!(a.run.seed, 7);
        assert_eq!(a.scan.detunings[1].to_string(), "9000 kHz");
    }

    #[test]
    fn unknown_keys_and_bare_frequencies_are_rejected() {
        let e = RunConfig::from_toml("[trap]\nsecular_freq = \"1 MHz\"\n").unwrap_err();
        assert!(e.to_string().contains("secular_freq"));
        let e = RunConfig::from_toml("[laser]\ndetuning = \"-11\"\n").unwrap_err();
        assert!(e.to_string().contains("unit"), "{e}");
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
