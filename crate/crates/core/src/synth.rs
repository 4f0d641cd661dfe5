//! Synthetic Rabi-flop datasets with shot noise, and a brute-force
//! integrator of the bath master equation used as a test oracle.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{bath_propagate, BathParams};
use crate::data::{FlopDataset, ProbeKind};
use crate::error::{invalid, Error, Result};
use crate::physics::{thermal_distribution, FockDistribution, TrapConfig};
use crate::qtt::{ensemble_average, EnsembleOptions, NoiseSource};
use crate::rng::stream_rng;
use crate::scattering::{nbar_of_t, ScatterModel};
use crate::thermometry::{sideband_flop, CarrierModel};

/// Shot count standing in for an infinite number of repetitions.
pub const ANALYTIC_SHOTS: u64 = 1 << 40;

/// Pulse durations and repetitions of the probe after each heating delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSchedule {
    pub delays: Vec<f64>,
    pub probe: ProbeKind,
    pub durations: Vec<f64>,
    /// `None` returns exact probabilities.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl ExperimentSchedule {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.delays.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(invalid("delays", format!("{d} must be finite and >= 0")));
        }
        if let Some(d) = self
            .durations
            .iter()
            .find(|d| !(**d >= 0.0 && d.is_finite()))
        {
            return Err(invalid("durations", format!("{d} must be finite and >= 0")));
        }
        if self.durations.is_empty() {
            return Err(invalid("durations", "need at least one pulse duration"));
        }
        if self.shots == Some(0) {
            return Err(invalid("shots", "must be >= 1"));
        }
        Ok(())
    }

    /// `points` equally spaced durations from 0 to `t_max`.
    pub fn uniform_durations(t_max: f64, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![0.0],
            _ => (0..points)
                .map(|i| t_max * i as f64 / (points - 1) as f64)
                .collect(),
        }
    }
}

/// Probe forward-model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    /// Ω₀ in rad/s.
    pub rabi_frequency: f64,
    pub trap: TrapConfig,
}

/// Model that evolves the motional state between preparation and probe.
#[derive(Debug, Clone, PartialEq)]
pub enum TruthModel {
    Bath {
        initial: FockDistribution,
        heating_rate: f64,
    },
    Qtt {
        initial: FockDistribution,
        source: NoiseSource,
        trajectories: usize,
        options: EnsembleOptions,
    },
    /// Thermal states with n̄ following the scattering rate equation.
    Eq7 {
        model: ScatterModel,
        nbar0: f64,
        n_max: usize,
    },
}

/// One heating delay worth of synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFlop {
    pub delay: f64,
    pub populations: FockDistribution,
    pub nbar: f64,
    /// Noise-free bright probabilities.
    pub exact: Vec<f64>,
    pub data: FlopDataset,
}

fn states(
    truth: &TruthModel,
    delays: &[f64],
    trap: &TrapConfig,
    seed: u64,
) -> Result<Vec<(FockDistribution, f64)>> {
    match truth {
        TruthModel::Bath {
            initial,
            heating_rate,
        } => delays
            .par_iter()
            .map(|&t| {
                let d = bath_propagate(initial, BathParams::new(*heating_rate, t)?)?.distribution;
                let n = d.mean();
                Ok((d, n))
            })
            .collect(),
        TruthModel::Qtt {
            initial,
            source,
            trajectories,
            options,
        } => {
            let mut order: Vec<usize> = (0..delays.len()).collect();
            order.sort_by(|&a, &b| delays[a].total_cmp(&delays[b]));
            let grid: Vec<f64> = order.iter().map(|&i| delays[i]).collect();
            let r = ensemble_average(initial, source, &grid, *trajectories, seed, options)?;
            let mut out = vec![None; delays.len()];
            for (k, &i) in order.iter().enumerate() {
                out[i] = Some((r.populations[k].clone(), r.nbar[k]));
            }
            Ok(out
                .into_iter()
                .map(|o| o.expect("every delay filled"))
                .collect())
        }
        TruthModel::Eq7 {
            model,
            nbar0,
            n_max,
        } => delays
            .iter()
            .map(|&t| {
                let n = nbar_of_t(model, trap, *nbar0, t)?;
                Ok((thermal_distribution(n, *n_max)?, n))
            })
            .collect(),
    }
}

/// Simulates the probe after each delay and draws binomial counts.
///
/// Delay `i` uses stream `i` of the generator seeded by the schedule seed;
/// a trajectory truth uses the same seed for its ensemble.
pub fn generate_dataset(
    truth: &TruthModel,
    schedule: &ExperimentSchedule,
    probe: &ProbeParams,
) -> Result<Vec<SyntheticFlop>> {
    schedule.validate()?;
    let trap = &probe.trap;
    let truth_states = states(truth, &schedule.delays, trap, schedule.seed)?;
    let mut carrier = CarrierModel::new(
        trap.lamb_dicke_x,
        trap.lamb_dicke_y,
        trap.mode_frequency_ratio,
    )?;
    if schedule.probe == ProbeKind::Carrier {
        carrier.precompute();
    }
    truth_states
        .into_par_iter()
        .enumerate()
        .map(|(i, (populations, nbar))| {
            let exact: Vec<f64> = match schedule.probe {
                ProbeKind::BlueSideband => schedule
                    .durations
                    .iter()
                    .map(|&t| {
                        populations
                            .probabilities()
                            .iter()
                            .enumerate()
                            .map(|(n, p)| {
                                p * sideband_flop(n, probe.rabi_frequency, trap.lamb_dicke_x, t)
                            })
                            .sum::<f64>()
                            .clamp(0.0, 1.0)
                    })
                    .collect(),
                ProbeKind::Carrier => {
                    carrier
                        .signal_for(&populations, probe.rabi_frequency, &schedule.durations)?
                        .values
                }
            };
            let (counts, shots) = match schedule.shots {
                Some(n) => {
                    let mut rng = stream_rng(schedule.seed, i as u64);
                    let counts = exact
                        .iter()
                        .map(|&p| Binomial::new(n, p).map(|b| b.sample(&mut rng)))
                        .collect::<std::result::Result<Vec<u64>, _>>()
                        .map_err(|e| invalid("probability", e.to_string()))?;
                    (counts, n)
                }
                None => (
                    exact
                        .iter()
                        .map(|p| (p * ANALYTIC_SHOTS as f64).round() as u64)
                        .collect(),
                    ANALYTIC_SHOTS,
                ),
            };
            let data = FlopDataset::new(
                schedule.durations.clone(),
                counts,
                vec![shots; schedule.durations.len()],
                schedule.probe,
            )?;
            Ok(SyntheticFlop {
                delay: schedule.delays[i],
                populations,
                nbar,
                exact,
                data,
            })
        })
        .collect()
}

/// Σρ lost through the top level above which the oracle refuses to report.
pub const ORACLE_LEAKAGE_LIMIT: f64 = 1e-8;

const ORACLE_MIN_STEPS: usize = 2000;

fn master_rhs(rho: &[f64], rate: f64, out: &mut [f64]) {
    let top = rho.len() - 1;
    for n in 0..=top {
        let up = if n < top {
            (n + 1) as f64 * rho[n + 1]
        } else {
            0.0
        };
        let down = if n > 0 { n as f64 * rho[n - 1] } else { 0.0 };
        out[n] = rate * (up + down - (2 * n + 1) as f64 * rho[n]);
    }
}

/// Classical RK4 integration of dρ_n/dt = n̄̇[(n+1)ρ_{n+1} + nρ_{n−1} − (2n+1)ρ_n]
/// on levels 0..=n_max, with population flowing out through the top.
pub fn oracle_master_equation(
    initial: &FockDistribution,
    rate: f64,
    t: f64,
    n_max: usize,
) -> Result<FockDistribution> {
    if !(rate >= 0.0 && t >= 0.0 && rate.is_finite() && t.is_finite()) {
        return Err(invalid(
            "rate",
            "heating rate and time must be finite and >= 0",
        ));
    }
    if initial.len() > n_max + 1 {
        return Err(invalid(
            "n_max",
            format!("initial state has {} levels", initial.len()),
        ));
    }
    let mut rho = vec![0.0; n_max + 1];
    rho[..initial.len()].copy_from_slice(initial.probabilities());
    let total0: f64 = rho.iter().sum();
    let quanta = rate * t;
    if quanta > 0.0 {
        // n̄̇h ≤ 1e-3 and inside the RK4 stability region of the top level;
        // the floor keeps levels that start empty resolved at short times.
        let max_step = 1e-3f64.min(1.0 / (2.0 * (2 * n_max + 1) as f64));
        let steps = ((quanta / max_step).ceil() as usize).max(ORACLE_MIN_STEPS);
        let h = t / steps as f64;
        let dim = rho.len();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
        );
        for _ in 0..steps {
            master_rhs(&rho, rate, &mut k1);
            for i in 0..dim {
                tmp[i] = rho[i] + 0.5 * h * k1[i];
            }
            master_rhs(&tmp, rate, &mut k2);
            for i in 0..dim {
                tmp[i] = rho[i] + 0.5 * h * k2[i];
            }
            master_rhs(&tmp, rate, &mut k3);
            for i in 0..dim {
                tmp[i] = rho[i] + h * k3[i];
            }
            master_rhs(&tmp, rate, &mut k4);
            for i in 0..dim {
                rho[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    let leakage = total0 - rho.iter().sum::<f64>();
    if leakage > ORACLE_LEAKAGE_LIMIT {
        let required = ((n_max as f64) * 1.5).ceil() as usize;
        return Err(Error::Truncation {
            required,
            ceiling: n_max,
        });
    }
    rho.iter_mut().for_each(|p| *p = p.max(0.0));
    FockDistribution::with_tolerance(rho, 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::bath_propagate;
    use crate::physics::IonSpecies;
    use std::f64::consts::PI;

    #[test]
    fn oracle_identity_without_heating() {
        let init = thermal_distribution(0.7, 40).unwrap();
        let out = oracle_master_equation(&init, 0.0, 1.0, 80).unwrap();
        for n in 0..=40 {
            assert_eq!(out.get(n), init.get(n));
        }
    }

    #[test]
    fn oracle_ground_state_closed_form() {
        let out = oracle_master_equation(&FockDistribution::ground(0), 500.0, 1e-3, 150).unwrap();
        assert!((out.get(0) - 2.0 / 3.0).abs() < 1e-9);
        let thermal = thermal_distribution(0.5, 150).unwrap();
        for n in 0..10 {
            assert!((out.get(n) - thermal.get(n)).abs() < 1e-9);
        }
        assert!((out.total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn oracle_agrees_with_bath() {
        for init in [
            FockDistribution::fock(3, 3),
            thermal_distribution(1.2, 80).unwrap(),
        ] {
            for q in [0.2, 1.0, 3.0] {
                let o = oracle_master_equation(&init, q, 1.0, 250).unwrap();
                let b = bath_propagate(&init, BathParams::new(q, 1.0).unwrap())
                    .unwrap()
                    .distribution;
                for n in 0..10 {
                    assert!(
                        (o.get(n) - b.get(n)).abs() <= 1e-7 * b.get(n),
                        "q={q} n={n}"
                    );
                }
            }
        }
    }

    #[test]
    fn oracle_reports_leakage() {
        let r = oracle_master_equation(&FockDistribution::ground(0), 10.0, 1.0, 20);
        assert!(matches!(r, Err(Error::Truncation { ceiling: 20, .. })));
    }

    fn probe() -> ProbeParams {
        ProbeParams {
            rabi_frequency: 2.0 * PI / (60e-6 * 0.104),
            trap: TrapConfig::default(),
        }
    }

    #[test]
    fn analytic_mode_returns_exact_fractions() {
        let truth = TruthModel::Bath {
            initial: FockDistribution::ground(0),
            heating_rate: 770.0,
        };
        let schedule = ExperimentSchedule {
            delays: vec![0.0, 2e-3],
            probe: ProbeKind::BlueSideband,
            durations: ExperimentSchedule::uniform_durations(300e-6, 60),
            shots: None,
            seed: 0,
        };
        let sets = generate_dataset(&truth, &schedule, &probe()).unwrap();
        for s in &sets {
            for (f, e) in s.data.fractions().iter().zip(&s.exact) {
                assert!((f - e).abs() < 1e-12);
            }
        }
        assert!((sets[1].nbar - 770.0 * 2e-3).abs() < 1e-9);
    }

    #[test]
    fn shot_noise_is_seeded() {
        let truth = TruthModel::Bath {
            initial: FockDistribution::ground(0),
            heating_rate: 770.0,
        };
        let mut schedule = ExperimentSchedule {
            delays: vec![1e-3, 4e-3],
            probe: ProbeKind::BlueSideband,
            durations: ExperimentSchedule::uniform_durations(300e-6, 60),
            shots: Some(500),
            seed: 12,
        };
        let a = generate_dataset(&truth, &schedule, &probe()).unwrap();
        let b = generate_dataset(&truth, &schedule, &probe()).unwrap();
        assert_eq!(a, b);
        schedule.seed = 13;
        let c = generate_dataset(&truth, &schedule, &probe()).unwrap();
        assert_ne!(a[0].data.counts, c[0].data.counts);
    }

    #[test]
    fn eq7_truth_with_carrier_probe() {
        let model = ScatterModel::new(IonSpecies::yb171(), Default::default()).unwrap();
        let truth = TruthModel::Eq7 {
            model,
            nbar0: 0.05,
            n_max: 400,
        };
        let schedule = ExperimentSchedule {
            delays: vec![0.0, 2e-4],
            probe: ProbeKind::Carrier,
            durations: ExperimentSchedule::uniform_durations(40e-6, 60),
            shots: None,
            seed: 0,
        };
        let p = ProbeParams {
            rabi_frequency: 2.0 * PI * 150e3,
            ..probe()
        };
        let sets = generate_dataset(&truth, &schedule, &p).unwrap();
        assert!(sets[1].nbar > sets[0].nbar);
        assert!(sets
            .iter()
            .all(|s| s.exact.iter().all(|v| (0.0..=1.0).contains(v))));
    }
}
