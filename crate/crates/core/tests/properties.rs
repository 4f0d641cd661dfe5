//! Property tests for the library invariants.

use ion_heating::bath::{bath_propagate, BathParams};
use ion_heating::config::RunConfig;
use ion_heating::constants::hz_to_rad;
use ion_heating::data::{FlopDataset, ProbeKind};
use ion_heating::physics::{
    displaced_fock_prob, solve_double_thermal, thermal_distribution, DoubleThermal,
    DoubleThermalConstraint, FockDistribution, IonSpecies, LaserConfig, TrapConfig,
};
use ion_heating::qtt::{self, ContinuousNoise, EnsembleOptions, NoiseSource};
use ion_heating::scattering::{nbar_of_t, steady_state_nbar, ScatterModel};
use ion_heating::synth::ANALYTIC_SHOTS;
use ion_heating::thermometry::{
    carrier_signal_two_mode, sideband_signal, svd_populations, SvdOptions,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn red_model(detuning_hz: f64) -> ScatterModel {
    let laser = LaserConfig::default().with_detuning(hz_to_rad(detuning_hz));
    ScatterModel::new(IonSpecies::yb171(), laser).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn displaced_fock_is_symmetric(n in 0usize..80, m in 0usize..80, a2 in 0.0f64..25.0) {
        let p = displaced_fock_prob(n, m, a2).unwrap();
        let q = displaced_fock_prob(m, n, a2).unwrap();
        prop_assert!((p - q).abs() <= 1e-13 * p.max(q) + 1e-300);
    }

    #[test]
    fn displaced_fock_rows_normalize(n in 0usize..60, a2 in 0.0f64..2.0) {
        let row: Vec<f64> = (0..=n + 40).map(|m| displaced_fock_prob(n, m, a2).unwrap()).collect();
        let total: f64 = row.iter().sum();
        prop_assert!(row.iter().all(|p| *p >= 0.0));
        prop_assert!(total > 1.0 - 1e-8 && total < 1.0 + 1e-12, "total {total}");
        let mean: f64 = (0..=n + 80).map(|m| m as f64 * displaced_fock_prob(n, m, a2).unwrap()).sum();
        prop_assert!(rel(mean, n as f64 + a2) < 1e-8 || (mean - (n as f64 + a2)).abs() < 1e-12);
    }

    #[test]
    fn thermal_distribution_decreases_and_keeps_its_mean(nbar in 0.0f64..10.0) {
        let d = thermal_distribution(nbar, 400).unwrap();
        let p = d.probabilities();
        prop_assert!(p.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!((d.mean() - nbar).abs() <= 1e-10 * nbar.max(1.0));
        prop_assert!(d.total() <= 1.0 + 1e-12);
    }

    #[test]
    fn double_thermal_round_trips(w in 0.05f64..0.99, nc in 0.0f64..3.0, nh in 5.0f64..30.0) {
        let truth = DoubleThermal { weight: w, nbar_cold: nc, nbar_hot: nh };
        let (p0, p1) = truth.low_levels();
        let fit = solve_double_thermal(p0, p1, DoubleThermalConstraint::HotNbar(nh)).unwrap();
        prop_assert!((fit.weight - w).abs() < 1e-8, "{fit:?}");
        prop_assert!((fit.nbar_cold - nc).abs() < 1e-7, "{fit:?}");
        let (q0, q1) = fit.low_levels();
        prop_assert!((q0 - p0).abs() < 1e-12 && (q1 - p1).abs() < 1e-12);
    }

    #[test]
    fn bath_is_a_semigroup(nbar0 in 0.0f64..2.0, t1 in 0.0f64..1.5e-3, t2 in 0.0f64..1.5e-3) {
        let rate = 1000.0;
        let init = thermal_distribution(nbar0, 400).unwrap();
        let once = bath_propagate(&init, BathParams::new(rate, t1 + t2).unwrap()).unwrap();
        let mid = bath_propagate(&init, BathParams::new(rate, t1).unwrap()).unwrap();
        let twice = bath_propagate(&mid.distribution, BathParams::new(rate, t2).unwrap()).unwrap();
        for n in 0..20 {
            let (a, b) = (twice.distribution.get(n), once.distribution.get(n));
            prop_assert!(rel(a, b) < 1e-8, "n = {n}: {a} vs {b}");
        }
    }

    #[test]
    fn bath_mean_grows_linearly(nbar0 in 0.0f64..3.0, t in 0.0f64..3e-3) {
        let rate = 1000.0;
        let init = thermal_distribution(nbar0, 400).unwrap();
        let out = bath_propagate(&init, BathParams::new(rate, t).unwrap()).unwrap();
        let gain = out.distribution.mean() - init.mean();
        prop_assert!((gain - rate * t).abs() <= 1e-6 * (rate * t).max(1e-3), "gain {gain}");
        prop_assert!(out.distribution.total() > 1.0 - 1e-6);
        prop_assert!(out.distribution.probabilities().iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn red_detuned_cooling_approaches_equilibrium_monotonically(
        det_mhz in -30.0f64..-2.0,
        scale in prop_oneof![0.1f64..0.9, 1.1f64..20.0],
    ) {
        let model = red_model(det_mhz * 1e6);
        let trap = TrapConfig::default();
        let ss = steady_state_nbar(&model, &trap).unwrap().unwrap();
        let n0 = ss * scale;
        let series: Vec<f64> = (0..40)
            .map(|k| nbar_of_t(&model, &trap, n0, k as f64 * 25e-6).unwrap())
            .collect();
        if n0 > ss {
            prop_assert!(series.windows(2).all(|w| w[1] < w[0]));
            prop_assert!(series.iter().all(|v| *v > ss));
        } else {
            prop_assert!(series.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(series.iter().all(|v| *v < ss));
        }
    }

    #[test]
    fn carrier_signal_is_a_probability(
        nbar in 0.0f64..200.0,
        t in 0.0f64..500e-6,
        eta_y in 0.0f64..0.08,
    ) {
        let omega0 = 2.0 * std::f64::consts::PI * 50e3;
        let p = carrier_signal_two_mode(nbar, 1.48, omega0, 0.06, eta_y, t, 20_000).unwrap();
        prop_assert!((0.0..=1.0).contains(&p), "{p}");
    }

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        rate in 1.0f64..1e4,
        traj in 1usize..100_000,
        delays in proptest::collection::vec(0.0f64..0.1, 1..6),
    ) {
        let mut cfg = RunConfig::default();
        cfg.run.seed = seed;
        cfg.ambient.heating_rate = rate;
        cfg.ambient.trajectories = traj;
        cfg.synth.delays_s = delays;
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn noiseless_sideband_flops_invert_exactly(
        weights in proptest::collection::vec(0.0f64..1.0, 5),
    ) {
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 0.1);
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let dist = FockDistribution::new(probs.clone()).unwrap();
        let eta = 0.1;
        let omega0 = 2.0 * std::f64::consts::PI / (60e-6 * eta);
        let times: Vec<f64> = (0..60).map(|i| i as f64 * 300e-6 / 59.0).collect();
        let counts: Vec<u64> = times
            .iter()
            .map(|&t| (sideband_signal(&dist, omega0, eta, t) * ANALYTIC_SHOTS as f64).round() as u64)
            .collect();
        let data = FlopDataset::new(times, counts, vec![ANALYTIC_SHOTS; 60], ProbeKind::BlueSideband).unwrap();
        let opts = SvdOptions { bootstrap: 0, ..Default::default() };
        let est = svd_populations(&data, 5, omega0, eta, &opts).unwrap();
        prop_assert!(est.residual_norm < 1e-8, "residual {}", est.residual_norm);
        for (a, b) in est.point.iter().zip(&probs) {
            prop_assert!((a - b).abs() < 1e-8, "{:?} vs {:?}", est.point, probs);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ensemble_ignores_worker_count(seed in any::<u64>(), workers in 2usize..6) {
        let trap = TrapConfig::default();
        let noise = ContinuousNoise::from_heating_rate(
            800.0,
            qtt::DEFAULT_STEP,
            trap.secular_frequency,
            IonSpecies::yb171().mass,
        )
        .unwrap();
        let source = NoiseSource::Continuous(noise);
        let times = [0.0, 0.5e-3, 1e-3];
        let run = |w| {
            let options = EnsembleOptions { readout_levels: 8, workers: Some(w), chunk: 7, ..Default::default() };
            qtt::ensemble_average(&FockDistribution::ground(0), &source, &times, 40, seed, &options).unwrap()
        };
        prop_assert_eq!(run(1), run(workers));
    }
}
