//! Blue-sideband forward model and SVD population inversion.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, Median, OrderStatistics};

use crate::data::{FlopDataset, ProbeKind};
use crate::error::{invalid, Error, Result};
use crate::physics::FockDistribution;
use crate::rng::stream_rng;

/// η√N above which the first-order sideband model is flagged.
pub const LAMB_DICKE_LIMIT: f64 = 0.3;

/// Blue-sideband flop of level n: sin²(Ω₀η√(n+1)t/2).
#[inline]
pub fn sideband_flop(n: usize, omega0: f64, eta: f64, t: f64) -> f64 {
    (0.5 * omega0 * eta * ((n + 1) as f64).sqrt() * t)
        .sin()
        .powi(2)
}

/// Bright fraction after a blue-sideband pulse of length `t`.
pub fn sideband_signal(p: &FockDistribution, omega0: f64, eta: f64, t: f64) -> f64 {
    p.probabilities()
        .iter()
        .enumerate()
        .map(|(n, pn)| pn * sideband_flop(n, omega0, eta, t))
        .sum()
}

/// Whether η√N_max is small enough for the first-order sideband model.
pub fn lamb_dicke_valid(eta: f64, n_max: usize) -> bool {
    eta * (n_max as f64).sqrt() <= LAMB_DICKE_LIMIT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvdOptions {
    /// Singular values below threshold·σ_max are discarded.
    pub threshold: f64,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            threshold: 1e-8,
            bootstrap: 1000,
            seed: 0,
        }
    }
}

/// Per-level populations with asymmetric 1σ intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    /// Clipped solution on the observed fractions.
    pub point: Vec<f64>,
    pub median: Vec<f64>,
    /// 15.9th percentile.
    pub low: Vec<f64>,
    /// 84.1st percentile.
    pub high: Vec<f64>,
    pub bootstrap_count: usize,
    /// ‖Mp − y‖ of the unclipped solution.
    pub residual_norm: f64,
    pub lamb_dicke_valid: bool,
}

impl PopulationEstimate {
    pub fn levels(&self) -> usize {
        self.median.len()
    }
}

fn clip(mut p: Vec<f64>) -> Vec<f64> {
    p.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    let total: f64 = p.iter().sum();
    if total > 1.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    p
}

/// Thresholded pseudo-inverse of the design matrix.
struct Inverse {
    design: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl Inverse {
    fn new(times: &[f64], levels: usize, omega0: f64, eta: f64, threshold: f64) -> Result<Self> {
        let design = DMatrix::from_fn(times.len(), levels, |i, n| {
            sideband_flop(n, omega0, eta, times[i])
        });
        let svd = design.clone().svd(true, true);
        let (u, v_t) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
        let s_max = svd.singular_values.max();
        let cut = threshold * s_max;
        let dropped: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| !(svd.singular_values[k] > cut))
            .collect();
        if !dropped.is_empty() {
            // Levels with a sizeable share of the discarded right singular vectors.
            let mut weight = vec![0.0; levels];
            for &k in &dropped {
                for (n, w) in weight.iter_mut().enumerate() {
                    *w += v_t[(k, n)].powi(2);
                }
            }
            let levels: Vec<usize> = (0..levels).filter(|&n| weight[n] > 0.1).collect();
            return Err(Error::IllPosed { levels });
        }
        let mut s_inv = DMatrix::zeros(levels, levels);
        for k in 0..levels {
            s_inv[(k, k)] = 1.0 / svd.singular_values[k];
        }
        let pinv = v_t.transpose() * s_inv * u.transpose();
        Ok(Self { design, pinv })
    }

    fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.pinv * y
    }
}

/// Least-squares Fock populations from blue-sideband flop data.
///
/// Levels above `levels − 1` are assumed empty. Intervals come from
/// binomial resampling of the counts, each resample using its own stream
/// of the generator seeded by `options.seed`.
pub fn svd_populations(
    data: &FlopDataset,
    levels: usize,
    omega0: f64,
    eta: f64,
    options: &SvdOptions,
) -> Result<PopulationEstimate> {
    if data.kind != ProbeKind::BlueSideband {
        return Err(invalid("data", "SVD inversion needs blue-sideband data"));
    }
    if levels == 0 {
        return Err(invalid("levels", "must be >= 1"));
    }
    if data.len() < levels {
        return Err(invalid(
            "data",
            format!("{} time points for {levels} levels", data.len()),
        ));
    }
    if !(omega0 > 0.0 && eta > 0.0) {
        return Err(invalid(
            "omega0",
            "Rabi frequency and Lamb-Dicke parameter must be > 0",
        ));
    }
    let inv = Inverse::new(&data.durations, levels, omega0, eta, options.threshold)?;
    let y = DVector::from_vec(data.fractions());
    let raw = inv.solve(&y);
    let residual_norm = (&inv.design * &raw - &y).norm();
    let point = clip(raw.iter().copied().collect());

    let samples: Vec<Vec<f64>> = (0..options.bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(options.seed, b as u64);
            let yb = DVector::from_iterator(
                data.len(),
                data.counts.iter().zip(&data.shots).map(|(&k, &n)| {
                    let p = k as f64 / n as f64;
                    let draw = Binomial::new(n, p)
                        .expect("valid binomial")
                        .sample(&mut rng);
                    draw as f64 / n as f64
                }),
            );
            clip(inv.solve(&yb).iter().copied().collect())
        })
        .collect();

    let (mut median, mut low, mut high) = (point.clone(), point.clone(), point.clone());
    if !samples.is_empty() {
        for n in 0..levels {
            let mut col = Data::new(samples.iter().map(|s| s[n]).collect::<Vec<_>>());
            median[n] = col.median();
            low[n] = col.quantile(0.159).min(median[n]);
            high[n] = col.quantile(0.841).max(median[n]);
        }
    }
    Ok(PopulationEstimate {
        point,
        median,
        low,
        high,
        bootstrap_count: options.bootstrap,
        residual_norm,
        lamb_dicke_valid: lamb_dicke_valid(eta, levels - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::thermal_distribution;
    use std::f64::consts::PI;

    const ETA: f64 = 0.104;

    fn omega0() -> f64 {
        2.0 * PI / (60e-6 * ETA)
    }

    fn schedule() -> Vec<f64> {
        (0..60).map(|i| i as f64 * 300e-6 / 59.0).collect()
    }

    #[test]
    fn signal_edges() {
        let g = FockDistribution::ground(5);
        assert_eq!(sideband_signal(&g, omega0(), ETA, 0.0), 0.0);
        let t_pi = PI / (omega0() * ETA);
        assert!((sideband_signal(&g, omega0(), ETA, t_pi) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn signal_matches_term_sum() {
        let p = thermal_distribution(0.5, 60).unwrap();
        for i in 0..10 {
            let t = i as f64 * 17e-6;
            let mut direct = 0.0;
            for n in 0..=60 {
                let nb = 0.5f64;
                let pn = nb.powi(n) / (1.0 + nb).powi(n + 1);
                let s = (omega0() * ETA * f64::from(n + 1).sqrt() * t / 2.0).sin();
                direct += pn * s * s;
            }
            assert!((sideband_signal(&p, omega0(), ETA, t) - direct).abs() < 1e-12);
        }
    }

    fn exact_data(p: &FockDistribution, shots: u64) -> (FlopDataset, Vec<f64>) {
        let times = schedule();
        let y: Vec<f64> = times
            .iter()
            .map(|&t| sideband_signal(p, omega0(), ETA, t))
            .collect();
        let counts = y
            .iter()
            .map(|v| (v * shots as f64).round() as u64)
            .collect();
        (
            FlopDataset::new(times, counts, vec![shots; 60], ProbeKind::BlueSideband).unwrap(),
            y,
        )
    }

    #[test]
    fn recovers_ground_state() {
        let (data, _) = exact_data(&FockDistribution::ground(0), 1 << 40);
        let opts = SvdOptions {
            bootstrap: 0,
            ..Default::default()
        };
        let est = svd_populations(&data, 8, omega0(), ETA, &opts).unwrap();
        assert!(est.residual_norm < 1e-10);
        assert!((est.point[0] - 1.0).abs() < 1e-10);
        assert!(est.point[1..].iter().all(|p| p.abs() < 1e-10));
    }

    #[test]
    fn rank_deficient_schedule_is_ill_posed() {
        // Only t = 0 and one duplicated instant: two distinct rows for five levels.
        let times = vec![0.0, 10e-6, 10e-6, 10e-6, 10e-6, 0.0];
        let data = FlopDataset::new(
            times,
            vec![0, 3, 3, 3, 3, 0],
            vec![10; 6],
            ProbeKind::BlueSideband,
        )
        .unwrap();
        match svd_populations(&data, 5, omega0(), ETA, &SvdOptions::default()) {
            Err(Error::IllPosed { levels }) => assert!(!levels.is_empty()),
            other => panic!("expected ill-posed, got {other:?}"),
        }
    }

    #[test]
    fn bootstrap_intervals_are_ordered_and_reproducible() {
        let p = thermal_distribution(0.4, 30).unwrap();
        let (data, _) = exact_data(&p, 500);
        let opts = SvdOptions {
            bootstrap: 200,
            seed: 3,
            ..Default::default()
        };
        let a = svd_populations(&data, 8, omega0(), ETA, &opts).unwrap();
        let b = svd_populations(&data, 8, omega0(), ETA, &opts).unwrap();
        assert_eq!(a, b);
        for n in 0..8 {
            assert!(
                0.0 <= a.low[n]
                    && a.low[n] <= a.median[n]
                    && a.median[n] <= a.high[n]
                    && a.high[n] <= 1.0
            );
        }
        assert!((a.median[0] - p.get(0)).abs() < 0.05);
    }

    #[test]
    fn rejects_carrier_data() {
        let data =
            FlopDataset::new(schedule(), vec![0; 60], vec![1; 60], ProbeKind::Carrier).unwrap();
        assert!(svd_populations(&data, 4, omega0(), ETA, &SvdOptions::default()).is_err());
    }
}
