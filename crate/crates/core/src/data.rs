//! Measurement containers shared by the fitters and the synthetic generator.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Population of one motional level at one heating delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationPoint {
    pub time: f64,
    pub level: usize,
    pub population: f64,
    /// 1σ uncertainty of `population`.
    pub std_err: f64,
}

impl PopulationPoint {
    /// From `counts` successes in `shots` trials. The binomial error uses
    /// the smoothed estimate (k + ½)/(N + 1) so that 0 and N counts still
    /// carry a finite weight.
    pub fn from_counts(time: f64, level: usize, counts: u64, shots: u64) -> Result<Self> {
        if shots == 0 || counts > shots {
            return Err(invalid(
                "counts",
                format!("need 0 <= counts <= shots, shots > 0 (got {counts}/{shots})"),
            ));
        }
        let population = counts as f64 / shots as f64;
        let smoothed = (counts as f64 + 0.5) / (shots as f64 + 1.0);
        let std_err = (smoothed * (1.0 - smoothed) / shots as f64).sqrt();
        Ok(Self {
            time,
            level,
            population,
            std_err,
        })
    }
}

/// Time-stamped level populations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationDataset {
    pub points: Vec<PopulationPoint>,
}

impl PopulationDataset {
    pub fn new(points: Vec<PopulationPoint>) -> Result<Self> {
        for p in &points {
            if !(0.0..=1.0).contains(&p.population) {
                return Err(invalid(
                    "population",
                    format!("{} at t = {} is outside [0, 1]", p.population, p.time),
                ));
            }
            if !(p.time >= 0.0 && p.time.is_finite()) {
                return Err(invalid(
                    "time",
                    format!("{} must be finite and >= 0", p.time),
                ));
            }
            if !(p.std_err >= 0.0) {
                return Err(invalid("std_err", "must be >= 0"));
            }
        }
        Ok(Self { points })
    }

    /// Sorted distinct time stamps.
    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.points.iter().map(|p| p.time).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Points with time ≤ `t_max`.
    pub fn up_to(&self, t_max: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .copied()
                .filter(|p| p.time <= t_max)
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Carrier,
    BlueSideband,
}

/// Rabi-flop record: bright counts out of a number of shots per pulse
/// duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopDataset {
    pub durations: Vec<f64>,
    pub counts: Vec<u64>,
    pub shots: Vec<u64>,
    pub kind: ProbeKind,
    /// Optional prior on the bare Rabi frequency Ω₀ in rad/s.
    pub rabi_prior: Option<f64>,
}

impl FlopDataset {
    /// Validates and sorts the points by duration.
    pub fn new(
        durations: Vec<f64>,
        counts: Vec<u64>,
        shots: Vec<u64>,
        kind: ProbeKind,
    ) -> Result<Self> {
        if durations.len() != counts.len() || counts.len() != shots.len() {
            return Err(invalid(
                "flop data",
                "durations, counts and shots differ in length",
            ));
        }
        for i in 0..durations.len() {
            if !(durations[i] >= 0.0 && durations[i].is_finite()) {
                return Err(invalid(
                    "durations",
                    format!("{} must be finite and >= 0", durations[i]),
                ));
            }
            if counts[i] > shots[i] {
                return Err(invalid(
                    "counts",
                    format!("{} exceeds shots {}", counts[i], shots[i]),
                ));
            }
            if shots[i] == 0 {
                return Err(invalid("shots", "must be >= 1"));
            }
        }
        let mut order: Vec<usize> = (0..durations.len()).collect();
        order.sort_by(|&a, &b| durations[a].total_cmp(&durations[b]));
        Ok(Self {
            durations: order.iter().map(|&i| durations[i]).collect(),
            counts: order.iter().map(|&i| counts[i]).collect(),
            shots: order.iter().map(|&i| shots[i]).collect(),
            kind,
            rabi_prior: None,
        })
    }

    pub fn with_rabi_prior(mut self, omega0: f64) -> Self {
        self.rabi_prior = Some(omega0);
        self
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    /// Observed bright fractions k_i/N_i.
    pub fn fractions(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.shots)
            .map(|(&k, &n)| k as f64 / n as f64)
            .collect()
    }

    /// Binomial 1σ errors with the same smoothing as
    /// [`PopulationPoint::from_counts`].
    pub fn std_errs(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.shots)
            .map(|(&k, &n)| {
                let p = (k as f64 + 0.5) / (n as f64 + 1.0);
                (p * (1.0 - p) / n as f64).sqrt()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flop_dataset_is_canonicalized() {
        let d = FlopDataset::new(
            vec![2.0, 0.0, 1.0],
            vec![1, 2, 3],
            vec![5, 5, 5],
            ProbeKind::Carrier,
        )
        .unwrap();
        assert_eq!(d.durations, vec![0.0, 1.0, 2.0]);
        assert_eq!(d.counts, vec![2, 3, 1]);
        assert!(FlopDataset::new(vec![0.0], vec![6], vec![5], ProbeKind::Carrier).is_err());
    }

    #[test]
    fn counts_give_finite_errors_at_the_edges() {
        let p = PopulationPoint::from_counts(0.0, 0, 500, 500).unwrap();
        assert_eq!(p.population, 1.0);
        assert!(p.std_err > 0.0);
        assert!(PopulationPoint::from_counts(0.0, 0, 3, 0).is_err());
    }
}
