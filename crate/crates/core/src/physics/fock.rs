//! Truncated probability distributions over motional number states.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Normalization slack for distributions built from closed forms.
pub const ANALYTIC_NORM_EPS: f64 = 1e-12;
/// Normalization slack for distributions produced by fits or Monte Carlo.
pub const FITTED_NORM_EPS: f64 = 1e-6;
/// Default number-state truncation.
pub const DEFAULT_N_MAX: usize = 400;

/// Populations p_n for n = 0..=N_max.
///
/// Σp_n may fall short of one; the shortfall is the weight lost to
/// truncation and is reported by [`FockDistribution::deficit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockDistribution {
    probs: Vec<f64>,
}

impl FockDistribution {
    /// Validates against the analytic normalization slack.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probs, ANALYTIC_NORM_EPS)
    }

    pub fn with_tolerance(probs: Vec<f64>, eps: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("probabilities", "need at least one level"));
        }
        if let Some((n, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(invalid(
                "probabilities",
                format!("p_{n} = {p} is not a valid probability"),
            ));
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + eps {
            return Err(invalid(
                "probabilities",
                format!("sum {total} exceeds 1 + {eps:e}"),
            ));
        }
        Ok(Self { probs })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        debug_assert!(probs.iter().all(|p| *p >= 0.0));
        Self { probs }
    }

    pub fn ground(n_max: usize) -> Self {
        Self::fock(0, n_max)
    }

    /// The number state |n⟩ embedded in a space truncated at `n_max`.
    pub fn fock(n: usize, n_max: usize) -> Self {
        let mut probs = vec![0.0; n_max.max(n) + 1];
        probs[n] = 1.0;
        Self { probs }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probabilities(self) -> Vec<f64> {
        self.probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// p_n, zero beyond the truncation.
    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// 1 − Σp_n, clamped at zero.
    pub fn deficit(&self) -> f64 {
        (1.0 - self.total()).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Index of the last level with weight above `cutoff`.
    pub fn support_end(&self, cutoff: f64) -> usize {
        self.probs.iter().rposition(|p| *p > cutoff).unwrap_or(0)
    }
}

/// Thermal populations (1/(1+n̄))·(n̄/(1+n̄))^n, truncated at `n_max`.
pub fn thermal_distribution(nbar: f64, n_max: usize) -> Result<FockDistribution> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(invalid(
            "nbar",
            format!("must be finite and >= 0, got {nbar}"),
        ));
    }
    Ok(FockDistribution::from_raw(thermal_probs(nbar, n_max)))
}

pub(crate) fn thermal_probs(nbar: f64, n_max: usize) -> Vec<f64> {
    let p0 = 1.0 / (1.0 + nbar);
    let ratio = nbar / (1.0 + nbar);
    let mut probs = Vec::with_capacity(n_max + 1);
    let mut p = p0;
    for _ in 0..=n_max {
        probs.push(p);
        p *= ratio;
    }
    probs
}

/// The closure that fixes one of the three double-thermal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fix", content = "value", rename_all = "snake_case")]
pub enum DoubleThermalConstraint {
    /// Weight w of the cold component.
    Weight(f64),
    /// Mean occupation of the hot component.
    HotNbar(f64),
    /// Mean occupation of the cold component.
    ColdNbar(f64),
}

impl Default for DoubleThermalConstraint {
    fn default() -> Self {
        Self::HotNbar(10.0)
    }
}

/// w·thermal(n̄_c) + (1−w)·thermal(n̄_h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleThermal {
    pub weight: f64,
    pub nbar_cold: f64,
    pub nbar_hot: f64,
}

impl DoubleThermal {
    pub fn distribution(&self, n_max: usize) -> FockDistribution {
        let cold = thermal_probs(self.nbar_cold, n_max);
        let hot = thermal_probs(self.nbar_hot, n_max);
        let w = self.weight;
        FockDistribution::from_raw(
            cold.iter()
                .zip(&hot)
                .map(|(c, h)| w * c + (1.0 - w) * h)
                .collect(),
        )
    }

    pub fn mean(&self) -> f64 {
        self.weight * self.nbar_cold + (1.0 - self.weight) * self.nbar_hot
    }

    fn level(&self, n: i32) -> f64 {
        let t = |nb: f64| (nb / (1.0 + nb)).powi(n) / (1.0 + nb);
        self.weight * t(self.nbar_cold) + (1.0 - self.weight) * t(self.nbar_hot)
    }

    /// (p_0, p_1) of the mixture.
    pub fn low_levels(&self) -> (f64, f64) {
        (self.level(0), self.level(1))
    }
}

/// Slack allowed when checking that a candidate mixture is physical.
const MIX_EPS: f64 = 1e-12;

/// Solves for the double-thermal mixture whose p_0 and p_1 equal the
/// measured values under the given closure.
///
/// Writing a thermal component through q = p_0 = 1/(1+n̄) gives p_1 = q(1−q),
/// and the two level equations reduce to closed forms in q.
pub fn solve_double_thermal(
    p0: f64,
    p1: f64,
    constraint: DoubleThermalConstraint,
) -> Result<DoubleThermal> {
    for (name, v) in [("p0_meas", p0), ("p1_meas", p1)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(name, format!("must lie in [0, 1], got {v}")));
        }
    }
    if p0 == 1.0 && p1 == 0.0 {
        return Ok(DoubleThermal {
            weight: 1.0,
            nbar_cold: 0.0,
            nbar_hot: 0.0,
        });
    }
    match constraint {
        DoubleThermalConstraint::Weight(w) => solve_fixed_weight(p0, p1, w),
        DoubleThermalConstraint::HotNbar(nh) => {
            let (u, q) = solve_one_known(p0, p1, nh)?;
            Ok(DoubleThermal {
                weight: u,
                nbar_cold: nbar_of_q(q),
                nbar_hot: nh,
            })
        }
        DoubleThermalConstraint::ColdNbar(nc) => {
            let (u, q) = solve_one_known(p0, p1, nc)?;
            Ok(DoubleThermal {
                weight: 1.0 - u,
                nbar_cold: nc,
                nbar_hot: nbar_of_q(q),
            })
        }
    }
}

/// Mixture with its n = 0, 1 entries matching the measured values,
/// truncated at `n_max`.
pub fn double_thermal_from_levels(
    p0: f64,
    p1: f64,
    constraint: DoubleThermalConstraint,
    n_max: usize,
) -> Result<FockDistribution> {
    Ok(solve_double_thermal(p0, p1, constraint)?.distribution(n_max))
}

fn nbar_of_q(q: f64) -> f64 {
    (1.0 / q - 1.0).max(0.0)
}

/// One component is thermal at `known_nbar`; returns the weight and q of
/// the other. q = q_known always solves the reduced quadratic, so the
/// physical root is the other one.
fn solve_one_known(p0: f64, p1: f64, known_nbar: f64) -> Result<(f64, f64)> {
    if !(known_nbar >= 0.0 && known_nbar.is_finite()) {
        return Err(invalid(
            "constraint",
            format!("fixed n̄ must be >= 0, got {known_nbar}"),
        ));
    }
    let a0 = 1.0 / (1.0 + known_nbar);
    let a1 = a0 * (1.0 - a0);
    let d0 = p0 - a0;
    let d1 = p1 - a1;
    if d0.abs() < MIX_EPS {
        if d1.abs() < MIX_EPS {
            // Data are exactly the fixed component; the other carries no weight.
            return Ok((0.0, a0));
        }
        return Err(Error::NoSolution(format!(
            "p0 = {p0} equals the fixed component's p0 but p1 = {p1} does not"
        )));
    }
    let q = 1.0 - a0 - d1 / d0;
    if !(q > 0.0 && q <= 1.0 + MIX_EPS) {
        return Err(Error::NoSolution(format!(
            "implied p0 = {q} of the free component is outside (0, 1]"
        )));
    }
    let q = q.min(1.0);
    let u = d0 / (q - a0);
    if !(-MIX_EPS..=1.0 + MIX_EPS).contains(&u) {
        return Err(Error::NoSolution(format!(
            "implied mixture weight {u} is outside [0, 1]"
        )));
    }
    Ok((u.clamp(0.0, 1.0), q))
}

fn solve_fixed_weight(p0: f64, p1: f64, w: f64) -> Result<DoubleThermal> {
    if !(0.0..=1.0).contains(&w) {
        return Err(invalid(
            "constraint",
            format!("weight must lie in [0, 1], got {w}"),
        ));
    }
    let single = |q: f64| -> Result<f64> {
        if (p1 - q * (1.0 - q)).abs() > 1e-10 {
            return Err(Error::NoSolution(format!(
                "a single thermal component with p0 = {p0} has p1 = {}, measured {p1}",
                q * (1.0 - q)
            )));
        }
        Ok(nbar_of_q(q))
    };
    if w == 1.0 {
        let nb = single(p0)?;
        return Ok(DoubleThermal {
            weight: 1.0,
            nbar_cold: nb,
            nbar_hot: nb,
        });
    }
    if w == 0.0 {
        let nb = single(p0)?;
        return Ok(DoubleThermal {
            weight: 0.0,
            nbar_cold: nb,
            nbar_hot: nb,
        });
    }
    // w q² − 2 p0 w q + p1(1−w) − p0(1−w−p0) = 0 for the cold component q.
    let disc = p0 * p0 - (p1 * (1.0 - w) - p0 * (1.0 - w - p0)) / w;
    if disc < -MIX_EPS {
        return Err(Error::NoSolution(format!("no real root for weight {w}")));
    }
    let qc = p0 + disc.max(0.0).sqrt();
    let qh = (p0 - w * qc) / (1.0 - w);
    if !(qc > 0.0 && qc <= 1.0 + MIX_EPS && qh > 0.0 && qh <= 1.0 + MIX_EPS) {
        return Err(Error::NoSolution(format!(
            "component p0 values ({qc}, {qh}) are not both in (0, 1]"
        )));
    }
    Ok(DoubleThermal {
        weight: w,
        nbar_cold: nbar_of_q(qc.min(1.0)),
        nbar_hot: nbar_of_q(qh.min(1.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thermal_edge_cases() {
        let g = thermal_distribution(0.0, 10).unwrap();
        assert_eq!(g.get(0), 1.0);
        assert!(g.probabilities()[1..].iter().all(|p| *p == 0.0));

        let t = thermal_distribution(1.0, 200).unwrap();
        assert_relative_eq!(t.get(0), 0.5);
        assert_relative_eq!(t.get(1), 0.25);
        assert!(thermal_distribution(-1.0, 5).is_err());
    }

    #[test]
    fn thermal_mean_within_deficit() {
        let t = thermal_distribution(12.7, 400).unwrap();
        assert!(t.deficit() < 1e-10);
        assert!((t.mean() - 12.7).abs() < 1e-10, "{}", t.mean());
        assert!(t.probabilities().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(FockDistribution::new(vec![0.5, -0.1]).is_err());
        assert!(FockDistribution::new(vec![0.6, 0.6]).is_err());
        assert!(FockDistribution::with_tolerance(vec![0.6, 0.4 + 1e-7], FITTED_NORM_EPS).is_ok());
        assert!(FockDistribution::new(vec![]).is_err());
    }

    #[test]
    fn ground_state_regardless_of_constraint() {
        for c in [
            DoubleThermalConstraint::Weight(0.3),
            DoubleThermalConstraint::HotNbar(10.0),
            DoubleThermalConstraint::ColdNbar(0.5),
        ] {
            let d = double_thermal_from_levels(1.0, 0.0, c, 50).unwrap();
            assert_eq!(d.get(0), 1.0);
            assert_eq!(d.total(), 1.0);
        }
    }

    #[test]
    fn unit_weight_collapses_to_thermal() {
        let m = solve_double_thermal(0.5, 0.25, DoubleThermalConstraint::Weight(1.0)).unwrap();
        assert_relative_eq!(m.nbar_cold, 1.0, epsilon = 1e-14);
        let d = m.distribution(100);
        assert_relative_eq!(d.get(2), 0.125, epsilon = 1e-14);
    }

    #[test]
    fn hot_fixed_round_trip() {
        let m = solve_double_thermal(0.90, 0.08, DoubleThermalConstraint::HotNbar(10.0)).unwrap();
        let (q0, q1) = m.low_levels();
        assert!((q0 - 0.90).abs() < 1e-10 && (q1 - 0.08).abs() < 1e-10);
        assert!(m.weight > 0.0 && m.weight < 1.0 && m.nbar_cold < m.nbar_hot);
        let d = m.distribution(DEFAULT_N_MAX);
        assert!((d.get(0) - 0.90).abs() < 1e-10 && (d.get(1) - 0.08).abs() < 1e-10);
    }

    #[test]
    fn other_closures_round_trip() {
        for c in [
            DoubleThermalConstraint::Weight(0.8),
            DoubleThermalConstraint::ColdNbar(0.05),
        ] {
            let m = solve_double_thermal(0.85, 0.1, c).unwrap();
            let (q0, q1) = m.low_levels();
            assert!(
                (q0 - 0.85).abs() < 1e-10 && (q1 - 0.1).abs() < 1e-10,
                "{c:?} {m:?}"
            );
        }
    }

    #[test]
    fn infeasible_pair_errors() {
        // p1 larger than any thermal mixture allows.
        let r = solve_double_thermal(0.5, 0.45, DoubleThermalConstraint::HotNbar(10.0));
        assert!(matches!(r, Err(Error::NoSolution(_))));
        let r = solve_double_thermal(0.5, 0.3, DoubleThermalConstraint::Weight(1.0));
        assert!(matches!(r, Err(Error::NoSolution(_))));
    }
}
