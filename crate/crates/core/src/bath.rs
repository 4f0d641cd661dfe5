//! Number-state populations of an oscillator weakly coupled to a
//! high-temperature reservoir, and the heating-rate fits built on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::curve::HeatingCurve;
use crate::data::PopulationDataset;
use crate::error::{invalid, Error, Result};
use crate::fit::{FitParameter, FitResult};
use crate::optim::{bracketed_minimum, second_derivative};
use crate::physics::FockDistribution;

/// Linear heating rate n̄̇ (quanta/s) applied for `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    pub heating_rate: f64,
    pub duration: f64,
}

impl BathParams {
    pub fn new(heating_rate: f64, duration: f64) -> Result<Self> {
        let p = Self {
            heating_rate,
            duration,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.heating_rate >= 0.0 && self.heating_rate.is_finite()) {
            return Err(invalid(
                "heating_rate",
                format!("must be finite and >= 0, got {}", self.heating_rate),
            ));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(invalid(
                "duration",
                format!("must be finite and >= 0, got {}", self.duration),
            ));
        }
        Ok(())
    }

    /// Dimensionless heating n̄̇·t.
    pub fn quanta(&self) -> f64 {
        self.heating_rate * self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathOptions {
    /// Levels added above the initial truncation for the output.
    pub headroom: usize,
    /// Output deficit above which the result is flagged.
    pub deficit_warning: f64,
}

impl Default for BathOptions {
    fn default() -> Self {
        Self {
            headroom: 200,
            deficit_warning: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathPropagation {
    pub distribution: FockDistribution,
    /// 1 − Σρ_nn of the output.
    pub deficit: f64,
    /// Set when `deficit` exceeds [`BathOptions::deficit_warning`].
    pub truncation_warning: bool,
}

/// Relative size below which the reservoir sum is cut.
const SERIES_CUTOFF: f64 = 1e-16;

/// Precomputed quantities for one initial state.
struct Propagator<'a> {
    initial: &'a [f64],
    /// tail[k] = Σ_{i ≥ k} ρ_ii(0).
    tail: Vec<f64>,
    ln_fact: Vec<f64>,
}

impl<'a> Propagator<'a> {
    fn new(initial: &'a FockDistribution, max_level: usize) -> Self {
        let rho = initial.probabilities();
        let mut tail = vec![0.0; rho.len() + 1];
        for k in (0..rho.len()).rev() {
            tail[k] = tail[k + 1] + rho[k];
        }
        let ln_fact = (0..=(rho.len() + max_level + 1) as u64)
            .map(ln_factorial)
            .collect();
        Self {
            initial: rho,
            tail,
            ln_fact,
        }
    }

    fn ln_binom(&self, n: usize, k: usize) -> f64 {
        self.ln_fact[n] - self.ln_fact[k] - self.ln_fact[n - k]
    }

    /// S_d = Σ_l u^l C(d+l, l) ρ_{d+l}(0).
    fn reservoir_sum(&self, d: usize, x: f64) -> f64 {
        let n_in = self.initial.len();
        if d >= n_in {
            return 0.0;
        }
        let ln_u = (x / (1.0 + x)).ln();
        // c_l = u^l C(d+l, l) peaks at l ≈ d·x and decreases afterwards.
        let peak = d as f64 * x;
        let mut sum = 0.0;
        for l in 0..(n_in - d) {
            let ln_c = l as f64 * ln_u + self.ln_binom(d + l, l);
            let rho = self.initial[d + l];
            if rho > 0.0 {
                sum += (ln_c + rho.ln()).exp();
            }
            if l as f64 > peak
                && (ln_c + self.tail[d + l + 1].max(1e-300).ln()).exp() < SERIES_CUTOFF * sum
            {
                break;
            }
        }
        sum
    }

    /// ρ_nn(t) from the precomputed reservoir sums S_0..S_n.
    fn level(&self, n: usize, x: f64, sums: &[f64]) -> f64 {
        let ln_u = (x / (1.0 + x)).ln();
        let ln_v = -(1.0 + x).ln();
        let mut total = 0.0;
        for j in 0..=n {
            let s = sums[n - j];
            if s > 0.0 {
                let ln_w =
                    ln_v + j as f64 * ln_u + 2.0 * (n - j) as f64 * ln_v + self.ln_binom(n, j);
                total += (ln_w + s.ln()).exp();
            }
        }
        total
    }
}

/// Propagates diagonal populations through the high-temperature reservoir
/// solution with default options.
pub fn bath_propagate(initial: &FockDistribution, params: BathParams) -> Result<BathPropagation> {
    bath_propagate_with(initial, params, BathOptions::default())
}

pub fn bath_propagate_with(
    initial: &FockDistribution,
    params: BathParams,
    options: BathOptions,
) -> Result<BathPropagation> {
    params.validate()?;
    let n_out = initial.n_max() + options.headroom;
    let x = params.quanta();
    let probs = if x == 0.0 {
        let mut p = initial.probabilities().to_vec();
        p.resize(n_out + 1, 0.0);
        p
    } else {
        let prop = Propagator::new(initial, n_out);
        let sums: Vec<f64> = (0..=n_out).map(|d| prop.reservoir_sum(d, x)).collect();
        (0..=n_out).map(|n| prop.level(n, x, &sums)).collect()
    };
    let distribution =
        FockDistribution::with_tolerance(probs, crate::physics::ANALYTIC_NORM_EPS * 100.0)?;
    let deficit = (initial.total() - distribution.total()).max(0.0);
    Ok(BathPropagation {
        truncation_warning: deficit > options.deficit_warning,
        deficit,
        distribution,
    })
}

/// Selected level populations ρ_nn at heating n̄̇·t = `quanta`.
pub fn bath_levels(initial: &FockDistribution, quanta: f64, levels: &[usize]) -> Vec<f64> {
    if quanta == 0.0 {
        return levels.iter().map(|&n| initial.get(n)).collect();
    }
    let top = levels.iter().copied().max().unwrap_or(0);
    let prop = Propagator::new(initial, top);
    let sums: Vec<f64> = (0..=top).map(|d| prop.reservoir_sum(d, quanta)).collect();
    levels
        .iter()
        .map(|&n| prop.level(n, quanta, &sums))
        .collect()
}

/// n̄(t) = n̄(0) + n̄̇·t.
pub fn bath_nbar(initial: &FockDistribution, params: BathParams) -> f64 {
    initial.mean() + params.quanta()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Residuals divided by the binomial standard error of each point.
    #[default]
    Binomial,
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathFitOptions {
    pub levels: Vec<usize>,
    pub weighting: Weighting,
    /// Relative tolerance of the scalar search.
    pub rel_tol: f64,
}

impl Default for BathFitOptions {
    fn default() -> Self {
        Self {
            levels: vec![0, 1],
            weighting: Weighting::Binomial,
            rel_tol: 1e-8,
        }
    }
}

/// Floor on per-point σ so that a zero-error point cannot dominate.
const MIN_SIGMA: f64 = 1e-6;

struct BathObjective<'a> {
    initial: &'a FockDistribution,
    times: Vec<f64>,
    levels: Vec<usize>,
    /// (time index, level index, value, weight)
    points: Vec<(usize, usize, f64, f64)>,
}

impl<'a> BathObjective<'a> {
    fn new(
        dataset: &PopulationDataset,
        initial: &'a FockDistribution,
        options: &BathFitOptions,
    ) -> Self {
        let used: Vec<_> = dataset
            .points
            .iter()
            .filter(|p| options.levels.contains(&p.level))
            .collect();
        let mut times: Vec<f64> = used.iter().map(|p| p.time).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut levels: Vec<usize> = used.iter().map(|p| p.level).collect();
        levels.sort_unstable();
        levels.dedup();
        let points = used
            .iter()
            .map(|p| {
                let ti = times.iter().position(|t| *t == p.time).unwrap();
                let li = levels.iter().position(|l| *l == p.level).unwrap();
                let w = match options.weighting {
                    Weighting::Binomial => 1.0 / p.std_err.max(MIN_SIGMA),
                    Weighting::Unweighted => 1.0,
                };
                (ti, li, p.population, w)
            })
            .collect();
        Self {
            initial,
            times,
            levels,
            points,
        }
    }

    fn residuals(&self, rate: f64) -> Vec<f64> {
        let model: Vec<Vec<f64>> = self
            .times
            .iter()
            .map(|t| bath_levels(self.initial, rate * t, &self.levels))
            .collect();
        self.points
            .iter()
            .map(|&(ti, li, y, w)| w * (model[ti][li] - y))
            .collect()
    }

    fn chi2(&self, rate: f64) -> f64 {
        self.residuals(rate).iter().map(|r| r * r).sum()
    }
}

/// Weighted least-squares estimate of n̄̇ ≥ 0 from measured populations.
///
/// A log-spaced scan over rates brackets the global minimum, Brent's method
/// refines it, and the 1σ error comes from the curvature of χ².
pub fn fit_bath_rate(
    dataset: &PopulationDataset,
    initial: &FockDistribution,
    options: &BathFitOptions,
) -> Result<FitResult> {
    let objective = BathObjective::new(dataset, initial, options);
    if objective.points.is_empty() {
        return Err(Error::NoFit(
            "dataset has no points at the fitted levels".into(),
        ));
    }
    if objective.times.len() < 2 {
        return Err(Error::FlatLikelihood(format!(
            "{} distinct time stamp(s); the heating rate is unconstrained",
            objective.times.len()
        )));
    }
    let t_max = *objective.times.last().unwrap();
    if t_max <= 0.0 {
        return Err(Error::FlatLikelihood("all points are at t = 0".into()));
    }

    // Rates from 1e-4 to 1e4 quanta over the longest delay, plus zero.
    let mut grid = vec![0.0];
    grid.extend((0..=64).map(|k| 1e-4 / t_max * 10f64.powf(k as f64 / 8.0)));
    let abs_tol = 1e-12 / t_max;
    let best = bracketed_minimum(|r| objective.chi2(r), &grid, options.rel_tol, abs_tol);

    let rate = best.x;
    let h = (1e-4 * rate).max(1e-4 / t_max);
    let curvature = second_derivative(|r| objective.chi2(r), rate, h, 0.0);
    if !(curvature > 0.0 && curvature.is_finite()) {
        return Err(Error::FlatLikelihood(format!(
            "χ² curvature {curvature:e} at n̄̇ = {rate}"
        )));
    }
    let residuals = objective.residuals(rate);
    let chi2: f64 = residuals.iter().map(|r| r * r).sum();
    let mut variance = 2.0 / curvature;
    if options.weighting == Weighting::Unweighted {
        let dof = residuals.len().saturating_sub(1).max(1);
        variance *= chi2 / dof as f64;
    }
    Ok(FitResult {
        parameters: vec![FitParameter {
            name: "heating_rate".into(),
            value: rate,
            uncertainty: variance.sqrt(),
        }],
        residuals,
        objective: chi2,
        converged: best.converged,
        iterations: best.iterations,
        evaluations: best.evaluations,
        objective_trace: vec![best.fx],
        gradient_norm: None,
    })
}

/// One point of the cumulative estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativePoint {
    pub time: f64,
    pub rate: f64,
    pub rate_err: f64,
    pub nbar: f64,
}

/// n̄(t_k) from heating rates fitted to the data up to each t_k in turn.
///
/// A prefix holding only t = 0 reports the initial mean. Each n̄(t_k) is the
/// mean of the initial state propagated with its own n̄̇_k, with bounds from
/// n̄̇_k ± σ_k (the lower rate clipped at zero).
pub fn cumulative_nbar_estimate(
    dataset: &PopulationDataset,
    initial: &FockDistribution,
    options: &BathFitOptions,
) -> Result<(HeatingCurve, Vec<CumulativePoint>)> {
    let times = dataset.times();
    if times.len() < 2 {
        return Err(Error::FlatLikelihood(format!(
            "{} distinct time stamp(s)",
            times.len()
        )));
    }
    let n0 = initial.mean();
    let points: Vec<Result<CumulativePoint>> = times
        .par_iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok(CumulativePoint {
                    time: t,
                    rate: 0.0,
                    rate_err: 0.0,
                    nbar: n0,
                });
            }
            let fit = fit_bath_rate(&dataset.up_to(t), initial, options)?;
            let rate = fit.value("heating_rate");
            Ok(CumulativePoint {
                time: t,
                rate,
                rate_err: fit.uncertainty("heating_rate"),
                nbar: bath_nbar(
                    initial,
                    BathParams {
                        heating_rate: rate,
                        duration: t,
                    },
                ),
            })
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    let values = points.iter().map(|p| p.nbar).collect();
    let lo = points
        .iter()
        .map(|p| n0 + (p.rate - p.rate_err).max(0.0) * p.time)
        .collect();
    let hi = points
        .iter()
        .map(|p| n0 + (p.rate + p.rate_err) * p.time)
        .collect();
    Ok((HeatingCurve::new(times, values, lo, hi)?, points))
}
