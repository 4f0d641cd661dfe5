//! Thermal-distribution fit to a few measured level populations.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{FitParameter, FitResult};
use crate::optim::{bracketed_minimum, second_derivative};

/// Measured population of one Fock level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub level: usize,
    pub population: f64,
    pub std_err: f64,
}

impl LevelEstimate {
    pub fn new(level: usize, population: f64, std_err: f64) -> Self {
        Self {
            level,
            population,
            std_err,
        }
    }
}

fn thermal_level(nbar: f64, n: usize) -> f64 {
    let q = nbar / (1.0 + nbar);
    q.powi(n as i32) / (1.0 + nbar)
}

/// Weighted least-squares n̄ of a thermal state matched to `levels`.
///
/// The search runs over q = n̄/(1+n̄) ∈ [0, 1) so that n̄ = 0 is an
/// ordinary grid node.
pub fn fit_thermal_from_levels(levels: &[LevelEstimate]) -> Result<FitResult> {
    let usable: Vec<&LevelEstimate> = levels
        .iter()
        .filter(|l| l.std_err.is_finite() && l.std_err > 0.0 && l.population.is_finite())
        .collect();
    if usable.len() < 2 {
        return Err(invalid(
            "levels",
            "need at least two levels with finite positive uncertainty",
        ));
    }
    if usable.iter().all(|l| l.population == 0.0) {
        return Err(Error::NoFit("all level populations are zero".into()));
    }
    let residuals = |nbar: f64| -> Vec<f64> {
        usable
            .iter()
            .map(|l| (thermal_level(nbar, l.level) - l.population) / l.std_err)
            .collect()
    };
    let chi2 = |nbar: f64| residuals(nbar).iter().map(|r| r * r).sum::<f64>();
    let chi2_q = |q: f64| chi2(q / (1.0 - q));

    let grid: Vec<f64> = (0..=200)
        .map(|k| 1.0 - (1.0 - k as f64 / 200.0).powi(2) * 0.999_999 - 1e-6)
        .collect();
    let mut grid = grid;
    grid[0] = 0.0;
    let best = bracketed_minimum(chi2_q, &grid, 1e-12, 1e-15);
    let nbar = best.x / (1.0 - best.x);

    let h = 1e-4 * nbar.max(1e-2);
    let curvature = second_derivative(chi2, nbar, h, 0.0);
    let uncertainty = if curvature > 0.0 {
        (2.0 / curvature).sqrt()
    } else {
        f64::INFINITY
    };
    let res = residuals(nbar);
    Ok(FitResult {
        parameters: vec![FitParameter {
            name: "nbar".into(),
            value: nbar,
            uncertainty,
        }],
        objective: res.iter().map(|r| r * r).sum(),
        residuals: res,
        converged: best.converged,
        iterations: best.iterations,
        evaluations: best.evaluations,
        objective_trace: vec![best.fx],
        gradient_norm: None,
    })
}
