//! Common result type for all fitting procedures.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// 1σ uncertainty.
    pub uncertainty: f64,
}

/// Estimates, uncertainties, residuals and convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    /// Weighted residuals (model − data)/σ, or raw residuals when unweighted.
    pub residuals: Vec<f64>,
    /// Final objective value (sum of squared residuals).
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best objective after each accepted optimizer step.
    pub objective_trace: Vec<f64>,
    /// Norm of the objective gradient at the solution, scaled by the
    /// parameter uncertainties; absent for one-parameter fits.
    pub gradient_norm: Option<f64>,
}

impl FitResult {
    pub fn parameter(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Value of a named parameter. Panics if the fit has no such parameter.
    pub fn value(&self, name: &str) -> f64 {
        self.parameter(name)
            .unwrap_or_else(|| panic!("no fit parameter `{name}`"))
            .value
    }

    pub fn uncertainty(&self, name: &str) -> f64 {
        self.parameter(name)
            .unwrap_or_else(|| panic!("no fit parameter `{name}`"))
            .uncertainty
    }

    pub fn residual_norm(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}
