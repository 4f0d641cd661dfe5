use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A time series of n̄ (or one population) with asymmetric 1σ bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

impl HeatingCurve {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        ci_low: Vec<f64>,
        ci_high: Vec<f64>,
    ) -> Result<Self> {
        let n = times.len();
        if values.len() != n || ci_low.len() != n || ci_high.len() != n {
            return Err(invalid(
                "curve",
                "times, values and bounds must have equal length",
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        for i in 0..n {
            if !(ci_low[i] <= values[i] && values[i] <= ci_high[i]) {
                return Err(invalid(
                    "curve",
                    format!(
                        "bounds [{}, {}] do not enclose value {} at index {i}",
                        ci_low[i], ci_high[i], values[i]
                    ),
                ));
            }
        }
        Ok(Self {
            times,
            values,
            ci_low,
            ci_high,
        })
    }

    /// A curve with zero-width bounds.
    pub fn exact(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(times, values.clone(), values.clone(), values)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_enforced() {
        assert!(HeatingCurve::exact(vec![0.0, 1.0], vec![1.0, 2.0]).is_ok());
        assert!(HeatingCurve::exact(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(HeatingCurve::new(vec![0.0], vec![1.0], vec![1.5], vec![2.0]).is_err());
    }
}
