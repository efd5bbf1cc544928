use enkf::Vector;

use crate::LabError;

/// First step included in the time-averaged error.
pub const AVERAGE_FROM: usize = 100;

/// `sqrt(|estimate - truth|^2 / n)`.
pub fn rmse_metric(estimate: &Vector, truth: &Vector) -> Result<f64, LabError> {
    if estimate.len() != truth.len() || truth.is_empty() {
        return Err(LabError::Config(format!(
            "rmse of vectors with lengths {} and {}",
            estimate.len(),
            truth.len()
        )));
    }
    Ok(((estimate - truth).norm_squared() / truth.len() as f64).sqrt())
}

/// Per-step errors `eps_k` for `k = 1..=L`, stored at index `k - 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricSeries {
    errors: Vec<f64>,
}

impl MetricSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(steps: usize) -> Self {
        Self {
            errors: Vec::with_capacity(steps),
        }
    }

    pub fn push(&mut self, eps: f64) {
        debug_assert!(eps >= 0.0);
        self.errors.push(eps);
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn steps(&self) -> usize {
        self.errors.len()
    }

    /// Mean of `eps_k` over `k = 100..=L`; `None` when `L < 100`.
    pub fn average(&self) -> Option<f64> {
        self.average_from(AVERAGE_FROM)
    }

    pub fn average_from(&self, first: usize) -> Option<f64> {
        let first = first.max(1);
        if self.errors.len() < first {
            return None;
        }
        let window = &self.errors[first - 1..];
        Some(window.iter().sum::<f64>() / window.len() as f64)
    }

    /// Length of the trailing run of errors above `threshold`.
    pub fn trailing_run_above(&self, threshold: f64) -> usize {
        self.errors.iter().rev().take_while(|e| **e > threshold).count()
    }
}
