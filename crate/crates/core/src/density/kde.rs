use super::GridDensity;
use crate::error::{Error, Result};

/// Kernel cut-off in bandwidths.
const WINDOW: f64 = 9.0;

/// `1.06 * sigma_hat * N^{-1/5}` with the unbiased sample deviation.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

/// Gaussian kernel density estimate evaluated on `grid`. The bandwidth is
/// never smaller than half the grid spacing.
pub fn kde(samples: &[f64], grid: &[f64]) -> Result<GridDensity> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("kernel density estimate needs two samples".into()));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample".into()));
    }
    let n = grid.len();
    let dx = (grid[n - 1] - grid[0]) / (n - 1) as f64;
    let h = silverman_bandwidth(samples).max(0.5 * dx);
    let mut weights = vec![0.0; n];
    for &s in samples {
        let first = ((s - WINDOW * h - grid[0]) / dx).ceil().max(0.0) as usize;
        let last = ((s + WINDOW * h - grid[0]) / dx).floor();
        if last < 0.0 {
            continue;
        }
        let last = (last as usize).min(n - 1);
        for j in first..=last {
            let u = (grid[j] - s) / h;
            weights[j] += (-0.5 * u * u).exp();
        }
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::InvalidParameter("all samples lie outside the grid".into()));
    }
    GridDensity::from_unnormalized(grid.to_vec(), weights)
}
