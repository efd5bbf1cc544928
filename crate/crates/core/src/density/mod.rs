//! Grid densities for scalar states: point-mass filter recursions and
//! kernel density estimates of ensembles.

mod kde;
mod pmf;

pub use kde::{kde, silverman_bandwidth};
pub use pmf::{pmf_predict, pmf_update};

use crate::error::{Error, Result};

const SPACING_TOL: f64 = 1e-9;
const MASS_TOL: f64 = 1e-9;

/// Probability masses on a uniform, strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: Vec<f64>,
    weights: Vec<f64>,
}

/// `points` equally spaced values from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(hi > lo) {
        return Err(Error::InvalidParameter(format!("grid [{lo}, {hi}] with {points} points")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}

fn check_grid(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::InvalidParameter("grid needs at least two points".into()));
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    for (i, w) in grid.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > SPACING_TOL * step.max(1.0) {
            return Err(Error::InvalidParameter(format!("grid spacing not uniform at {i}")));
        }
    }
    Ok(step)
}

impl GridDensity {
    /// Masses must be nonnegative and sum to one within `1e-9`.
    pub fn new(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        if weights.len() != grid.len() {
            return Err(Error::dims("density weights", grid.len(), weights.len()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("density weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParameter(format!("density weights sum to {total}")));
        }
        Ok(Self { grid, weights })
    }

    /// Normalizes arbitrary nonnegative masses.
    pub fn from_unnormalized(grid: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidParameter(format!("cannot normalize total mass {total}")));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(grid, weights)
    }

    /// Masses proportional to `pdf` at the grid points.
    pub fn from_pdf(grid: Vec<f64>, pdf: impl Fn(f64) -> f64) -> Result<Self> {
        let weights = grid.iter().map(|&x| pdf(x)).collect();
        Self::from_unnormalized(grid, weights)
    }

    pub fn gaussian(grid: Vec<f64>, mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) {
            return Err(Error::InvalidParameter(format!("gaussian variance {var}")));
        }
        Self::from_pdf(grid, |x| (-(x - mean) * (x - mean) / (2.0 * var)).exp())
    }

    /// Unit mass at the grid point nearest to `a`.
    pub fn point_mass(grid: Vec<f64>, a: f64) -> Result<Self> {
        let step = check_grid(&grid)?;
        let idx = (((a - grid[0]) / step).round().max(0.0) as usize).min(grid.len() - 1);
        let mut weights = vec![0.0; grid.len()];
        weights[idx] = 1.0;
        Self::new(grid, weights)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        (self.grid[self.grid.len() - 1] - self.grid[0]) / (self.grid.len() - 1) as f64
    }

    /// Density values `w_i / dx`.
    pub fn pdf(&self) -> Vec<f64> {
        let dx = self.spacing();
        self.weights.iter().map(|w| w / dx).collect()
    }

    pub fn mean(&self) -> f64 {
        density_moments(self).0
    }
}

/// Grid-weighted mean and central second moment.
pub fn density_moments(density: &GridDensity) -> (f64, f64) {
    let mean: f64 = density.grid.iter().zip(&density.weights).map(|(x, w)| x * w).sum();
    let var: f64 = density
        .grid
        .iter()
        .zip(&density.weights)
        .map(|(x, w)| (x - mean) * (x - mean) * w)
        .sum();
    (mean, var)
}

/// `0.5 * sum |p_i - q_i|` on a shared grid.
pub fn total_variation(p: &GridDensity, q: &GridDensity) -> Result<f64> {
    if p.grid.len() != q.grid.len() || (p.grid[0] - q.grid[0]).abs() > SPACING_TOL || (p.spacing() - q.spacing()).abs() > SPACING_TOL {
        return Err(Error::InvalidParameter("total variation needs a shared grid".into()));
    }
    Ok(0.5 * p.weights.iter().zip(&q.weights).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Local maxima above `1e-6` of the global maximum.
fn local_maxima(w: &[f64]) -> Vec<usize> {
    let top = w.iter().copied().fold(0.0, f64::max);
    let floor = 1e-6 * top;
    let n = w.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        // plateaus count once, at their first index
        let mut j = i;
        while j + 1 < n && w[j + 1] == w[i] {
            j += 1;
        }
        let left_lower = i == 0 || w[i - 1] < w[i];
        let right_lower = j + 1 == n || w[j + 1] < w[i];
        if left_lower && right_lower && w[i] > floor {
            peaks.push(i);
        }
        i = j + 1;
    }
    peaks
}

/// True when two local maxima are separated by a valley lower than half
/// the smaller of the two peaks.
pub fn is_bimodal(density: &GridDensity) -> bool {
    let w = &density.weights;
    let peaks = local_maxima(w);
    for (a_pos, &a) in peaks.iter().enumerate() {
        let mut valley = f64::INFINITY;
        let mut last = a;
        for &b in &peaks[a_pos + 1..] {
            valley = w[last..=b].iter().copied().fold(valley, f64::min);
            last = b;
            if valley < 0.5 * w[a].min(w[b]) {
                return true;
            }
        }
    }
    false
}

/// Standard normal cdf.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}
