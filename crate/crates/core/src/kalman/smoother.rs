use super::{kalman_filter, kf_update, GaussianBelief};
use crate::error::{Error, Result};
use crate::math::{solve_spd, symmetrize, Vector};
use crate::models::{LinearModel, TrajectoryBatch};

/// Posterior over the stacked trajectory after a KF update with every
/// `y_k` (`measurements[k - 1]`) in natural order.
pub fn batch_smoother(batch: &TrajectoryBatch, measurements: &[Vector]) -> Result<GaussianBelief> {
    let order: Vec<usize> = (1..=batch.steps()).collect();
    batch_smoother_in_order(batch, measurements, &order)
}

/// Like [`batch_smoother`], but only for the steps listed in `order`, in
/// that sequence. An empty `order` returns the prior.
pub fn batch_smoother_in_order(batch: &TrajectoryBatch, measurements: &[Vector], order: &[usize]) -> Result<GaussianBelief> {
    if measurements.len() != batch.steps() {
        return Err(Error::dims("batch smoother measurements", batch.steps(), measurements.len()));
    }
    let mut belief = GaussianBelief::new(batch.prior_mean().clone(), batch.prior_cov().clone())?;
    for &k in order {
        if k == 0 || k > batch.steps() {
            return Err(Error::InvalidParameter(format!("measurement step {k} outside 1..={}", batch.steps())));
        }
        belief = kf_update(&belief, &measurements[k - 1], batch.measurement(k))?;
    }
    Ok(belief)
}

/// Rauch-Tung-Striebel smoother: forward KF, then the backward pass
/// `C_k = P_{k|k} F^T P_{k+1|k}^{-1}`. Returns beliefs for `k = 0..=L`.
pub fn rts_smoother(model: &LinearModel, measurements: &[Option<Vector>]) -> Result<Vec<GaussianBelief>> {
    let pass = kalman_filter(model, measurements)?;
    let steps = measurements.len();
    let f = model.f();
    let mut smoothed = vec![pass.filtered[steps].clone(); steps + 1];
    for k in (0..steps).rev() {
        let filt = &pass.filtered[k];
        let pred = &pass.predicted[k + 1];
        let next = &smoothed[k + 1];
        // P_{k+1|k} C^T = F P_{k|k}
        let c = solve_spd(&pred.cov, &(f * &filt.cov))?.transpose();
        let mean = &filt.mean + &c * (&next.mean - &pred.mean);
        let cov = symmetrize(&(&filt.cov + &c * (&next.cov - &pred.cov) * c.transpose()));
        smoothed[k] = GaussianBelief { mean, cov };
    }
    Ok(smoothed)
}
