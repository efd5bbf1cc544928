use super::GaussianBelief;
use crate::ensemble::{ensemble_anomalies, ensemble_mean, Ensemble};
use crate::error::{Error, Result};
use crate::math::{psd_factor, sample_mvn, solve_spd, symmetrize, RngStream, Vector};
use crate::models::{Measurement, Transition};

/// Monte Carlo time update: sample `count` states from `belief`, push them
/// through the transition with fresh process noise.
pub fn mckf_predict<M>(belief: &GaussianBelief, model: &M, rng: &mut RngStream, count: usize, k: usize) -> Result<Ensemble>
where
    M: Transition + ?Sized,
{
    let factor = psd_factor(&belief.cov)?;
    let x = sample_mvn(&belief.mean, &factor, rng, count)?;
    let v = model.process_noise().sample(rng, count);
    Ensemble::new(model.propagate_ensemble(&x, &v, k))
}

/// Monte Carlo KF measurement update: sample moments of the prediction
/// ensemble and of a simulated output ensemble are condensed into a single
/// Gaussian through the Kalman update `x + K (y - y_bar)`,
/// `P - K S K^T`.
pub fn mckf_update<M>(prediction: &Ensemble, y: &Vector, model: &M, rng: &mut RngStream) -> Result<GaussianBelief>
where
    M: Measurement + ?Sized,
{
    let n_members = prediction.size();
    let e = model.measurement_noise().sample(rng, n_members);
    let outputs = Ensemble::new(model.observe_ensemble(prediction.members(), &e))?;
    let x_tilde = ensemble_anomalies(prediction);
    let y_tilde = ensemble_anomalies(&outputs);
    let scale = 1.0 / (n_members as f64 - 1.0);
    let p = x_tilde.matrix() * x_tilde.matrix().transpose() * scale;
    let m = x_tilde.matrix() * y_tilde.matrix().transpose() * scale;
    let s = symmetrize(&(y_tilde.matrix() * y_tilde.matrix().transpose() * scale));
    let k = solve_spd(&s, &m.transpose())
        .map_err(|e| Error::DegenerateEnsemble(format!("sample innovation covariance: {e}")))?
        .transpose();
    let mean = ensemble_mean(prediction) + &k * (y - ensemble_mean(&outputs));
    let cov = symmetrize(&(p - &k * s * k.transpose()));
    GaussianBelief::new(mean, cov)
}
