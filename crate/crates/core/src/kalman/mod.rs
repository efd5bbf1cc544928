//! Exact Kalman filtering and smoothing for linear Gaussian models, plus the
//! Monte Carlo Kalman filter for nonlinear ones.
//!
//! Every covariance leaving this module is symmetrized.

mod mckf;
mod smoother;

pub use mckf::{mckf_predict, mckf_update};
pub use smoother::{batch_smoother, batch_smoother_in_order, rts_smoother};

use std::ops::Range;

use crate::error::{Error, Result};
use crate::math::{solve_spd, symmetrize, Matrix, Vector};
use crate::models::{LinearMeasurement, LinearModel, Transition};

/// Mean and covariance of a Gaussian state belief.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector,
    pub cov: Matrix,
}

impl GaussianBelief {
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::dims("belief covariance", mean.len(), format!("{}x{}", cov.nrows(), cov.ncols())));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Marginal over the index range `r`.
    pub fn marginal(&self, r: Range<usize>) -> GaussianBelief {
        GaussianBelief {
            mean: self.mean.rows(r.start, r.len()).into_owned(),
            cov: self.cov.view((r.start, r.start), (r.len(), r.len())).into_owned(),
        }
    }
}

/// Predicted output `y_hat`, innovation covariance `S`, cross-covariance `M`
/// and gain `K` solving `K S = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPrediction {
    pub y_hat: Vector,
    pub s: Matrix,
    pub m: Matrix,
    pub k: Matrix,
}

pub fn kf_time_update(belief: &GaussianBelief, model: &LinearModel) -> GaussianBelief {
    let f = model.f();
    GaussianBelief {
        mean: f * &belief.mean,
        cov: symmetrize(&(f * &belief.cov * f.transpose() + model.process_cov())),
    }
}

/// `K = M S^{-1}`, solved as `S K^T = M^T` through a Cholesky factor of `S`.
pub fn kf_gain(belief: &GaussianBelief, obs: &LinearMeasurement) -> Result<OutputPrediction> {
    let h = obs.h();
    if h.ncols() != belief.dim() {
        return Err(Error::dims("kf_gain H columns", belief.dim(), h.ncols()));
    }
    let m = &belief.cov * h.transpose();
    let s = symmetrize(&(h * &m + obs.r()));
    let k = solve_spd(&s, &m.transpose())?.transpose();
    Ok(OutputPrediction {
        y_hat: h * &belief.mean,
        s,
        m,
        k,
    })
}

/// Joseph-form update, valid for any gain in `out.k`.
pub fn kf_measurement_update(
    belief: &GaussianBelief,
    out: &OutputPrediction,
    y: &Vector,
    obs: &LinearMeasurement,
) -> GaussianBelief {
    let n = belief.dim();
    let k = &out.k;
    let a = Matrix::identity(n, n) - k * obs.h();
    GaussianBelief {
        mean: &belief.mean + k * (y - &out.y_hat),
        cov: symmetrize(&(&a * &belief.cov * a.transpose() + k * obs.r() * k.transpose())),
    }
}

pub fn kf_update(belief: &GaussianBelief, y: &Vector, obs: &LinearMeasurement) -> Result<GaussianBelief> {
    let out = kf_gain(belief, obs)?;
    Ok(kf_measurement_update(belief, &out, y, obs))
}

const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Processes the components of `y` one at a time; requires diagonal `R`.
pub fn kf_sequential_update(belief: &GaussianBelief, y: &Vector, obs: &LinearMeasurement) -> Result<GaussianBelief> {
    let blocks: Vec<Range<usize>> = (0..y.len()).map(|i| i..i + 1).collect();
    kf_sequential_update_blocks(belief, y, obs, &blocks)
}

/// Processes `y` block by block; `R` must vanish outside the declared
/// diagonal blocks, which must partition the measurement indices.
pub fn kf_sequential_update_blocks(
    belief: &GaussianBelief,
    y: &Vector,
    obs: &LinearMeasurement,
    blocks: &[Range<usize>],
) -> Result<GaussianBelief> {
    let m = obs.h().nrows();
    if y.len() != m {
        return Err(Error::dims("sequential update measurement", m, y.len()));
    }
    let mut owner = vec![usize::MAX; m];
    for (b, r) in blocks.iter().enumerate() {
        for i in r.clone() {
            if i >= m || owner[i] != usize::MAX {
                return Err(Error::InvalidParameter(format!("measurement blocks do not partition 0..{m}")));
            }
            owner[i] = b;
        }
    }
    if owner.contains(&usize::MAX) {
        return Err(Error::InvalidParameter(format!("measurement blocks do not partition 0..{m}")));
    }
    let r = obs.r();
    for j in 0..m {
        for i in 0..m {
            if owner[i] != owner[j] && r[(i, j)].abs() > OFF_DIAGONAL_TOL {
                return Err(Error::NonDiagonalR { row: i, col: j, value: r[(i, j)] });
            }
        }
    }
    let mut current = belief.clone();
    for rows in blocks {
        let sub = obs.block(rows.clone())?;
        let yi = y.rows(rows.start, rows.len()).into_owned();
        current = kf_update(&current, &yi, &sub)?;
    }
    Ok(current)
}

/// Forward Kalman pass. Index `k` of each output vector refers to time `k`;
/// `measurements[k - 1]` is `y_k` (`None` skips the update).
#[derive(Debug, Clone)]
pub struct KalmanPass {
    pub predicted: Vec<GaussianBelief>,
    pub filtered: Vec<GaussianBelief>,
}

pub fn kalman_filter(model: &LinearModel, measurements: &[Option<Vector>]) -> Result<KalmanPass> {
    let prior = GaussianBelief::new(model.x0().clone(), model.p0().clone())?;
    let mut predicted = vec![prior.clone()];
    let mut filtered = vec![prior];
    for y in measurements {
        let pred = kf_time_update(filtered.last().expect("non-empty"), model);
        let filt = match y {
            Some(y) => kf_update(&pred, y, model.measurement())?,
            None => pred.clone(),
        };
        predicted.push(pred);
        filtered.push(filt);
    }
    Ok(KalmanPass { predicted, filtered })
}

/// Gain of the exact filter after `steps` updates, used as the stationary
/// gain of a time-invariant model. The covariance recursion does not depend
/// on measurement values.
pub fn stationary_gain(model: &LinearModel, steps: usize) -> Result<Matrix> {
    let mut belief = GaussianBelief::new(model.x0().clone(), model.p0().clone())?;
    let mut gain = Matrix::zeros(model.state_dim(), model.h().nrows());
    for _ in 0..steps {
        let pred = kf_time_update(&belief, model);
        let out = kf_gain(&pred, model.measurement())?;
        gain = out.k.clone();
        let y = out.y_hat.clone();
        belief = kf_measurement_update(&pred, &out, &y, model.measurement());
    }
    Ok(gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{relative_error, RngStream};
    use crate::models::{scalar_model, LinearModel};

    fn scalar_belief(mean: f64, var: f64) -> GaussianBelief {
        GaussianBelief::new(Vector::from_element(1, mean), Matrix::from_element(1, 1, var)).unwrap()
    }

    #[test]
    fn scalar_time_update() {
        let b = kf_time_update(&scalar_belief(0.0, 0.1), &scalar_model());
        assert_eq!(b.mean[0], 0.0);
        assert!((b.cov[(0, 0)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn identity_time_update_is_noop() {
        let m = LinearModel::new(
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
            Vector::zeros(2),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let b = GaussianBelief::new(Vector::from_vec(vec![1.0, 2.0]), Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        assert_eq!(kf_time_update(&b, &m), b);
    }

    #[test]
    fn time_update_matches_expansion() {
        let mut rng = RngStream::new(12, 0);
        let f = rng.normal_matrix(3, 3);
        let g = rng.normal_matrix(3, 2);
        let q = Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let a = rng.normal_matrix(3, 3);
        let p = &a * a.transpose();
        let m = LinearModel::new(f.clone(), g.clone(), Matrix::identity(3, 3), q.clone(), Matrix::identity(3, 3), Vector::zeros(3), p.clone()).unwrap();
        let x = Vector::from_vec(vec![0.5, -1.0, 2.0]);
        let b = kf_time_update(&GaussianBelief::new(x.clone(), p.clone()).unwrap(), &m);
        for i in 0..3 {
            let mut mi = 0.0;
            for j in 0..3 {
                mi += f[(i, j)] * x[j];
            }
            assert!((b.mean[i] - mi).abs() < 1e-12);
            for j in 0..3 {
                let mut c = 0.0;
                for a in 0..3 {
                    for bb in 0..3 {
                        c += f[(i, a)] * p[(a, bb)] * f[(j, bb)];
                    }
                }
                for a in 0..2 {
                    for bb in 0..2 {
                        c += g[(i, a)] * q[(a, bb)] * g[(j, bb)];
                    }
                }
                assert!((b.cov[(i, j)] - c).abs() < 1e-10 * c.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gain_cases() {
        let obs = scalar_model().measurement().clone();
        let out = kf_gain(&scalar_belief(0.0, 0.0), &obs).unwrap();
        assert_eq!(out.k[(0, 0)], 0.0);

        let out = kf_gain(&scalar_belief(0.0, 0.2), &obs).unwrap();
        assert!((out.s[(0, 0)] - 0.21).abs() < 1e-15);
        assert!((out.k[(0, 0)] - 0.2 / 0.21).abs() < 1e-15);
        assert!((out.k[(0, 0)] - 0.952_381).abs() < 1e-6);

        let zero_h = LinearMeasurement::new(Matrix::zeros(1, 1), Matrix::from_element(1, 1, 0.01)).unwrap();
        let out = kf_gain(&scalar_belief(0.0, 0.2), &zero_h).unwrap();
        assert_eq!(out.k[(0, 0)], 0.0);
        assert_eq!(out.s[(0, 0)], 0.01);
    }

    #[test]
    fn joseph_update_cases() {
        let obs = scalar_model().measurement().clone();
        let prior = scalar_belief(0.3, 0.2);
        let mut out = kf_gain(&prior, &obs).unwrap();
        let y = Vector::from_element(1, 1.0);
        let post = kf_measurement_update(&prior, &out, &y, &obs);
        let k = out.k[(0, 0)];
        assert!((post.cov[(0, 0)] - (1.0 - k) * 0.2).abs() < 1e-15);
        assert!((post.cov[(0, 0)] - 0.009_523_8).abs() < 1e-7);

        out.k.fill(0.0);
        assert_eq!(kf_measurement_update(&prior, &out, &y, &obs), prior);
    }

    #[test]
    fn scalar_stationary_variance() {
        let model = scalar_model();
        let pass = kalman_filter(&model, &vec![Some(Vector::zeros(1)); 30]).unwrap();
        let fixed_point = (-0.1 + (0.01f64 + 0.004).sqrt()) / 2.0;
        let mut prev = f64::INFINITY;
        for k in 1..=30 {
            let p = pass.filtered[k].cov[(0, 0)];
            if k > 3 {
                assert_eq!((p * 1e4).round() / 1e4, 0.0092);
            }
            // monotone approach from above
            assert!(p <= prev + 1e-18 && p >= fixed_point - 1e-15);
            prev = p;
        }
        assert!((prev - fixed_point).abs() < 1e-15);
    }

    #[test]
    fn sequential_equals_batch_scalar_case() {
        let obs = scalar_model().measurement().clone();
        let prior = scalar_belief(0.3, 0.2);
        let y = Vector::from_element(1, 0.7);
        let a = kf_update(&prior, &y, &obs).unwrap();
        let b = kf_sequential_update(&prior, &y, &obs).unwrap();
        assert!(relative_error(&b.cov, &a.cov) < 1e-15);
        assert!((a.mean[0] - b.mean[0]).abs() < 1e-15);
    }

    #[test]
    fn sequential_rejects_correlated_noise() {
        let m = crate::models::cv_tracker_model();
        let prior = GaussianBelief::new(m.x0().clone(), m.p0().clone()).unwrap();
        let err = kf_sequential_update(&prior, &Vector::zeros(2), m.measurement()).unwrap_err();
        assert!(matches!(err, Error::NonDiagonalR { .. }));
        // declaring R as a single block processes it whole
        let whole = kf_sequential_update_blocks(&prior, &Vector::zeros(2), m.measurement(), std::slice::from_ref(&(0..2))).unwrap();
        let direct = kf_update(&prior, &Vector::zeros(2), m.measurement()).unwrap();
        assert_eq!(whole, direct);
    }

    #[test]
    fn stationary_gain_scalar() {
        let k = stationary_gain(&scalar_model(), 25).unwrap()[(0, 0)];
        let p: f64 = (-0.1 + (0.014f64).sqrt()) / 2.0;
        assert!((k - (p + 0.1) / (p + 0.11)).abs() < 1e-12);
    }
}
