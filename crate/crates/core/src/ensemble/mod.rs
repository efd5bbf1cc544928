//! The ensemble Kalman filter family.
//!
//! An [`Ensemble`] stores `N` realizations as the columns of an `n x N`
//! matrix. Its sample mean and covariance play the role of the Kalman
//! filter's belief; the measurement update only shifts member locations.

mod gain;
mod localization;
mod step;
mod update;

pub use gain::{enkf_gain_ls, enkf_gain_model, enkf_gain_model_qr, enkf_gain_sample, GainEstimate};
pub use localization::{
    build_taper, cyclic_distance, gaspari_cohn, lorenz_taper, tapered_gain, TaperSpec, TaperVariant, TaperedGain,
};
pub use step::{
    enkf_analysis, enkf_step, enkf_time_update, output_ensemble, EnkfOptions, GainMode, Localization,
    MeasurementOrder, OutputEnsemble, OutputMode, UpdateScheme,
};
pub use update::{enkf_measurement_update, inflate, sqrt_enkf_mean_update, sqrt_enkf_update, InflationFactor};

use crate::error::{Error, Result};
use crate::math::{Matrix, RngStream, Vector};
use crate::models::GaussianNoise;

/// `n x N` member matrix with `N >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Matrix,
}

impl Ensemble {
    pub fn new(members: Matrix) -> Result<Self> {
        if members.ncols() < 2 || members.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "ensemble needs n >= 1 and N >= 2, got {}x{}",
                members.nrows(),
                members.ncols()
            )));
        }
        if members.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateEnsemble("non-finite ensemble member".into()));
        }
        Ok(Self { members })
    }

    /// `size` draws from `dist`.
    pub fn sample(dist: &GaussianNoise, size: usize, rng: &mut RngStream) -> Result<Self> {
        Self::new(dist.sample(rng, size))
    }

    /// Rebuilds members from a mean and anomalies, `x_bar 1^T + X~`.
    pub fn from_parts(mean: &Vector, anomalies: &Anomalies) -> Result<Self> {
        if mean.len() != anomalies.dim() {
            return Err(Error::dims("ensemble mean", anomalies.dim(), mean.len()));
        }
        let mut members = anomalies.matrix().clone();
        for mut col in members.column_iter_mut() {
            col += mean;
        }
        Self::new(members)
    }

    pub fn members(&self) -> &Matrix {
        &self.members
    }

    pub fn into_members(self) -> Matrix {
        self.members
    }

    pub fn dim(&self) -> usize {
        self.members.nrows()
    }

    pub fn size(&self) -> usize {
        self.members.ncols()
    }

    pub fn mean(&self) -> Vector {
        ensemble_mean(self)
    }

    pub fn anomalies(&self) -> Anomalies {
        ensemble_anomalies(self)
    }

    pub fn cov(&self) -> Matrix {
        ensemble_cov(&self.anomalies())
    }
}

/// Mean-free deviations `X~` (zero row sums).
#[derive(Debug, Clone, PartialEq)]
pub struct Anomalies {
    deviations: Matrix,
}

impl Anomalies {
    /// Wraps `deviations`, checking that each row sums to zero within
    /// `1e-10 * N * max|row|`.
    pub fn new(deviations: Matrix) -> Result<Self> {
        let n_members = deviations.ncols();
        if n_members < 2 {
            return Err(Error::InvalidParameter("anomalies need at least two members".into()));
        }
        for (i, row) in deviations.row_iter().enumerate() {
            let scale = row.amax();
            let sum: f64 = row.iter().sum();
            if sum.abs() > 1e-10 * n_members as f64 * scale {
                return Err(Error::InvalidParameter(format!("anomaly row {i} sums to {sum:.3e}")));
            }
        }
        Ok(Self { deviations })
    }

    /// Subtracts the row means of `m`.
    pub fn center(m: &Matrix) -> Self {
        let n_members = m.ncols() as f64;
        let mut deviations = m.clone();
        for mut row in deviations.row_iter_mut() {
            let mean = row.sum() / n_members;
            row.add_scalar_mut(-mean);
        }
        Self { deviations }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.deviations
    }

    pub fn dim(&self) -> usize {
        self.deviations.nrows()
    }

    pub fn size(&self) -> usize {
        self.deviations.ncols()
    }

    /// `H X~`; the product of anomalies with a fixed matrix is again mean-free.
    pub fn map(&self, h: &Matrix) -> Anomalies {
        Anomalies {
            deviations: h * &self.deviations,
        }
    }

    /// `diag(r) X~`.
    pub fn scale_rows(&self, r: &Vector) -> Anomalies {
        let mut deviations = self.deviations.clone();
        for (i, mut row) in deviations.row_iter_mut().enumerate() {
            row *= r[i];
        }
        Anomalies { deviations }
    }

    /// `X~ X~^T / (N - 1)`.
    pub fn cov(&self) -> Matrix {
        ensemble_cov(self)
    }
}

/// `(1/N) X 1`.
pub fn ensemble_mean(x: &Ensemble) -> Vector {
    x.members.column_mean()
}

/// `X - x_bar 1^T` by direct subtraction.
pub fn ensemble_anomalies(x: &Ensemble) -> Anomalies {
    Anomalies::center(&x.members)
}

/// `X~ X~^T / (N - 1)`, symmetric by construction.
pub fn ensemble_cov(anomalies: &Anomalies) -> Matrix {
    let a = anomalies.matrix();
    let p = a * a.transpose() / (a.ncols() as f64 - 1.0);
    crate::math::symmetrize(&p)
}
