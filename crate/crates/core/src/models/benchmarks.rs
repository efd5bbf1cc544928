//! Benchmark systems: scalar random walk, univariate nonlinear growth model
//! (UNGM) and the constant-velocity tracker. Lorenz-96 is in [`super::lorenz`].

use std::str::FromStr;

use super::{GaussianNoise, LinearModel, NonlinearModel};
use crate::error::Error;
use crate::math::{Matrix, Vector};

/// Model names accepted by the harness configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Scalar,
    Ungm,
    ConstantVelocity,
    Lorenz96,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "scalar" => Ok(ModelKind::Scalar),
            "ungm" => Ok(ModelKind::Ungm),
            "cv" => Ok(ModelKind::ConstantVelocity),
            "lorenz96" => Ok(ModelKind::Lorenz96),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

fn scalar(v: f64) -> Matrix {
    Matrix::from_element(1, 1, v)
}

/// `x_{k+1} = x_k + v_k`, `y_k = x_k + e_k` with `P0 = Q = 0.1`, `R = 0.01`.
pub fn scalar_model() -> LinearModel {
    LinearModel::new(
        scalar(1.0),
        scalar(1.0),
        scalar(1.0),
        scalar(0.1),
        scalar(0.01),
        Vector::zeros(1),
        scalar(0.1),
    )
    .expect("scalar model is well formed")
}

/// Noise-free UNGM transition `x/2 + 25x/(1+x^2) + 8cos(1.2(k+1))`.
pub fn ungm_drift(x: f64, k: usize) -> f64 {
    x / 2.0 + 25.0 * x / (1.0 + x * x) + 8.0 * (1.2 * (k as f64 + 1.0)).cos()
}

/// The UNGM benchmark with `v ~ N(0, 10)`, `e ~ N(0, 1)`, `x0 ~ N(0, 1)`.
pub fn ungm_model() -> NonlinearModel {
    NonlinearModel::new(
        |x, v, k| Vector::from_element(1, ungm_drift(x[0], k) + v[0]),
        |x, e| Vector::from_element(1, x[0] * x[0] / 20.0 + e[0]),
        GaussianNoise::scalar(0.0, 10.0).expect("valid"),
        GaussianNoise::scalar(0.0, 1.0).expect("valid"),
        GaussianNoise::scalar(0.0, 1.0).expect("valid"),
    )
    .with_additive_measurement_noise()
}

/// Constant-velocity tracker with state `[x, y, vx, vy]`, sample time 1 s
/// and position measurements.
pub fn cv_tracker_model() -> LinearModel {
    let t = 1.0;
    #[rustfmt::skip]
    let f = Matrix::from_row_slice(4, 4, &[
        1.0, 0.0, t, 0.0,
        0.0, 1.0, 0.0, t,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    ]);
    #[rustfmt::skip]
    let g = Matrix::from_row_slice(4, 2, &[
        t * t / 2.0, 0.0,
        0.0, t * t / 2.0,
        t, 0.0,
        0.0, t,
    ]);
    #[rustfmt::skip]
    let h = Matrix::from_row_slice(2, 4, &[
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
    ]);
    let q = Matrix::from_diagonal(&Vector::from_vec(vec![10.0, 50.0]));
    let r = Matrix::from_row_slice(2, 2, &[2000.0, 1000.0, 1000.0, 1980.0]);
    let x0 = Vector::from_vec(vec![0.0, 0.0, 15.0, -10.0]);
    let p0 = Matrix::from_diagonal(&Vector::from_vec(vec![50.0f64.powi(2), 50.0f64.powi(2), 20.0f64.powi(2), 20.0f64.powi(2)]));
    LinearModel::new(f, g, h, q, r, x0, p0).expect("tracker model is well formed")
}
