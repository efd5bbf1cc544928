//! State-space models.
//!
//! A model is split into a [`Transition`] (`x_{k+1} = f(x_k, v_k, k)`) and
//! a [`Measurement`] (`y_k = h(x_k, e_k)`). [`LinearModel`] implements both
//! with matrices; [`NonlinearModel`] wraps closures. The benchmark systems
//! live in [`benchmarks`] and [`lorenz`].

pub mod benchmarks;
mod linear;
pub mod lorenz;
mod nonlinear;
mod noise;
mod trajectory;

pub use benchmarks::{cv_tracker_model, scalar_model, ungm_model, ModelKind};
pub use linear::{LinearMeasurement, LinearModel};
pub use lorenz::{lorenz96_model, lorenz96_rhs, lorenz96_transition, rk4_step, Lorenz96Config};
pub use noise::GaussianNoise;
pub use nonlinear::NonlinearModel;
pub use trajectory::{build_trajectory_batch, simulate, Trajectory, TrajectoryBatch};

use crate::math::{Matrix, Vector};

/// State evolution `x_{k+1} = f(x_k, v_k, k)` with Gaussian `v_k`.
pub trait Transition: Send + Sync {
    fn state_dim(&self) -> usize;

    fn process_noise(&self) -> &GaussianNoise;

    /// Distribution of `x_0`.
    fn initial_state(&self) -> &GaussianNoise;

    /// Maps the state at step `k` to step `k + 1`.
    fn propagate(&self, x: &Vector, v: &Vector, k: usize) -> Vector;

    /// Column-wise [`Transition::propagate`].
    fn propagate_ensemble(&self, x: &Matrix, v: &Matrix, k: usize) -> Matrix {
        let cols: Vec<Vector> = x
            .column_iter()
            .zip(v.column_iter())
            .map(|(xi, vi)| self.propagate(&xi.into_owned(), &vi.into_owned(), k))
            .collect();
        Matrix::from_columns(&cols)
    }
}

/// Measurement relation `y_k = h(x_k, e_k)` with Gaussian `e_k`.
pub trait Measurement: Send + Sync {
    fn meas_dim(&self) -> usize;

    fn measurement_noise(&self) -> &GaussianNoise;

    fn observe(&self, x: &Vector, e: &Vector) -> Vector;

    /// Column-wise [`Measurement::observe`].
    fn observe_ensemble(&self, x: &Matrix, e: &Matrix) -> Matrix {
        let cols: Vec<Vector> = x
            .column_iter()
            .zip(e.column_iter())
            .map(|(xi, ei)| self.observe(&xi.into_owned(), &ei.into_owned()))
            .collect();
        Matrix::from_columns(&cols)
    }

    /// `H` when `h(x, e) = H x + e`.
    fn linear_map(&self) -> Option<&Matrix> {
        None
    }

    /// True when `h(x, e) = h(x, 0) + e`.
    fn additive_noise(&self) -> bool {
        self.linear_map().is_some()
    }

    /// `R`.
    fn noise_cov(&self) -> &Matrix {
        self.measurement_noise().cov()
    }
}
