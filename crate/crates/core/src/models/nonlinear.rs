use std::fmt;
use std::sync::Arc;

use super::{GaussianNoise, Measurement, Transition};
use crate::error::{Error, Result};
use crate::math::{Matrix, Vector};

pub type TransitionFn = dyn Fn(&Vector, &Vector, usize) -> Vector + Send + Sync;
pub type MeasurementFn = dyn Fn(&Vector, &Vector) -> Vector + Send + Sync;

/// `x_{k+1} = f(x_k, v_k, k)`, `y_k = h(x_k, e_k)` with Gaussian noises.
#[derive(Clone)]
pub struct NonlinearModel {
    state_dim: usize,
    meas_dim: usize,
    f: Arc<TransitionFn>,
    h: Arc<MeasurementFn>,
    process: GaussianNoise,
    meas_noise: GaussianNoise,
    initial: GaussianNoise,
    linear_h: Option<Matrix>,
    additive: bool,
}

impl fmt::Debug for NonlinearModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearModel")
            .field("state_dim", &self.state_dim)
            .field("meas_dim", &self.meas_dim)
            .field("linear_h", &self.linear_h.is_some())
            .field("additive", &self.additive)
            .finish_non_exhaustive()
    }
}

impl NonlinearModel {
    pub fn new(
        f: impl Fn(&Vector, &Vector, usize) -> Vector + Send + Sync + 'static,
        h: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
        process: GaussianNoise,
        meas_noise: GaussianNoise,
        initial: GaussianNoise,
    ) -> Self {
        Self {
            state_dim: initial.dim(),
            meas_dim: meas_noise.dim(),
            f: Arc::new(f),
            h: Arc::new(h),
            process,
            meas_noise,
            initial,
            linear_h: None,
            additive: false,
        }
    }

    /// Declares `h(x, e) = H x + e`; `h` itself must agree.
    pub fn with_linear_measurement(mut self, h: Matrix) -> Result<Self> {
        if h.nrows() != self.meas_dim || h.ncols() != self.state_dim {
            return Err(Error::dims(
                "linear measurement map",
                format!("{}x{}", self.meas_dim, self.state_dim),
                format!("{}x{}", h.nrows(), h.ncols()),
            ));
        }
        self.linear_h = Some(h);
        self.additive = true;
        Ok(self)
    }

    /// Declares `h(x, e) = h(x, 0) + e`.
    pub fn with_additive_measurement_noise(mut self) -> Self {
        self.additive = true;
        self
    }
}

impl Transition for NonlinearModel {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn process_noise(&self) -> &GaussianNoise {
        &self.process
    }

    fn initial_state(&self) -> &GaussianNoise {
        &self.initial
    }

    fn propagate(&self, x: &Vector, v: &Vector, k: usize) -> Vector {
        (self.f)(x, v, k)
    }
}

impl Measurement for NonlinearModel {
    fn meas_dim(&self) -> usize {
        self.meas_dim
    }

    fn measurement_noise(&self) -> &GaussianNoise {
        &self.meas_noise
    }

    fn observe(&self, x: &Vector, e: &Vector) -> Vector {
        (self.h)(x, e)
    }

    fn observe_ensemble(&self, x: &Matrix, e: &Matrix) -> Matrix {
        match &self.linear_h {
            Some(h) => h * x + e,
            None => {
                let cols: Vec<Vector> = x
                    .column_iter()
                    .zip(e.column_iter())
                    .map(|(xi, ei)| (self.h)(&xi.into_owned(), &ei.into_owned()))
                    .collect();
                Matrix::from_columns(&cols)
            }
        }
    }

    fn linear_map(&self) -> Option<&Matrix> {
        self.linear_h.as_ref()
    }

    fn additive_noise(&self) -> bool {
        self.additive
    }
}
