use super::{GaussianNoise, Measurement, Transition};
use crate::error::{Error, Result};
use crate::math::{cholesky, Matrix, Vector};

/// `y = H x + e`, `e ~ N(0, R)` with `R` positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMeasurement {
    h: Matrix,
    noise: GaussianNoise,
}

impl LinearMeasurement {
    pub fn new(h: Matrix, r: Matrix) -> Result<Self> {
        if r.nrows() != h.nrows() {
            return Err(Error::dims("measurement noise R", h.nrows(), r.nrows()));
        }
        cholesky(&r)?;
        Ok(Self {
            h,
            noise: GaussianNoise::zero_mean(r)?,
        })
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn r(&self) -> &Matrix {
        self.noise.cov()
    }

    pub fn state_dim(&self) -> usize {
        self.h.ncols()
    }

    /// Scalar measurement formed by row `i` of `H` and `R[i, i]`.
    pub fn component(&self, i: usize) -> Result<LinearMeasurement> {
        self.block(i..i + 1)
    }

    /// Sub-measurement for the rows in `rows`.
    pub fn block(&self, rows: std::ops::Range<usize>) -> Result<LinearMeasurement> {
        if rows.end > self.h.nrows() || rows.is_empty() {
            return Err(Error::dims("measurement block", self.h.nrows(), format!("{rows:?}")));
        }
        let h = self.h.rows(rows.start, rows.len()).into_owned();
        let r = self.r().view((rows.start, rows.start), (rows.len(), rows.len())).into_owned();
        LinearMeasurement::new(h, r)
    }
}

impl Measurement for LinearMeasurement {
    fn meas_dim(&self) -> usize {
        self.h.nrows()
    }

    fn measurement_noise(&self) -> &GaussianNoise {
        &self.noise
    }

    fn observe(&self, x: &Vector, e: &Vector) -> Vector {
        &self.h * x + e
    }

    fn observe_ensemble(&self, x: &Matrix, e: &Matrix) -> Matrix {
        &self.h * x + e
    }

    fn linear_map(&self) -> Option<&Matrix> {
        Some(&self.h)
    }
}

/// `x_{k+1} = F x_k + G v_k`, `y_k = H x_k + e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    f: Matrix,
    g: Matrix,
    measurement: LinearMeasurement,
    process: GaussianNoise,
    initial: GaussianNoise,
}

impl LinearModel {
    pub fn new(f: Matrix, g: Matrix, h: Matrix, q: Matrix, r: Matrix, x0: Vector, p0: Matrix) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n || n == 0 {
            return Err(Error::dims("transition F", "square", format!("{}x{}", f.nrows(), f.ncols())));
        }
        if g.nrows() != n || g.ncols() != q.nrows() {
            return Err(Error::dims(
                "noise gain G",
                format!("{n}x{}", q.nrows()),
                format!("{}x{}", g.nrows(), g.ncols()),
            ));
        }
        if h.ncols() != n {
            return Err(Error::dims("measurement H columns", n, h.ncols()));
        }
        if x0.len() != n || p0.nrows() != n {
            return Err(Error::dims("initial state", n, format!("{} / {}", x0.len(), p0.nrows())));
        }
        Ok(Self {
            f,
            g,
            measurement: LinearMeasurement::new(h, r)?,
            process: GaussianNoise::zero_mean(q)?,
            initial: GaussianNoise::new(x0, p0)?,
        })
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn h(&self) -> &Matrix {
        self.measurement.h()
    }

    pub fn q(&self) -> &Matrix {
        self.process.cov()
    }

    pub fn r(&self) -> &Matrix {
        self.measurement.r()
    }

    pub fn x0(&self) -> &Vector {
        self.initial.mean()
    }

    pub fn p0(&self) -> &Matrix {
        self.initial.cov()
    }

    /// `G Q G^T`.
    pub fn process_cov(&self) -> Matrix {
        &self.g * self.q() * self.g.transpose()
    }

    pub fn measurement(&self) -> &LinearMeasurement {
        &self.measurement
    }
}

impl Transition for LinearModel {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    fn process_noise(&self) -> &GaussianNoise {
        &self.process
    }

    fn initial_state(&self) -> &GaussianNoise {
        &self.initial
    }

    fn propagate(&self, x: &Vector, v: &Vector, _k: usize) -> Vector {
        &self.f * x + &self.g * v
    }

    fn propagate_ensemble(&self, x: &Matrix, v: &Matrix, _k: usize) -> Matrix {
        &self.f * x + &self.g * v
    }
}

impl Measurement for LinearModel {
    fn meas_dim(&self) -> usize {
        self.measurement.meas_dim()
    }

    fn measurement_noise(&self) -> &GaussianNoise {
        self.measurement.measurement_noise()
    }

    fn observe(&self, x: &Vector, e: &Vector) -> Vector {
        self.measurement.observe(x, e)
    }

    fn observe_ensemble(&self, x: &Matrix, e: &Matrix) -> Matrix {
        self.measurement.observe_ensemble(x, e)
    }

    fn linear_map(&self) -> Option<&Matrix> {
        Some(self.h())
    }
}
