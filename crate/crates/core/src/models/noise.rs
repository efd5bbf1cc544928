use crate::error::{Error, Result};
use crate::math::{psd_factor, require_square, sample_mvn, Matrix, RngStream, Vector};

/// `N(mean, cov)` with a cached square-root factor for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNoise {
    mean: Vector,
    cov: Matrix,
    factor: Matrix,
}

impl GaussianNoise {
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        require_square(&cov, "gaussian covariance")?;
        if mean.len() != cov.nrows() {
            return Err(Error::dims("gaussian mean", cov.nrows(), mean.len()));
        }
        if cov.iter().any(|v| !v.is_finite()) || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite gaussian parameters".into()));
        }
        let factor = psd_factor(&cov)?;
        Ok(Self { mean, cov, factor })
    }

    pub fn zero_mean(cov: Matrix) -> Result<Self> {
        let n = cov.nrows();
        Self::new(Vector::zeros(n), cov)
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(Vector::from_element(1, mean), Matrix::from_element(1, 1, var))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    /// Any `B` with `B B^T = cov`.
    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    /// `count` draws as matrix columns.
    pub fn sample(&self, rng: &mut RngStream, count: usize) -> Matrix {
        sample_mvn(&self.mean, &self.factor, rng, count).expect("factor dimensions fixed at construction")
    }

    pub fn sample_one(&self, rng: &mut RngStream) -> Vector {
        self.sample(rng, 1).column(0).into_owned()
    }
}
