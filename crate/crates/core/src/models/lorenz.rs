//! The 40-variable Lorenz-96 model with random forcing as process noise.

use super::{GaussianNoise, NonlinearModel};
use crate::error::{Error, Result};
use crate::math::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct Lorenz96Config {
    pub dim: usize,
    /// Interval over which one forcing draw is held constant.
    pub step: f64,
    pub forcing_mean: f64,
    pub forcing_variance: f64,
    /// RK4 steps per interval.
    pub substeps: usize,
}

impl Default for Lorenz96Config {
    fn default() -> Self {
        Self {
            dim: 40,
            step: 0.05,
            forcing_mean: 8.0,
            forcing_variance: 1.0,
            substeps: 1,
        }
    }
}

impl Lorenz96Config {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 4 {
            return Err(Error::InvalidParameter(format!("lorenz dimension {} < 4", self.dim)));
        }
        if !(self.step > 0.0) || self.substeps == 0 {
            return Err(Error::InvalidParameter("lorenz step must be positive".into()));
        }
        if self.forcing_variance < 0.0 {
            return Err(Error::InvalidParameter("negative forcing variance".into()));
        }
        Ok(())
    }
}

/// `dx(j)/dt = (x(j+1) - x(j-2)) x(j-1) - x(j) + F(j)` with cyclic indices.
pub fn lorenz96_rhs(x: &Vector, forcing: &Vector) -> Vector {
    let n = x.len();
    Vector::from_fn(n, |j, _| {
        let xp1 = x[(j + 1) % n];
        let xm1 = x[(j + n - 1) % n];
        let xm2 = x[(j + n - 2) % n];
        (xp1 - xm2) * xm1 - x[j] + forcing[j]
    })
}

/// One classical fourth-order Runge-Kutta step of size `step`.
pub fn rk4_step(rhs: impl Fn(&Vector) -> Vector, x: &Vector, step: f64) -> Vector {
    let k1 = rhs(x);
    let k2 = rhs(&(x + &k1 * (step / 2.0)));
    let k3 = rhs(&(x + &k2 * (step / 2.0)));
    let k4 = rhs(&(x + &k3 * step));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0)
}

/// Advances `x` over one interval with `forcing` held constant.
pub fn lorenz96_transition(x: &Vector, forcing: &Vector, config: &Lorenz96Config) -> Vector {
    let h = config.step / config.substeps as f64;
    let mut state = x.clone();
    for _ in 0..config.substeps {
        state = rk4_step(|s| lorenz96_rhs(s, forcing), &state, h);
    }
    state
}

/// Lorenz-96 as a filtering problem: the process noise is the forcing
/// deviation `F_k - forcing_mean`, every component is measured with
/// `N(0, I)` noise and `x0 ~ N(0, p0)`.
pub fn lorenz96_model(config: &Lorenz96Config, p0: Matrix) -> Result<NonlinearModel> {
    config.validate()?;
    let n = config.dim;
    let cfg = config.clone();
    let model = NonlinearModel::new(
        move |x, v, _k| {
            let forcing = v.add_scalar(cfg.forcing_mean);
            lorenz96_transition(x, &forcing, &cfg)
        },
        |x, e| x + e,
        GaussianNoise::zero_mean(Matrix::identity(n, n) * config.forcing_variance)?,
        GaussianNoise::zero_mean(Matrix::identity(n, n))?,
        GaussianNoise::zero_mean(p0)?,
    );
    model.with_linear_measurement(Matrix::identity(n, n))
}
