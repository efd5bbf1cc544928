use std::ops::Range;

use super::{LinearMeasurement, LinearModel, Measurement, Transition};
use crate::error::{Error, Result};
use crate::math::{symmetrize, Matrix, RngStream, Vector};

/// A simulated realization: `states[k] = x_k` for `k = 0..=L` and
/// measurements `y_1, ..., y_L` (`x_0` is not measured).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub measurements: Vec<Vector>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.measurements.len()
    }

    /// `y_k` for `1 <= k <= L`.
    pub fn measurement(&self, k: usize) -> &Vector {
        &self.measurements[k - 1]
    }
}

/// Draws `x_0`, then alternates process and measurement noise for each step.
pub fn simulate<M>(model: &M, steps: usize, rng: &mut RngStream) -> Trajectory
where
    M: Transition + Measurement + ?Sized,
{
    let mut states = Vec::with_capacity(steps + 1);
    let mut measurements = Vec::with_capacity(steps);
    let mut x = model.initial_state().sample_one(rng);
    states.push(x.clone());
    for k in 0..steps {
        let v = model.process_noise().sample_one(rng);
        x = model.propagate(&x, &v, k);
        let e = model.measurement_noise().sample_one(rng);
        measurements.push(model.observe(&x, &e));
        states.push(x.clone());
    }
    Trajectory { states, measurements }
}

/// Prior over a stacked trajectory `xi = [x_0; x_1; ...; x_L]` of a linear
/// model, with the measurement map of each `y_k` selecting block `k`.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    block_dim: usize,
    steps: usize,
    mean: Vector,
    cov: Matrix,
    maps: Vec<LinearMeasurement>,
}

impl TrajectoryBatch {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn prior_mean(&self) -> &Vector {
        &self.mean
    }

    pub fn prior_cov(&self) -> &Matrix {
        &self.cov
    }

    /// Index range of `x_k` inside `xi`.
    pub fn block(&self, k: usize) -> Range<usize> {
        k * self.block_dim..(k + 1) * self.block_dim
    }

    /// Measurement map `[0 ... H ... 0]` of `y_k`, `1 <= k <= L`.
    pub fn measurement(&self, k: usize) -> &LinearMeasurement {
        &self.maps[k - 1]
    }

    pub fn stack(&self, states: &[Vector]) -> Result<Vector> {
        if states.len() != self.steps + 1 {
            return Err(Error::dims("trajectory stack", self.steps + 1, states.len()));
        }
        let mut xi = Vector::zeros(self.dim());
        for (k, x) in states.iter().enumerate() {
            xi.rows_mut(k * self.block_dim, self.block_dim).copy_from(x);
        }
        Ok(xi)
    }
}

pub fn build_trajectory_batch(model: &LinearModel, steps: usize) -> Result<TrajectoryBatch> {
    if steps < 1 {
        return Err(Error::InvalidParameter("trajectory batch needs at least one step".into()));
    }
    let nx = model.state_dim();
    let n = (steps + 1) * nx;
    let f = model.f();
    let gqg = model.process_cov();

    let mut mean = Vector::zeros(n);
    let mut cov = Matrix::zeros(n, n);
    mean.rows_mut(0, nx).copy_from(model.x0());
    cov.view_mut((0, 0), (nx, nx)).copy_from(model.p0());
    for k in 1..=steps {
        let prev = mean.rows((k - 1) * nx, nx).into_owned();
        mean.rows_mut(k * nx, nx).copy_from(&(f * prev));
        // cov(x_k, x_j) = F cov(x_{k-1}, x_j) for j < k
        for j in 0..k {
            let c = f * cov.view(((k - 1) * nx, j * nx), (nx, nx));
            cov.view_mut((k * nx, j * nx), (nx, nx)).copy_from(&c);
            cov.view_mut((j * nx, k * nx), (nx, nx)).copy_from(&c.transpose());
        }
        let prev_cov = cov.view(((k - 1) * nx, (k - 1) * nx), (nx, nx)).into_owned();
        let ckk = symmetrize(&(f * prev_cov * f.transpose() + &gqg));
        cov.view_mut((k * nx, k * nx), (nx, nx)).copy_from(&ckk);
    }

    let h = model.h();
    let m = h.nrows();
    let maps = (1..=steps)
        .map(|k| {
            let mut hk = Matrix::zeros(m, n);
            hk.view_mut((0, k * nx), (m, nx)).copy_from(h);
            LinearMeasurement::new(hk, model.r().clone())
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TrajectoryBatch {
        block_dim: nx,
        steps,
        mean,
        cov: symmetrize(&cov),
        maps,
    })
}
