use super::{normal_cdf, GridDensity};
use crate::error::{Error, Result};
use crate::math::Vector;
use crate::models::{Measurement, Transition};

/// Predicted mass allowed to fall outside the grid.
const MAX_LEAK: f64 = 1e-3;
/// Sources lighter than this fraction of the heaviest one are skipped.
const PRUNE: f64 = 1e-15;
/// Kernel values below this fraction of the kernel peak are cut.
const KERNEL_FLOOR: f64 = 1e-20;

fn scalar_model_check(dim: usize, what: &'static str) -> Result<()> {
    if dim != 1 {
        return Err(Error::dims(what, 1, dim));
    }
    Ok(())
}

/// Chapman-Kolmogorov step for an additive-noise scalar transition
/// `x' = f(x, 0, k) + g v`. Each source spreads its mass with a Gaussian
/// kernel normalized over the grid; the part of the kernel beyond the grid
/// cells is counted as leaked.
#[allow(clippy::needless_range_loop)]
pub fn pmf_predict<M>(density: &GridDensity, model: &M, k: usize) -> Result<GridDensity>
where
    M: Transition + ?Sized,
{
    scalar_model_check(model.state_dim(), "point-mass transition")?;
    let noise = model.process_noise();
    scalar_model_check(noise.dim(), "point-mass process noise")?;
    let zero = Vector::zeros(1);
    let one = Vector::from_element(1, 1.0);
    let origin = Vector::zeros(1);
    let base = model.propagate(&origin, &zero, k)[0];
    let gain = model.propagate(&origin, &one, k)[0] - base;
    let sigma = gain.abs() * noise.cov()[(0, 0)].sqrt();
    let offset = gain * noise.mean()[0];
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter("point-mass prediction needs process noise".into()));
    }

    let grid = density.grid();
    let n = grid.len();
    let dx = density.spacing();
    let lo = grid[0] - 0.5 * dx;
    let hi = grid[n - 1] + 0.5 * dx;
    let delta = dx / sigma;
    let step_ratio = (-delta * delta).exp();
    let w_max = density.weights().iter().copied().fold(0.0, f64::max);

    let mut out = vec![0.0; n];
    let mut row = vec![0.0; n];
    let mut leaked = 0.0;
    for (i, &w) in density.weights().iter().enumerate() {
        if w <= PRUNE * w_max {
            continue;
        }
        let mu = model.propagate(&Vector::from_element(1, grid[i]), &zero, k)[0] + offset;
        let leak = normal_cdf((lo - mu) / sigma) + normal_cdf((mu - hi) / sigma);
        leaked += w * leak;
        if leak >= 1.0 {
            continue;
        }
        // kernel relative to the nearest grid point, by the multiplicative
        // recurrence exp(-u^2/2) along uniformly spaced u
        let nearest = (((mu - grid[0]) / dx).round().max(0.0) as usize).min(n - 1);
        let u0 = (grid[nearest] - mu) / sigma;
        let mut total = 1.0;
        row[nearest] = 1.0;
        let (mut first, mut last) = (nearest, nearest);
        let mut value = 1.0;
        let mut ratio = (-u0 * delta - 0.5 * delta * delta).exp();
        for j in nearest + 1..n {
            value *= ratio;
            ratio *= step_ratio;
            if value < KERNEL_FLOOR {
                break;
            }
            row[j] = value;
            total += value;
            last = j;
        }
        value = 1.0;
        ratio = (u0 * delta - 0.5 * delta * delta).exp();
        for j in (0..nearest).rev() {
            value *= ratio;
            ratio *= step_ratio;
            if value < KERNEL_FLOOR {
                break;
            }
            row[j] = value;
            total += value;
            first = j;
        }
        let scale = w * (1.0 - leak) / total;
        for j in first..=last {
            out[j] += scale * row[j];
            row[j] = 0.0;
        }
    }
    if leaked > MAX_LEAK {
        return Err(Error::MassLeak { leaked });
    }
    GridDensity::from_unnormalized(grid.to_vec(), out)
}

/// Bayes update with the additive-noise likelihood `N(y; h(x, 0), R)`.
pub fn pmf_update<M>(density: &GridDensity, y: f64, model: &M) -> Result<GridDensity>
where
    M: Measurement + ?Sized,
{
    scalar_model_check(model.meas_dim(), "point-mass measurement")?;
    if !model.additive_noise() {
        return Err(Error::InvalidParameter("point-mass update needs additive measurement noise".into()));
    }
    let noise = model.measurement_noise();
    let r = noise.cov()[(0, 0)];
    let e_mean = noise.mean()[0];
    let zero = Vector::zeros(1);
    let weights: Vec<f64> = density
        .grid()
        .iter()
        .zip(density.weights())
        .map(|(&x, &w)| {
            if w == 0.0 {
                return 0.0;
            }
            let resid = y - model.observe(&Vector::from_element(1, x), &zero)[0] - e_mean;
            w * (-resid * resid / (2.0 * r)).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroLikelihood);
    }
    GridDensity::from_unnormalized(density.grid().to_vec(), weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{density_moments, is_bimodal, total_variation, uniform_grid};
    use crate::kalman::{kf_time_update, kf_update, GaussianBelief};
    use crate::math::Matrix;
    use crate::models::{scalar_model, ungm_model, GaussianNoise, NonlinearModel};

    fn walk(q: f64, r: f64) -> NonlinearModel {
        NonlinearModel::new(
            |x, v, _| x + v,
            |x, e| x + e,
            GaussianNoise::scalar(0.0, q).unwrap(),
            GaussianNoise::scalar(0.0, r).unwrap(),
            GaussianNoise::scalar(0.0, 1.0).unwrap(),
        )
        .with_additive_measurement_noise()
    }

    #[test]
    fn near_delta_kernel_keeps_density() {
        let g = uniform_grid(-10.0, 10.0, 501).unwrap();
        let d = GridDensity::gaussian(g, 1.0, 2.0).unwrap();
        let p = pmf_predict(&d, &walk(1e-6, 1.0), 0).unwrap();
        assert!(total_variation(&d, &p).unwrap() < 1e-2);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn linear_prediction_and_update_match_kf() {
        let model = scalar_model();
        let g = uniform_grid(-4.0, 4.0, 2001).unwrap();
        let d = GridDensity::gaussian(g, 0.3, 0.1).unwrap();
        let p = pmf_predict(&d, &model, 0).unwrap();
        let (m, v) = density_moments(&p);
        assert!((m - 0.3).abs() < 1e-6 && (v - 0.2).abs() < 1e-4, "{m} {v}");
        let u = pmf_update(&p, 0.5, &model).unwrap();
        let prior = GaussianBelief::new(Vector::from_element(1, 0.3), Matrix::from_element(1, 1, 0.1)).unwrap();
        let exact = kf_update(&kf_time_update(&prior, &model), &Vector::from_element(1, 0.5), model.measurement()).unwrap();
        let (m, v) = density_moments(&u);
        assert!((m - exact.mean[0]).abs() < 1e-4 && (v - exact.cov[(0, 0)]).abs() < 1e-5, "{m} {v}");
    }

    #[test]
    fn flat_likelihood_changes_nothing() {
        let g = uniform_grid(-10.0, 10.0, 401).unwrap();
        let d = GridDensity::gaussian(g, 0.0, 4.0).unwrap();
        let u = pmf_update(&d, 2.0, &walk(1.0, 1e8)).unwrap();
        assert!(total_variation(&d, &u).unwrap() < 1e-3);
    }

    #[test]
    fn ungm_posterior_modes_at_inverse_measurement() {
        let g = uniform_grid(-40.0, 40.0, 2001).unwrap();
        let flat = GridDensity::from_unnormalized(g.clone(), vec![1.0; g.len()]).unwrap();
        let y = 5.0;
        let u = pmf_update(&flat, y, &ungm_model()).unwrap();
        assert!(is_bimodal(&u));
        let w = u.weights();
        let right = (1000..2001).max_by(|a, b| w[*a].total_cmp(&w[*b])).unwrap();
        let left = (0..1000).max_by(|a, b| w[*a].total_cmp(&w[*b])).unwrap();
        let root = (20.0 * y).sqrt();
        assert!((g[right] - root).abs() < 0.05 && (g[left] + root).abs() < 0.05);
    }

    #[test]
    fn narrow_grid_leaks() {
        let g = uniform_grid(-2.0, 2.0, 201).unwrap();
        let d = GridDensity::gaussian(g, 0.0, 0.5).unwrap();
        assert!(matches!(pmf_predict(&d, &walk(4.0, 1.0), 0), Err(Error::MassLeak { .. })));
    }

    #[test]
    fn impossible_measurement() {
        let g = uniform_grid(-1.0, 1.0, 101).unwrap();
        let d = GridDensity::gaussian(g, 0.0, 0.1).unwrap();
        assert_eq!(pmf_update(&d, 1e6, &walk(1.0, 1e-4)), Err(Error::ZeroLikelihood));
    }
}
