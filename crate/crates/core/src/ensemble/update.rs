use super::{ensemble_mean, Anomalies, Ensemble, GainEstimate, OutputEnsemble};
use crate::error::{Error, Result};
use crate::math::{solve_spd, sym_psd_sqrt, symmetrize, Matrix, Vector};
use crate::models::LinearModel;

/// Multiplicative anomaly inflation `c >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflationFactor(f64);

impl InflationFactor {
    pub const NONE: InflationFactor = InflationFactor(1.0);

    pub fn new(c: f64) -> Result<Self> {
        if !(c >= 1.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("inflation factor {c} < 1")));
        }
        Ok(Self(c))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for InflationFactor {
    fn default() -> Self {
        Self::NONE
    }
}

/// `x_bar 1^T + c X~`.
pub fn inflate(x: &Ensemble, c: InflationFactor) -> Ensemble {
    if c.0 == 1.0 {
        return x.clone();
    }
    let mean = ensemble_mean(x);
    let mut members = x.members().clone();
    for mut col in members.column_iter_mut() {
        col -= &mean;
        col *= c.0;
        col += &mean;
    }
    Ensemble::new(members).expect("inflation keeps the ensemble finite")
}

/// Perturbed-observation update `X + K (y 1^T - Y)` with a sampled output
/// ensemble `Y`.
pub fn enkf_measurement_update(x: &Ensemble, output: &OutputEnsemble, gain: &GainEstimate, y: &Vector) -> Result<Ensemble> {
    let OutputEnsemble::Sampled(y_ens) = output else {
        return Err(Error::InvalidParameter("the ensemble update needs a sampled output ensemble".into()));
    };
    if y_ens.ncols() != x.size() || y_ens.nrows() != y.len() {
        return Err(Error::dims("output ensemble", format!("{}x{}", y.len(), x.size()), format!("{}x{}", y_ens.nrows(), y_ens.ncols())));
    }
    let mut innovations = -y_ens.clone();
    for mut col in innovations.column_iter_mut() {
        col += y;
    }
    Ensemble::new(x.members() + &gain.gain * innovations)
}

/// Deterministic anomaly update `X~ Pi^{1/2}` with
/// `Pi = I - Z~^T S^{-1} Z~ / (N - 1)`, `S = Z~ Z~^T / (N - 1) + R`, and
/// `Pi^{1/2}` the symmetric square root.
pub fn sqrt_enkf_update(x: &Anomalies, z: &Anomalies, r: &Matrix) -> Result<Anomalies> {
    let n_members = x.size();
    if z.size() != n_members {
        return Err(Error::dims("anomaly ensemble sizes", n_members, z.size()));
    }
    if r.nrows() != z.dim() {
        return Err(Error::dims("measurement noise R", z.dim(), r.nrows()));
    }
    let scale = 1.0 / (n_members as f64 - 1.0);
    let zm = z.matrix();
    let s = symmetrize(&(zm * zm.transpose() * scale + r));
    let s_inv_z = solve_spd(&s, zm)?;
    let pi = symmetrize(&(Matrix::identity(n_members, n_members) - zm.transpose() * s_inv_z * scale));
    let pi_sqrt = sym_psd_sqrt(&pi)?;
    let updated = x.matrix() * pi_sqrt;
    // Pi 1 = 1 since Z~ 1 = 0, so the symmetric root keeps rows centered;
    // re-centering only removes roundoff.
    Ok(Anomalies::center(&updated))
}

/// `x_bar = (I - K H) F x_prev + K y`.
pub fn sqrt_enkf_mean_update(x_prev: &Vector, gain: &GainEstimate, y: &Vector, model: &LinearModel) -> Vector {
    let n = x_prev.len();
    let k = &gain.gain;
    (Matrix::identity(n, n) - k * model.h()) * (model.f() * x_prev) + k * y
}
