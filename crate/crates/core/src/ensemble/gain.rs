use super::Anomalies;
use crate::error::{Error, Result};
use crate::math::{cholesky, qr_triangular_sqrt, solve_spd, symmetrize, Matrix};

/// Ensemble gain `K` with the cross-covariance `M` and innovation
/// covariance `S` it was computed from (`K S = M`).
#[derive(Debug, Clone, PartialEq)]
pub struct GainEstimate {
    pub gain: Matrix,
    pub cross_cov: Matrix,
    pub innovation_cov: Matrix,
}

fn check_pair(x: &Anomalies, y: &Anomalies) -> Result<f64> {
    if x.size() != y.size() {
        return Err(Error::dims("anomaly ensemble sizes", x.size(), y.size()));
    }
    Ok(1.0 / (x.size() as f64 - 1.0))
}

fn degenerate(e: Error) -> Error {
    match e {
        Error::NotPositiveDefinite { pivot, value } => {
            Error::DegenerateEnsemble(format!("innovation covariance not positive definite (pivot {pivot} = {value:.3e})"))
        }
        other => other,
    }
}

pub(crate) fn gain_from(cross_cov: Matrix, innovation_cov: Matrix) -> Result<GainEstimate> {
    let gain = solve_spd(&innovation_cov, &cross_cov.transpose()).map_err(degenerate)?.transpose();
    Ok(GainEstimate {
        gain,
        cross_cov,
        innovation_cov,
    })
}

/// Purely sample-based gain from state and output anomalies.
pub fn enkf_gain_sample(x: &Anomalies, y: &Anomalies) -> Result<GainEstimate> {
    let scale = check_pair(x, y)?;
    let m = x.matrix() * y.matrix().transpose() * scale;
    let s = symmetrize(&(y.matrix() * y.matrix().transpose() * scale));
    gain_from(m, s)
}

/// Gain from noise-free output anomalies `Z~ = H X~` and the known `R`.
pub fn enkf_gain_model(x: &Anomalies, z: &Anomalies, r: &Matrix) -> Result<GainEstimate> {
    let scale = check_pair(x, z)?;
    if r.nrows() != z.dim() || r.ncols() != z.dim() {
        return Err(Error::dims("measurement noise R", z.dim(), r.nrows()));
    }
    let m = x.matrix() * z.matrix().transpose() * scale;
    let s = symmetrize(&(z.matrix() * z.matrix().transpose() * scale + r));
    gain_from(m, s)
}

/// Same gain as [`enkf_gain_model`], but `S` is never formed from a
/// product: a QR decomposition of `[Z~ / sqrt(N-1), R^{1/2}]^T` yields a
/// triangular square root `T` of `S`, and `K` follows from one forward and
/// one backward substitution.
pub fn enkf_gain_model_qr(x: &Anomalies, z: &Anomalies, r: &Matrix) -> Result<GainEstimate> {
    let scale = check_pair(x, z)?;
    let m_dim = z.dim();
    if r.nrows() != m_dim || r.ncols() != m_dim {
        return Err(Error::dims("measurement noise R", m_dim, r.nrows()));
    }
    let r_sqrt = cholesky(r)?.into_inner();
    let n_members = z.size();
    let mut w = Matrix::zeros(m_dim, n_members + m_dim);
    w.view_mut((0, 0), (m_dim, n_members)).copy_from(&(z.matrix() * scale.sqrt()));
    w.view_mut((0, n_members), (m_dim, m_dim)).copy_from(&r_sqrt);
    let t = qr_triangular_sqrt(&w)?;

    let m = x.matrix() * z.matrix().transpose() * scale;
    let u = t
        .solve_lower_triangular(&m.transpose())
        .ok_or(Error::RankDeficient { index: 0, value: 0.0 })?;
    let gain_t = t
        .tr_solve_lower_triangular(&u)
        .ok_or(Error::RankDeficient { index: 0, value: 0.0 })?;
    Ok(GainEstimate {
        gain: gain_t.transpose(),
        cross_cov: m,
        innovation_cov: symmetrize(&(&t * t.transpose())),
    })
}

/// Gain as the least-squares solution of `Y~^T K^T = X~^T`, one problem per
/// row of `K`, solved through a QR factorization of `Y~^T` so no sample
/// covariance enters the solve.
pub fn enkf_gain_ls(x: &Anomalies, y: &Anomalies) -> Result<GainEstimate> {
    let scale = check_pair(x, y)?;
    let yt = y.matrix().transpose();
    if yt.nrows() < yt.ncols() {
        return Err(Error::RankDeficient { index: yt.nrows(), value: 0.0 });
    }
    let qr = yt.clone().qr();
    let r = qr.r();
    let threshold = 1e-12 * yt.norm();
    for i in 0..r.nrows() {
        if r[(i, i)].abs() <= threshold {
            return Err(Error::RankDeficient { index: i, value: r[(i, i)] });
        }
    }
    let rhs = qr.q().transpose() * x.matrix().transpose();
    let gain_t = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient { index: 0, value: 0.0 })?;
    Ok(GainEstimate {
        gain: gain_t.transpose(),
        cross_cov: x.matrix() * y.matrix().transpose() * scale,
        innovation_cov: symmetrize(&(y.matrix() * y.matrix().transpose() * scale)),
    })
}
