use super::{enkf_gain_model, ensemble_cov, Anomalies, GainEstimate};
use crate::error::{Error, Result};
use crate::ensemble::gain::gain_from;
use crate::math::{hadamard, symmetrize, Matrix, Vector};
use crate::models::Measurement;
use nalgebra::SymmetricEigen;

const ENTRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Gaspari-Cohn fifth-order compactly supported correlation at `distance`
/// for half-support `c_loc`. Zero for `distance >= 2 c_loc`; an infinite
/// `c_loc` gives 1 everywhere.
pub fn gaspari_cohn(distance: f64, c_loc: f64) -> f64 {
    debug_assert!(distance >= 0.0 && c_loc > 0.0);
    let r = distance.abs() / c_loc;
    if r <= 1.0 {
        let r2 = r * r;
        let r3 = r2 * r;
        -r3 * r2 / 4.0 + r2 * r2 / 2.0 + 5.0 * r3 / 8.0 - 5.0 * r2 / 3.0 + 1.0
    } else if r < 2.0 {
        let r2 = r * r;
        let r3 = r2 * r;
        r3 * r2 / 12.0 - r2 * r2 / 2.0 + 5.0 * r3 / 8.0 + 5.0 * r2 / 3.0 - 5.0 * r + 4.0 - 2.0 / (3.0 * r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TaperKind {
    Dense { rho: Matrix, psd: bool },
    RankOne(Vector),
}

/// State taper `rho` (dense, or rank one `r r^T`) with an optional
/// measurement taper `rho_M` for the cross-covariance variant.
#[derive(Debug, Clone, PartialEq)]
pub struct TaperSpec {
    kind: TaperKind,
    rho_m: Option<Matrix>,
}

fn check_unit_interval(values: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    for v in values {
        if !(-ENTRY_TOL..=1.0 + ENTRY_TOL).contains(&v) {
            return Err(Error::InvalidParameter(format!("{what} entry {v} outside [0, 1]")));
        }
    }
    Ok(())
}

impl TaperSpec {
    /// Dense symmetric `rho` with entries in `[0, 1]` and unit diagonal. The
    /// PSD flag is taken from the smallest eigenvalue.
    pub fn dense(rho: Matrix) -> Result<Self> {
        crate::math::require_square(&rho, "taper")?;
        check_unit_interval(rho.iter().copied(), "taper")?;
        let n = rho.nrows();
        for i in 0..n {
            if (rho[(i, i)] - 1.0).abs() > ENTRY_TOL {
                return Err(Error::InvalidParameter(format!("taper diagonal entry {i} is {}", rho[(i, i)])));
            }
            for j in 0..i {
                let d = (rho[(i, j)] - rho[(j, i)]).abs();
                if d > ENTRY_TOL {
                    return Err(Error::NotSymmetric { asymmetry: d });
                }
            }
        }
        let min_eig = SymmetricEigen::new(rho.clone()).eigenvalues.min();
        Ok(Self {
            kind: TaperKind::Dense {
                rho,
                psd: min_eig >= -PSD_TOL,
            },
            rho_m: None,
        })
    }

    /// Rank-one taper `rho = r r^T`, `r` entries in `[0, 1]`.
    pub fn rank_one(r: Vector) -> Result<Self> {
        check_unit_interval(r.iter().copied(), "rank-one taper")?;
        Ok(Self {
            kind: TaperKind::RankOne(r),
            rho_m: None,
        })
    }

    /// Attaches an explicit `n x m` measurement taper.
    pub fn with_measurement_taper(mut self, rho_m: Matrix) -> Result<Self> {
        if rho_m.nrows() != self.dim() {
            return Err(Error::dims("measurement taper rows", self.dim(), rho_m.nrows()));
        }
        check_unit_interval(rho_m.iter().copied(), "measurement taper")?;
        self.rho_m = Some(rho_m);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            TaperKind::Dense { rho, .. } => rho.nrows(),
            TaperKind::RankOne(r) => r.len(),
        }
    }

    pub fn is_psd(&self) -> bool {
        match &self.kind {
            TaperKind::Dense { psd, .. } => *psd,
            TaperKind::RankOne(_) => true,
        }
    }

    pub fn rank_one_vector(&self) -> Option<&Vector> {
        match &self.kind {
            TaperKind::RankOne(r) => Some(r),
            TaperKind::Dense { .. } => None,
        }
    }

    /// `rho` as an `n x n` matrix.
    pub fn dense_matrix(&self) -> Matrix {
        match &self.kind {
            TaperKind::Dense { rho, .. } => rho.clone(),
            TaperKind::RankOne(r) => r * r.transpose(),
        }
    }

    /// Dense representation of the same taper. A rank-one taper keeps its
    /// possibly non-unit diagonal.
    pub fn to_dense(&self) -> TaperSpec {
        TaperSpec {
            kind: TaperKind::Dense {
                rho: self.dense_matrix(),
                psd: self.is_psd(),
            },
            rho_m: self.rho_m.clone(),
        }
    }

    /// The attached `rho_M`, or else the `|H|`-weighted average
    /// `rho_M(i, l) = sum_j |H(l, j)| rho(i, j) / sum_j |H(l, j)|`, which is
    /// `rho H^T` for selection matrices.
    pub fn measurement_taper(&self, h: &Matrix) -> Matrix {
        if let Some(m) = &self.rho_m {
            return m.clone();
        }
        let abs_h = h.abs();
        let mut weighted = match &self.kind {
            TaperKind::Dense { rho, .. } => rho * abs_h.transpose(),
            TaperKind::RankOne(r) => r * (r.transpose() * abs_h.transpose()),
        };
        for (l, mut col) in weighted.column_iter_mut().enumerate() {
            let total = abs_h.row(l).sum();
            if total > 0.0 {
                col /= total;
            }
        }
        weighted
    }
}

/// `rho(i, j) = gaspari_cohn(distance(i, j), c_loc)`.
pub fn build_taper<D>(n: usize, distance: D, c_loc: f64) -> Result<TaperSpec>
where
    D: Fn(usize, usize) -> f64,
{
    if !(c_loc > 0.0) {
        return Err(Error::InvalidParameter(format!("taper length {c_loc} must be positive")));
    }
    TaperSpec::dense(Matrix::from_fn(n, n, |i, j| gaspari_cohn(distance(i, j), c_loc)))
}

/// Index distance on a ring of `n` points, `min(|i - j|, n - |i - j|)`.
pub fn cyclic_distance(n: usize) -> impl Fn(usize, usize) -> f64 {
    move |i, j| {
        let d = i.abs_diff(j);
        d.min(n - d) as f64
    }
}

/// Circulant Gaspari-Cohn taper for equidistant points on a ring.
pub fn lorenz_taper(n: usize, c_loc: f64) -> Result<TaperSpec> {
    build_taper(n, cyclic_distance(n), c_loc)
}

/// Which covariances the taper acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaperVariant {
    /// `M = (rho o P) H^T`, `S = H (rho o P) H^T + R`.
    #[default]
    Covariance,
    /// `M = rho_M o (X~ Z~^T / (N-1))`, `S` untapered.
    CrossCovariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaperedGain {
    pub estimate: GainEstimate,
    /// Set when the dense taper failed the PSD check; the gain is still
    /// returned.
    pub indefinite_taper: bool,
}

/// Localized gain for a linear measurement `y = H x + e`.
pub fn tapered_gain<M>(x: &Anomalies, taper: &TaperSpec, variant: TaperVariant, meas: &M) -> Result<TaperedGain>
where
    M: Measurement + ?Sized,
{
    let h = meas
        .linear_map()
        .ok_or_else(|| Error::InvalidParameter("tapering needs a linear measurement map".into()))?;
    tapered_gain_linear(x, taper, variant, h, meas.noise_cov(), None)
}

pub(crate) fn tapered_gain_linear(
    x: &Anomalies,
    taper: &TaperSpec,
    variant: TaperVariant,
    h: &Matrix,
    r: &Matrix,
    rho_m: Option<&Matrix>,
) -> Result<TaperedGain> {
    if taper.dim() != x.dim() {
        return Err(Error::dims("taper", x.dim(), taper.dim()));
    }
    if h.ncols() != x.dim() || h.nrows() != r.nrows() {
        return Err(Error::dims("measurement map", format!("{}x{}", r.nrows(), x.dim()), format!("{}x{}", h.nrows(), h.ncols())));
    }
    let estimate = match (variant, &taper.kind) {
        (TaperVariant::Covariance, TaperKind::RankOne(rv)) => {
            let xs = x.scale_rows(rv);
            enkf_gain_model(&xs, &xs.map(h), r)?
        }
        (TaperVariant::Covariance, TaperKind::Dense { rho, .. }) => {
            let m = tapered_cov_times_ht(x, rho, h);
            let s = symmetrize(&(h * &m + r));
            gain_from(m, s)?
        }
        (TaperVariant::CrossCovariance, _) => {
            let z = x.map(h);
            let scale = 1.0 / (x.size() as f64 - 1.0);
            let sample_m = x.matrix() * z.matrix().transpose() * scale;
            let m = match rho_m {
                Some(t) => hadamard(t, &sample_m)?,
                None => hadamard(&taper.measurement_taper(h), &sample_m)?,
            };
            let s = symmetrize(&(z.matrix() * z.matrix().transpose() * scale + r));
            gain_from(m, s)?
        }
    };
    Ok(TaperedGain {
        estimate,
        indefinite_taper: !taper.is_psd(),
    })
}

/// `(rho o P) H^T` with `P = X~ X~^T / (N-1)`. Sparse `H` only touches the
/// covariance columns it selects.
fn tapered_cov_times_ht(x: &Anomalies, rho: &Matrix, h: &Matrix) -> Matrix {
    let n = x.dim();
    let nnz = h.iter().filter(|v| **v != 0.0).count();
    if nnz >= n {
        return hadamard(rho, &ensemble_cov(x)).expect("taper matches state dimension") * h.transpose();
    }
    let a = x.matrix();
    let scale = 1.0 / (x.size() as f64 - 1.0);
    let mut m = Matrix::zeros(n, h.nrows());
    for l in 0..h.nrows() {
        for j in 0..n {
            let hlj = h[(l, j)];
            if hlj == 0.0 {
                continue;
            }
            let p_col = a * a.row(j).transpose() * scale;
            let mut col = m.column_mut(l);
            for i in 0..n {
                col[i] += hlj * rho[(i, j)] * p_col[i];
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::enkf_gain_sample;
    use crate::math::{numerical_rank, relative_error, RngStream};
    use crate::models::LinearMeasurement;

    fn anomalies(rows: usize, cols: usize, seed: u64) -> Anomalies {
        Anomalies::center(&RngStream::new(seed, 5).normal_matrix(rows, cols))
    }

    #[test]
    fn gaspari_cohn_cases() {
        assert_eq!(gaspari_cohn(0.0, 3.0), 1.0);
        assert!((gaspari_cohn(3.0, 3.0) - 5.0 / 24.0).abs() < 1e-14);
        let below = gaspari_cohn(3.0 - 1e-9, 3.0);
        let above = gaspari_cohn(3.0 + 1e-9, 3.0);
        assert!((below - above).abs() < 1e-8);
        assert_eq!(gaspari_cohn(6.0, 3.0), 0.0);
        assert_eq!(gaspari_cohn(100.0, 3.0), 0.0);
        assert_eq!(gaspari_cohn(7.0, f64::INFINITY), 1.0);
        assert!(gaspari_cohn(5.9, 3.0) > 0.0);
        let mut prev = 1.0;
        for i in 1..=60 {
            let v = gaspari_cohn(i as f64 * 0.1, 3.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn taper_construction() {
        let t = build_taper(6, cyclic_distance(6), f64::INFINITY).unwrap();
        assert_eq!(t.dense_matrix(), Matrix::from_element(6, 6, 1.0));
        let rho = lorenz_taper(40, 5.0).unwrap();
        let m = rho.dense_matrix();
        for i in 0..40 {
            assert_eq!(m[(i, i)], 1.0);
            assert_eq!(m[(i, (i + 10) % 40)], 0.0);
            assert_eq!(m[(0, i)], m[(i, 0)]);
            assert_eq!(m[(i, (i + 3) % 40)], m[(0, 3)]);
        }
        assert!(rho.is_psd());
        assert!(SymmetricEigen::new(m).eigenvalues.min() >= -1e-10);
    }

    #[test]
    fn taper_validation() {
        let bad_diag = Matrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 1.0]);
        assert!(TaperSpec::dense(bad_diag).is_err());
        let out_of_range = Matrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
        assert!(TaperSpec::dense(out_of_range).is_err());
        assert!(TaperSpec::rank_one(Vector::from_vec(vec![0.5, -0.1])).is_err());
        let banded = Matrix::from_fn(5, 5, |i, j| if i.abs_diff(j) <= 1 { 1.0 } else { 0.0 });
        assert!(!TaperSpec::dense(banded).unwrap().is_psd());
    }

    fn identity_obs(n: usize) -> LinearMeasurement {
        LinearMeasurement::new(Matrix::identity(n, n), Matrix::identity(n, n) * 0.5).unwrap()
    }

    #[test]
    fn all_ones_taper_equals_plain_gain() {
        let x = anomalies(4, 9, 1);
        let obs = LinearMeasurement::new(RngStream::new(2, 0).normal_matrix(2, 4), Matrix::identity(2, 2)).unwrap();
        let plain = enkf_gain_model(&x, &x.map(obs.h()), obs.r()).unwrap();
        let ones = TaperSpec::dense(Matrix::from_element(4, 4, 1.0)).unwrap();
        for variant in [TaperVariant::Covariance, TaperVariant::CrossCovariance] {
            let g = tapered_gain(&x, &ones, variant, &obs).unwrap();
            assert!(relative_error(&g.estimate.gain, &plain.gain) < 1e-12);
            assert!(!g.indefinite_taper);
        }
    }

    #[test]
    fn sparse_and_dense_routes_agree() {
        let x = anomalies(12, 6, 3);
        let rho = lorenz_taper(12, 2.0).unwrap();
        let sparse_h = Matrix::from_fn(3, 12, |i, j| if j == 4 * i { 1.0 } else { 0.0 });
        let m = tapered_cov_times_ht(&x, &rho.dense_matrix(), &sparse_h);
        let expect = hadamard(&rho.dense_matrix(), &ensemble_cov(&x)).unwrap() * sparse_h.transpose();
        assert!(relative_error(&m, &expect) < 1e-12);
    }

    #[test]
    fn rank_one_block_rows_vanish() {
        let x = anomalies(6, 8, 4);
        let r = Vector::from_vec(vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let taper = TaperSpec::rank_one(r.clone()).unwrap();
        let h = Matrix::from_fn(2, 6, |i, j| if j == i { 1.0 } else { 0.0 });
        let obs = LinearMeasurement::new(h, Matrix::identity(2, 2)).unwrap();
        let g = tapered_gain(&x, &taper, TaperVariant::Covariance, &obs).unwrap().estimate;
        for i in 4..6 {
            for j in 0..2 {
                assert_eq!(g.gain[(i, j)], 0.0);
            }
        }
        let dense = taper.to_dense();
        let gd = tapered_gain(&x, &dense, TaperVariant::Covariance, &obs).unwrap().estimate;
        assert!((&gd.gain - &g.gain).amax() <= 1e-10 * g.gain.amax());
    }

    #[test]
    fn taper_raises_rank() {
        let x = anomalies(20, 6, 5);
        let p = ensemble_cov(&x);
        assert!(numerical_rank(&p, 1e-10) <= 5);
        let tapered = hadamard(&lorenz_taper(20, 3.0).unwrap().dense_matrix(), &p).unwrap();
        assert!(numerical_rank(&tapered, 1e-10) > 5);
    }

    #[test]
    fn cross_covariance_with_identity_h() {
        let x = anomalies(8, 30, 6);
        let obs = identity_obs(8);
        let t = lorenz_taper(8, 2.0).unwrap();
        let g = tapered_gain(&x, &t, TaperVariant::CrossCovariance, &obs).unwrap().estimate;
        let expect_m = hadamard(&t.dense_matrix(), &ensemble_cov(&x)).unwrap();
        assert!(relative_error(&g.cross_cov, &expect_m) < 1e-12);
        assert!(relative_error(&g.innovation_cov, &(ensemble_cov(&x) + obs.r())) < 1e-12);
    }

    #[test]
    fn nonlinear_measurement_rejected() {
        let model = crate::models::ungm_model();
        let x = anomalies(1, 5, 7);
        let t = TaperSpec::rank_one(Vector::from_element(1, 1.0)).unwrap();
        assert!(tapered_gain(&x, &t, TaperVariant::Covariance, &model).is_err());
        let _ = enkf_gain_sample(&x, &x).unwrap();
    }
}
