//! Dense factorizations and solves on small covariance-sized matrices.
//!
//! Every routine reports degenerate input as an error instead of adding
//! jitter; callers interpret a failed factorization as a statement about
//! the covariance they passed in.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_CLAMP_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `L * L^T = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    lower: Matrix,
}

impl SpdFactor {
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn into_inner(self) -> Matrix {
        self.lower
    }

    /// `L * L^T`.
    pub fn reconstruct(&self) -> Matrix {
        symmetrize(&(&self.lower * self.lower.transpose()))
    }

    /// Solves `A X = B` by forward and backward substitution.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        if b.nrows() != self.dim() {
            return Err(Error::dims("spd solve", self.dim(), b.nrows()));
        }
        let y = self
            .lower
            .solve_lower_triangular(b)
            .ok_or(Error::NotPositiveDefinite { pivot: 0, value: 0.0 })?;
        self.lower
            .tr_solve_lower_triangular(&y)
            .ok_or(Error::NotPositiveDefinite { pivot: 0, value: 0.0 })
    }
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.norm()
}

/// `||a - b||_F / max(||b||_F, tiny)`.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let scale = frobenius(b).max(f64::MIN_POSITIVE);
    frobenius(&(a - b)) / scale
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

pub(crate) fn require_square(a: &Matrix, context: &'static str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::dims(
            context,
            "non-empty square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    Ok(())
}

fn require_symmetric(a: &Matrix) -> Result<()> {
    let scale = frobenius(a);
    if scale == 0.0 {
        return Ok(());
    }
    let asymmetry = frobenius(&(a - a.transpose())) / scale;
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Only the lower triangle is read once symmetry has been verified.
pub fn cholesky(a: &Matrix) -> Result<SpdFactor> {
    require_square(a, "cholesky")?;
    require_symmetric(a)?;
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(SpdFactor { lower: l })
}

/// Solves `A X = B` for SPD `A` without forming an inverse.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::dims("solve_spd", a.nrows(), b.nrows()));
    }
    cholesky(a)?.solve(b)
}

/// Symmetric square root `B` with `B * B = A` via eigendecomposition.
///
/// Eigenvalues in `[-1e-10 ||A||, 0)` are clamped to zero.
pub fn sym_psd_sqrt(a: &Matrix) -> Result<Matrix> {
    require_square(a, "sym_psd_sqrt")?;
    let scale = frobenius(a);
    if scale == 0.0 {
        return Ok(Matrix::zeros(a.nrows(), a.ncols()));
    }
    let eig = symmetrize(a).symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.min();
    if min_eigenvalue < -PSD_CLAMP_TOL * scale {
        return Err(Error::IndefiniteMatrix { min_eigenvalue });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let scaled = v * Matrix::from_diagonal(&roots);
    Ok(symmetrize(&(scaled * v.transpose())))
}

/// Any factor `B` with `B * B^T = A` for a PSD `A`.
///
/// Tries Cholesky first and falls back to the symmetric root, so singular
/// noise covariances (e.g. `Q = 0`) are accepted.
pub fn psd_factor(a: &Matrix) -> Result<Matrix> {
    match cholesky(a) {
        Ok(f) => Ok(f.into_inner()),
        Err(Error::NotPositiveDefinite { .. }) => sym_psd_sqrt(a),
        Err(e) => Err(e),
    }
}

/// Lower-triangular `T` (nonnegative diagonal) with `T T^T = W W^T`, from
/// a QR decomposition of `W^T`.
pub fn qr_triangular_sqrt(w: &Matrix) -> Result<Matrix> {
    let (m, p) = w.shape();
    if m == 0 || p < m {
        return Err(Error::dims("qr_triangular_sqrt", format!("m x p with p >= m = {m}"), format!("{m}x{p}")));
    }
    let r = w.transpose().qr().r();
    let mut t = r.transpose();
    for i in 0..m {
        if t[(i, i)] < 0.0 {
            let mut col = t.column_mut(i);
            col.neg_mut();
        }
    }
    let threshold = RANK_TOL * frobenius(w);
    for i in 0..m {
        if t[(i, i)] <= threshold {
            return Err(Error::RankDeficient { index: i, value: t[(i, i)] });
        }
    }
    Ok(t)
}

pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        return Err(Error::dims(
            "hadamard",
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(a.component_mul(b))
}

/// Largest absolute off-diagonal entry with its position, if any.
pub fn max_off_diagonal(a: &Matrix) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j && best.is_none_or(|(_, _, v)| a[(i, j)].abs() > v.abs()) {
                best = Some((i, j, a[(i, j)]));
            }
        }
    }
    best
}

/// Numerical rank: count of singular values above `tol * sigma_max`.
pub fn numerical_rank(a: &Matrix, tol: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}
