//! Linear algebra and sampling primitives shared by every filter.

mod linalg;
mod random;

pub use linalg::{
    cholesky, frobenius, hadamard, max_off_diagonal, numerical_rank, psd_factor, qr_triangular_sqrt,
    relative_error, solve_spd, sym_psd_sqrt, symmetrize, Matrix, SpdFactor, Vector,
};
pub(crate) use linalg::require_square;
pub use random::{sample_mvn, sample_wishart, RngStream};
