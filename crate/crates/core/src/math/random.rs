use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::linalg::{symmetrize, Matrix, Vector};
use crate::error::{Error, Result};

/// Reproducible random stream addressed by `(seed, stream)`.
///
/// Backed by ChaCha20 with the stream id mapped onto the cipher's stream
/// counter, so distinct ids never overlap and draws do not depend on the
/// host or on how work is scheduled across threads.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// An independent stream sharing this stream id, keyed by `label`.
    ///
    /// Derivation depends only on `(seed, stream, label)`, never on how
    /// many values were drawn from `self`.
    pub fn substream(&self, label: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(label.wrapping_add(1))), self.stream)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// `rows x cols` i.i.d. standard normal draws, filled column by column.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.standard_normal()).collect();
        Matrix::from_vec(rows, cols, data)
    }

    /// A uniformly random permutation of `0..n` (Fisher-Yates).
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.rng.random_range(0..=i);
            p.swap(i, j);
        }
        p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `count` draws from `N(mean, B B^T)` as the columns of an `n x count` matrix.
///
/// `factor` may be any square root of the covariance, including a singular
/// one; a zero factor returns `count` copies of `mean`.
pub fn sample_mvn(mean: &Vector, factor: &Matrix, rng: &mut RngStream, count: usize) -> Result<Matrix> {
    let n = mean.len();
    if factor.nrows() != n {
        return Err(Error::dims("sample_mvn factor rows", n, factor.nrows()));
    }
    let z = rng.normal_matrix(factor.ncols(), count);
    let mut out = factor * z;
    for mut col in out.column_iter_mut() {
        col += mean;
    }
    Ok(out)
}

/// Wishart draw with identity scale: `G G^T` with `G` an `dim x dof` standard
/// normal matrix.
pub fn sample_wishart(dim: usize, dof: usize, rng: &mut RngStream) -> Result<Matrix> {
    if dim == 0 || dof < dim {
        return Err(Error::InvalidParameter(format!(
            "wishart requires dof >= dim >= 1 (dim {dim}, dof {dof})"
        )));
    }
    let g = rng.normal_matrix(dim, dof);
    Ok(symmetrize(&(&g * g.transpose())))
}
