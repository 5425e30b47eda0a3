//! Seeded random instances shared by the solvers, the sweeps and the CLI.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::spectral::DenseMatrix;

pub type GeoRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> GeoRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(m, m, |_, _| gaussian(rng))
}

pub fn gaussian_vector<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(k, |_, _| gaussian(rng))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the sign
/// of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DenseMatrix {
    let qr = gaussian_matrix(m, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `G^T G` for a Gaussian `rank x m` factor `G`.
pub fn random_psd<R: Rng + ?Sized>(m: usize, rank: usize, rng: &mut R) -> DenseMatrix {
    let g = DenseMatrix::from_fn(rank, m, |_, _| gaussian(rng));
    let s = g.transpose() * g;
    (&s + s.transpose()) * 0.5
}
