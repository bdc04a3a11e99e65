//! Seeded random fixtures shared by the unit tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{orthonormalize, symmetrize, StiefelMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(p: usize, d: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(p, d, |_, _| r.sample(StandardNormal))
}

/// Two independent Haar-distributed orthonormal p x d frames.
pub fn haar_pair(p: usize, d: usize, r: &mut ChaCha8Rng) -> (StiefelMatrix, StiefelMatrix) {
    let a = orthonormalize(&gaussian_matrix(p, d, r)).expect("gaussian frame has full rank");
    let b = orthonormalize(&gaussian_matrix(p, d, r)).expect("gaussian frame has full rank");
    (a, b)
}

pub fn random_symmetric(p: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    symmetrize(&gaussian_matrix(p, p, r))
}

/// Random PSD matrix whose eigengap at position d is at least
/// `relgap * lambda_1`.
pub fn random_psd_with_gap(p: usize, d: usize, relgap: f64, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    assert!(d < p);
    let (basis, _) = haar_pair(p, p, r);
    let scale: f64 = r.random_range(0.5..3.0);
    let mut spectrum = Vec::with_capacity(p);
    let shoulder = 0.7;
    for _ in 0..d {
        spectrum.push(r.random_range(shoulder..1.0));
    }
    let ceiling = (shoulder - relgap).max(0.0);
    for _ in d..p {
        spectrum.push(r.random_range(0.0..ceiling.max(1e-6)));
    }
    spectrum.sort_by(|a, b| b.partial_cmp(a).unwrap());
    spectrum[0] = 1.0;
    let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        spectrum.iter().map(|v| v * scale).collect(),
    ));
    basis.matrix() * lam * basis.matrix().transpose()
}

pub fn unit_canonical(p: usize, i: usize) -> StiefelMatrix {
    let mut m = DMatrix::zeros(p, 1);
    m[(i, 0)] = 1.0;
    StiefelMatrix::new(m).unwrap()
}
