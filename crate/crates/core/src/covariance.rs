//! Covariance models with a designated principal subspace, Gaussian
//! sampling, and sample covariance.
//!
//! A model is stored spectrally: an orthogonal basis of R^p plus a
//! nonincreasing spectrum, with a strictly positive eigengap after the
//! designated dimension d so the principal subspace is identifiable. The
//! spiked construction `Sigma = (1+b) A A^T + (I - A A^T)` is the workhorse:
//! its effective noise level is `sigma^2 = (1+b)/b^2`, which calibrates
//! signal strength in the simulation harness.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SubspaceError};
use crate::geometry::{
    check_finite, checked_gap, orthonormality_defect, symmetrize, StiefelMatrix,
    ORTHONORMALITY_TOL,
};

/// Population covariance in spectral form with a designated principal
/// dimension.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    spectrum: Vec<f64>,
    basis: DMatrix<f64>,
    d: usize,
}

impl CovarianceModel {
    /// Validates shape, orthogonality of `basis`, monotone nonnegative
    /// `spectrum`, and a strictly positive eigengap at position `d`.
    pub fn new(spectrum: Vec<f64>, basis: DMatrix<f64>, d: usize) -> Result<Self> {
        let p = basis.nrows();
        if !basis.is_square() {
            return Err(SubspaceError::DimensionMismatch(format!(
                "basis must be square, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        if spectrum.len() != p {
            return Err(SubspaceError::DimensionMismatch(format!(
                "spectrum has {} entries for a {p}-dimensional basis",
                spectrum.len()
            )));
        }
        if d == 0 || d >= p {
            return Err(SubspaceError::InvalidParameter(format!(
                "designated dimension needs 1 <= d < p, got d={d}, p={p}"
            )));
        }
        check_finite(&basis)?;
        let defect = orthonormality_defect(&basis);
        if defect > ORTHONORMALITY_TOL {
            return Err(SubspaceError::InvalidParameter(format!(
                "basis is not orthogonal: max |B^T B - I| = {defect:.3e}"
            )));
        }
        for (i, &v) in spectrum.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(SubspaceError::InvalidParameter(format!(
                    "eigenvalue {i} = {v} must be a nonnegative real"
                )));
            }
            if i > 0 && v > spectrum[i - 1] {
                return Err(SubspaceError::InvalidParameter(
                    "spectrum must be nonincreasing".into(),
                ));
            }
        }
        if spectrum[d - 1] - spectrum[d] <= 0.0 {
            return Err(SubspaceError::DegenerateGap(format!(
                "lambda_{d} - lambda_{} must be positive at construction",
                d + 1
            )));
        }
        Ok(Self { spectrum, basis, d })
    }

    pub fn p(&self) -> usize {
        self.basis.nrows()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthonormal basis of the principal subspace (first d basis columns).
    pub fn principal_basis(&self) -> StiefelMatrix {
        StiefelMatrix::new(self.basis.columns(0, self.d).into_owned())
            .expect("columns of an orthogonal basis are orthonormal")
    }

    /// Dense `Sigma = B diag(spectrum) B^T`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.spectrum.clone()));
        symmetrize(&(&self.basis * lam * self.basis.transpose()))
    }

    /// Symmetric square root `B diag(sqrt(spectrum)) B^T`, taken spectrally
    /// from the model's own factorization.
    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            self.spectrum.iter().map(|v| v.sqrt()).collect(),
        ));
        symmetrize(&(&self.basis * lam * self.basis.transpose()))
    }

    /// Effective noise level of this model's spectrum at its designated d.
    pub fn effective_noise_variance(&self) -> Result<f64> {
        effective_noise_variance(&self.spectrum, self.d)
    }
}

/// n x p matrix of observations (rows) plus the seed that generated it.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    data: DMatrix<f64>,
    seed: u64,
}

impl DataMatrix {
    pub fn new(data: DMatrix<f64>, seed: u64) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(SubspaceError::InvalidParameter(
                "data matrix must be nonempty".into(),
            ));
        }
        check_finite(&data)?;
        Ok(Self { data, seed })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Name of the generator family that produced this sample.
    pub fn rng_algorithm(&self) -> &'static str {
        crate::RNG_ALGORITHM
    }
}

/// `lambda_1 * lambda_{d+1} / (lambda_d - lambda_{d+1})^2` for a
/// nonincreasing, nonnegative spectrum. Zero when the tail vanishes;
/// `DegenerateGap` when the gap is numerically zero.
pub fn effective_noise_variance(spectrum: &[f64], d: usize) -> Result<f64> {
    if d == 0 || d >= spectrum.len() {
        return Err(SubspaceError::InvalidParameter(format!(
            "effective noise needs 1 <= d < {}, got d={d}",
            spectrum.len()
        )));
    }
    for (i, &v) in spectrum.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(SubspaceError::InvalidParameter(format!(
                "eigenvalue {i} = {v} must be a nonnegative real"
            )));
        }
        if i > 0 && v > spectrum[i - 1] {
            return Err(SubspaceError::InvalidParameter(
                "spectrum must be nonincreasing".into(),
            ));
        }
    }
    let gap = checked_gap(spectrum, d)?;
    Ok(spectrum[0] * spectrum[d] / (gap * gap))
}

/// Spiked model `Sigma = (1+b) A A^T + (I - A A^T)` for b > 0: eigenvalue
/// `1+b` with multiplicity d on the span of `A`, eigenvalue 1 on its
/// complement. The stored basis completes `A`'s span to an orthogonal
/// basis of R^p.
pub fn spiked_covariance(a: &StiefelMatrix, b: f64) -> Result<CovarianceModel> {
    if !(b.is_finite() && b > 0.0) {
        return Err(SubspaceError::InvalidParameter(format!(
            "spike strength must be positive, got {b}"
        )));
    }
    let (p, d) = (a.nrows(), a.ncols());
    if d >= p {
        return Err(SubspaceError::InvalidParameter(format!(
            "spiked model needs d < p, got p={p}, d={d}"
        )));
    }
    // Householder QR of [A | I] yields a full orthogonal basis whose first
    // d columns span col(A).
    let mut ext = DMatrix::zeros(p, d + p);
    ext.columns_mut(0, d).copy_from(a.matrix());
    for i in 0..p {
        ext[(i, d + i)] = 1.0;
    }
    let q = ext.qr().q().columns(0, p).into_owned();
    let mut spectrum = vec![1.0 + b; d];
    spectrum.extend(std::iter::repeat_n(1.0, p - d));
    CovarianceModel::new(spectrum, q, d)
}

/// `sigma^2 = (1+b)/b^2`, the effective noise level of any spiked model
/// with strength b.
pub fn spiked_noise_variance(b: f64) -> f64 {
    (1.0 + b) / (b * b)
}

/// Spike strength whose effective noise level equals `sigma_sq`: the
/// positive root of `(1+b)/b^2 = sigma_sq`.
pub fn spike_for_noise_variance(sigma_sq: f64) -> Result<f64> {
    if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
        return Err(SubspaceError::InvalidParameter(format!(
            "noise variance must be positive, got {sigma_sq}"
        )));
    }
    Ok((1.0 + (1.0 + 4.0 * sigma_sq).sqrt()) / (2.0 * sigma_sq))
}

/// Draws n i.i.d. rows from N(0, Sigma) as `Z Sigma^{1/2}` with Z standard
/// normal, deterministically from `seed`.
pub fn sample_gaussian(model: &CovarianceModel, n: usize, seed: u64) -> Result<DataMatrix> {
    if n == 0 {
        return Err(SubspaceError::InvalidParameter(
            "sample size must be positive".into(),
        ));
    }
    let p = model.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = z * model.sqrt_matrix();
    DataMatrix::new(x, seed)
}

/// Mean-centered sample covariance with divisor n:
/// `S = (1/n) sum_i (x_i - xbar)(x_i - xbar)^T`. Needs n >= 2.
pub fn sample_covariance(x: &DataMatrix) -> Result<DMatrix<f64>> {
    let (n, p) = (x.n(), x.p());
    if n < 2 {
        return Err(SubspaceError::InsufficientData(format!(
            "sample covariance needs n >= 2 observations, got {n}"
        )));
    }
    let data = x.matrix();
    let mut centered = data.clone();
    for j in 0..p {
        let mean = data.column(j).sum() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    let s = centered.transpose() * centered / n as f64;
    Ok(symmetrize(&s))
}
