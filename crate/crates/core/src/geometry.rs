//! Subspace geometry: orthonormal bases, projectors, canonical angles, and
//! the distance identities and perturbation inequalities the rest of the
//! crate is measured with.
//!
//! Distances between d-dimensional subspaces of R^p are taken on the
//! projector scale. For projectors `E` and `F` of equal rank the squared
//! sin-Theta distance has three equivalent forms,
//!
//! ```text
//! ||sin T(E,F)||_F^2 = ||E(I-F)||_F^2 = ||E-F||_F^2 / 2 = ||(I-E)F||_F^2,
//! ```
//!
//! and the orthogonal-Procrustes distance between bases sandwiches the same
//! quantity within a factor of two. Eigendecompositions use a symmetric
//! solver with eigenvalues sorted nonincreasing and a deterministic sign
//! convention (the largest-magnitude entry of each eigenvector is made
//! nonnegative), so repeated runs produce identical bases.

use nalgebra::{DMatrix, linalg::SymmetricEigen};

use crate::error::{Result, SubspaceError};

/// Columns count as orthonormal when `max |V^T V - I|` is below this.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Projector symmetry gate: `max |P - P^T|`.
pub const PROJECTOR_SYMMETRY_TOL: f64 = 1e-12;

/// Projector idempotence gate: `max |P^2 - P|`.
pub const PROJECTOR_IDEMPOTENCE_TOL: f64 = 1e-9;

/// Projector trace gate: `|trace(P) - rank|`.
pub const PROJECTOR_TRACE_TOL: f64 = 1e-9;

/// A basis request is rejected as rank deficient when the smallest singular
/// value of the input is at most this fraction of the largest.
pub const RANK_RATIO_FLOOR: f64 = 1e-10;

/// Rows or entries with magnitude at or below this count as zero in l0
/// norms. Keeps support counts stable under harmless rounding noise.
pub const ZERO_TOL: f64 = 1e-12;

/// An eigengap is degenerate (principal subspace unidentifiable) when
/// `lambda_d - lambda_{d+1} <= GAP_FLOOR * max(lambda_1, 1)`.
pub const GAP_FLOOR: f64 = 1e-10;

/// Slack allowed when testing the optimality premise of
/// [`variational_sin_theta_bound`].
pub const APPLICABILITY_TOL: f64 = 1e-12;

/// Dense matrix with numerically orthonormal columns (a point on the
/// Stiefel manifold V_{p,d}).
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelMatrix {
    data: DMatrix<f64>,
}

impl StiefelMatrix {
    /// Validates orthonormality before wrapping. `data` must be p x d with
    /// 1 <= d <= p and `max |V^T V - I| <= ORTHONORMALITY_TOL`.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let (p, d) = (data.nrows(), data.ncols());
        if d == 0 || d > p {
            return Err(SubspaceError::DimensionMismatch(format!(
                "Stiefel matrix needs 1 <= d <= p, got p={p}, d={d}"
            )));
        }
        check_finite(&data)?;
        let defect = orthonormality_defect(&data);
        if defect > ORTHONORMALITY_TOL {
            return Err(SubspaceError::InvalidParameter(format!(
                "columns are not orthonormal: max |V^T V - I| = {defect:.3e}"
            )));
        }
        Ok(Self { data })
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    /// Projector onto the column span, `P = V V^T`.
    pub fn projector(&self) -> SubspaceProjector {
        let p = &self.data * self.data.transpose();
        SubspaceProjector::new(p, self.ncols())
            .expect("V V^T of an orthonormal V is a valid projector")
    }
}

/// Orthogonal projector onto a `rank`-dimensional subspace of R^p.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceProjector {
    data: DMatrix<f64>,
    rank: usize,
}

impl SubspaceProjector {
    /// Validates symmetry, idempotence, and trace against the tolerances
    /// above before wrapping.
    pub fn new(data: DMatrix<f64>, rank: usize) -> Result<Self> {
        let p = data.nrows();
        if !data.is_square() {
            return Err(SubspaceError::DimensionMismatch(format!(
                "projector must be square, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if rank == 0 || rank > p {
            return Err(SubspaceError::InvalidParameter(format!(
                "projector rank must satisfy 1 <= rank <= p, got rank={rank}, p={p}"
            )));
        }
        check_finite(&data)?;
        let sym = max_abs(&(&data - data.transpose()));
        if sym > PROJECTOR_SYMMETRY_TOL {
            return Err(SubspaceError::InvalidParameter(format!(
                "projector is not symmetric: max |P - P^T| = {sym:.3e}"
            )));
        }
        let idem = max_abs(&(&data * &data - &data));
        if idem > PROJECTOR_IDEMPOTENCE_TOL {
            return Err(SubspaceError::InvalidParameter(format!(
                "projector is not idempotent: max |P^2 - P| = {idem:.3e}"
            )));
        }
        let tr = data.trace();
        if (tr - rank as f64).abs() > PROJECTOR_TRACE_TOL {
            return Err(SubspaceError::InvalidParameter(format!(
                "projector trace {tr} does not match rank {rank}"
            )));
        }
        Ok(Self { data, rank })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// `I - P`, the projector onto the orthogonal complement.
    pub fn complement_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) - &self.data
    }
}

/// Canonical angles between two subspaces, in radians, with sines in
/// nonincreasing order. All angles lie in [0, pi/2].
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSpectrum {
    angles: Vec<f64>,
}

impl AngleSpectrum {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(SubspaceError::InvalidParameter(
                "angle spectrum cannot be empty".into(),
            ));
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        for (i, &a) in angles.iter().enumerate() {
            if !a.is_finite() || !(-1e-12..=half_pi + 1e-12).contains(&a) {
                return Err(SubspaceError::InvalidParameter(format!(
                    "angle {i} = {a} outside [0, pi/2]"
                )));
            }
            if i > 0 && a > angles[i - 1] + 1e-12 {
                return Err(SubspaceError::InvalidParameter(
                    "angles must be nonincreasing".into(),
                ));
            }
        }
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn sines(&self) -> Vec<f64> {
        self.angles.iter().map(|a| a.sin()).collect()
    }

    pub fn cosines(&self) -> Vec<f64> {
        self.angles.iter().map(|a| a.cos()).collect()
    }

    /// Sum of squared sines; equals the squared sin-Theta distance of the
    /// generating pair of subspaces.
    pub fn sin_sq_sum(&self) -> f64 {
        self.angles.iter().map(|a| a.sin().powi(2)).sum()
    }
}

/// Orthonormal basis of the column span of `m` via Householder QR.
///
/// The sign of each basis vector is fixed by requiring a nonnegative
/// diagonal in the triangular factor, which makes the factorization unique
/// for full-rank input: orthonormal input is returned unchanged (up to
/// rounding), and the first d columns of the identity map to themselves
/// exactly.
///
/// Errors with `RankDeficiency` when the smallest singular value of `m` is
/// at most `RANK_RATIO_FLOOR` times the largest.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<StiefelMatrix> {
    let (p, d) = (m.nrows(), m.ncols());
    if d == 0 || d > p {
        return Err(SubspaceError::DimensionMismatch(format!(
            "orthonormalize needs 1 <= d <= p, got p={p}, d={d}"
        )));
    }
    check_finite(m)?;
    let svals = m.clone().singular_values();
    let smax = svals.iter().cloned().fold(0.0_f64, f64::max);
    let smin = svals.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax <= 0.0 || smin <= RANK_RATIO_FLOOR * smax {
        return Err(SubspaceError::RankDeficiency(format!(
            "columns are numerically dependent: sigma_min/sigma_max = {:.3e}",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    StiefelMatrix::new(q)
}

/// Canonical angles between the subspaces of two equal-rank projectors,
/// computed as arcsines of the top `rank` singular values of `E (I - F)`.
pub fn canonical_angles(e: &SubspaceProjector, f: &SubspaceProjector) -> Result<AngleSpectrum> {
    check_same_shape(e, f)?;
    let d = e.rank();
    let m = e.matrix() * f.complement_matrix();
    let mut svals: Vec<f64> = m.singular_values().iter().cloned().collect();
    svals.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    let angles = svals
        .into_iter()
        .take(d)
        .map(|s| s.clamp(0.0, 1.0).asin())
        .collect();
    AngleSpectrum::new(angles)
}

/// Squared sin-Theta distance between two equal-rank projectors, computed
/// as `||E - F||_F^2 / 2` (symmetric in its arguments by construction).
/// The result lies in [0, rank].
pub fn sin_theta_sq(e: &SubspaceProjector, f: &SubspaceProjector) -> Result<f64> {
    check_same_shape(e, f)?;
    let diff = e.matrix() - f.matrix();
    let v = 0.5 * diff.norm_squared();
    Ok(v.clamp(0.0, e.rank() as f64))
}

/// Frobenius orthogonal-Procrustes distance between two orthonormal bases:
/// the minimum of `||V1 - V2 Q||_F` over orthogonal d x d matrices `Q`,
/// equal to `sqrt(2 (d - sum_i s_i))` with `s_i` the singular values of
/// `V2^T V1`.
pub fn procrustes_distance(v1: &StiefelMatrix, v2: &StiefelMatrix) -> Result<f64> {
    if v1.nrows() != v2.nrows() || v1.ncols() != v2.ncols() {
        return Err(SubspaceError::DimensionMismatch(format!(
            "basis shapes differ: {}x{} vs {}x{}",
            v1.nrows(),
            v1.ncols(),
            v2.nrows(),
            v2.ncols()
        )));
    }
    let d = v1.ncols() as f64;
    let m = v2.matrix().transpose() * v1.matrix();
    let s: f64 = m.singular_values().iter().sum();
    Ok((2.0 * (d - s)).max(0.0).sqrt())
}

/// Row-sparsity functional `||U||_{2,q}^q` for q in [0, 2): the lq norm,
/// raised to the q-th power, of the vector of row-wise l2 norms. At q = 0
/// this is the number of rows with l2 norm above [`ZERO_TOL`]. Invariant
/// under right-multiplication by orthogonal matrices.
///
/// Note the asymmetry with [`col_q_norm`]: this returns the q-th power
/// (the scale the row-sparse radius R_q lives on), while the column
/// functional returns the norm itself.
pub fn row_q_norm(u: &DMatrix<f64>, q: f64) -> Result<f64> {
    check_q_range(q)?;
    check_finite(u)?;
    let mut acc = 0.0;
    for i in 0..u.nrows() {
        let norm = u.row(i).norm();
        if q == 0.0 {
            if norm > ZERO_TOL {
                acc += 1.0;
            }
        } else {
            acc += norm.powf(q);
        }
    }
    Ok(acc)
}

/// Column-sparsity functional `||U||_{*,q}` for q in [0, 2): the maximum
/// over columns of the entrywise lq norm (entry count above [`ZERO_TOL`]
/// at q = 0). Callers comparing against a column-sparse radius R_q should
/// raise the q > 0 result to the q-th power.
pub fn col_q_norm(u: &DMatrix<f64>, q: f64) -> Result<f64> {
    check_q_range(q)?;
    check_finite(u)?;
    let mut best = 0.0_f64;
    for j in 0..u.ncols() {
        let col = u.column(j);
        let v = if q == 0.0 {
            col.iter().filter(|x| x.abs() > ZERO_TOL).count() as f64
        } else {
            col.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
        };
        best = best.max(v);
    }
    Ok(best)
}

/// Two sides of the curvature inequality: the squared sin-Theta distance
/// between the top-d eigenprojector `E` of `A` and a candidate projector
/// `F` is at most `<A, E - F> / (lambda_d - lambda_{d+1})`.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureBound {
    /// Squared sin-Theta distance between `E` and `F`.
    pub lhs: f64,
    /// `<A, E - F> / gap`.
    pub rhs: f64,
}

/// Evaluates both sides of the curvature inequality for a symmetric matrix
/// `a` and a rank-d projector `f`. Errors with `DegenerateGap` when the
/// eigengap at position d is numerically zero.
pub fn curvature_gap_bound(
    a: &DMatrix<f64>,
    f: &SubspaceProjector,
    d: usize,
) -> Result<CurvatureBound> {
    let (e, gap) = leading_projector_with_gap(a, d)?;
    if f.dim() != e.dim() || f.rank() != d {
        return Err(SubspaceError::DimensionMismatch(format!(
            "candidate projector must be {}x{} of rank {d}",
            e.dim(),
            e.dim()
        )));
    }
    let lhs = sin_theta_sq(&e, f)?;
    let rhs = a.dot(&(e.matrix() - f.matrix())) / gap;
    Ok(CurvatureBound { lhs, rhs })
}

/// Two sides of the variational perturbation bound, plus the premise flag.
///
/// If `F` beats `E` (the top-d eigenprojector of `A`) on the penalized
/// objective built from `B`, i.e. `<B,E> - g(E) <= <B,F> - g(F)`, then
/// the squared sin-Theta distance is at most
/// `(<B - A, F - E> - (g(F) - g(E))) / gap`. The bound carries no content
/// when `applicable` is false.
#[derive(Debug, Clone, Copy)]
pub struct VariationalBound {
    pub lhs: f64,
    pub rhs: f64,
    /// Whether the optimality premise held within [`APPLICABILITY_TOL`].
    pub applicable: bool,
}

/// Evaluates the variational bound for symmetric `b`, reference symmetric
/// `a`, candidate projector `f`, and penalty values `g_e = g(E)`,
/// `g_f = g(F)`.
pub fn variational_sin_theta_bound(
    b: &DMatrix<f64>,
    a: &DMatrix<f64>,
    f: &SubspaceProjector,
    g_e: f64,
    g_f: f64,
    d: usize,
) -> Result<VariationalBound> {
    if b.shape() != a.shape() {
        return Err(SubspaceError::DimensionMismatch(format!(
            "B is {}x{} but A is {}x{}",
            b.nrows(),
            b.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(b)?;
    if !(g_e.is_finite() && g_f.is_finite()) {
        return Err(SubspaceError::InvalidParameter(
            "penalty values must be finite".into(),
        ));
    }
    let (e, gap) = leading_projector_with_gap(a, d)?;
    if f.dim() != e.dim() || f.rank() != d {
        return Err(SubspaceError::DimensionMismatch(format!(
            "candidate projector must be {}x{} of rank {d}",
            e.dim(),
            e.dim()
        )));
    }
    let obj_e = b.dot(e.matrix()) - g_e;
    let obj_f = b.dot(f.matrix()) - g_f;
    let applicable = obj_e <= obj_f + APPLICABILITY_TOL;
    let diff = f.matrix() - e.matrix();
    let rhs = ((b - a).dot(&diff) - (g_f - g_e)) / gap;
    let lhs = sin_theta_sq(&e, f)?;
    Ok(VariationalBound { lhs, rhs, applicable })
}

/// The three cross terms of the decomposition
/// `<W, F - E> = -t1 + 2 t2 + t3` for symmetric `W` and projectors `E`,
/// `F`: `t1 = <E W E, I - F>`, `t2 = <(I-E) W E, F>`,
/// `t3 = <(I-E) W (I-E), F>`.
#[derive(Debug, Clone, Copy)]
pub struct CrossTerms {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

pub fn cross_decomposition(
    w: &DMatrix<f64>,
    e: &SubspaceProjector,
    f: &SubspaceProjector,
) -> Result<CrossTerms> {
    if !w.is_square() || w.nrows() != e.dim() {
        return Err(SubspaceError::DimensionMismatch(format!(
            "W must be {0}x{0}",
            e.dim()
        )));
    }
    check_same_shape(e, f)?;
    check_finite(w)?;
    let w = symmetrize(w);
    let pe = e.matrix();
    let pe_c = e.complement_matrix();
    let pf = f.matrix();
    let pf_c = f.complement_matrix();
    let we = &w * pe;
    let t1 = (pe * &we).dot(&pf_c);
    let t2 = (&pe_c * &we).dot(pf);
    let t3 = (&pe_c * &w * &pe_c).dot(pf);
    Ok(CrossTerms { t1, t2, t3 })
}

/// Symmetric eigendecomposition with eigenvalues sorted nonincreasing and
/// the deterministic sign convention described in the module docs. The
/// input is symmetrized as `(A + A^T)/2` before factorization.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !a.is_square() {
        return Err(SubspaceError::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a)?;
    let n = a.nrows();
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("symmetric eigenvalues are finite")
    });
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        // Sign convention: first entry of largest magnitude made nonnegative.
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vecs[(i, dst)] = sign * col[i];
        }
    }
    Ok((vals, vecs))
}

/// Orthonormal basis of the span of the d leading eigenvectors of a
/// symmetric matrix. The basis is deterministic but only unique as a
/// subspace when the eigengap at d is positive.
pub fn leading_eigenbasis(a: &DMatrix<f64>, d: usize) -> Result<StiefelMatrix> {
    let n = a.nrows();
    if d == 0 || d > n {
        return Err(SubspaceError::InvalidParameter(format!(
            "leading eigenbasis needs 1 <= d <= {n}, got d={d}"
        )));
    }
    let (_, vecs) = sym_eigen_desc(a)?;
    StiefelMatrix::new(vecs.columns(0, d).into_owned())
}

/// Top-d eigenprojector of `a` together with the eigengap
/// `lambda_d - lambda_{d+1}`, rejecting degenerate gaps.
pub fn leading_projector_with_gap(
    a: &DMatrix<f64>,
    d: usize,
) -> Result<(SubspaceProjector, f64)> {
    let n = a.nrows();
    if d == 0 || d >= n {
        return Err(SubspaceError::InvalidParameter(format!(
            "gap at position d needs 1 <= d < {n}, got d={d}"
        )));
    }
    let (vals, vecs) = sym_eigen_desc(a)?;
    let gap = checked_gap(&vals, d)?;
    let basis = StiefelMatrix::new(vecs.columns(0, d).into_owned())?;
    Ok((basis.projector(), gap))
}

/// Eigengap `vals[d-1] - vals[d]` of a nonincreasing spectrum, rejecting
/// gaps at or below `GAP_FLOOR * max(lambda_1, 1)`.
pub(crate) fn checked_gap(vals: &[f64], d: usize) -> Result<f64> {
    let gap = vals[d - 1] - vals[d];
    let floor = GAP_FLOOR * vals[0].abs().max(1.0);
    if gap <= floor {
        return Err(SubspaceError::DegenerateGap(format!(
            "lambda_{d} - lambda_{} = {gap:.3e} is below the identifiability floor {floor:.3e}",
            d + 1
        )));
    }
    Ok(gap)
}

pub(crate) fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub(crate) fn orthonormality_defect(v: &DMatrix<f64>) -> f64 {
    let d = v.ncols();
    let gram = v.transpose() * v;
    max_abs(&(gram - DMatrix::identity(d, d)))
}

pub(crate) fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(SubspaceError::InvalidParameter(
            "matrix contains non-finite entries".into(),
        ));
    }
    Ok(())
}

fn check_q_range(q: f64) -> Result<()> {
    if !q.is_finite() || !(0.0..2.0).contains(&q) {
        return Err(SubspaceError::InvalidParameter(format!(
            "sparsity exponent q must lie in [0, 2), got {q}"
        )));
    }
    Ok(())
}

fn check_same_shape(e: &SubspaceProjector, f: &SubspaceProjector) -> Result<()> {
    if e.dim() != f.dim() {
        return Err(SubspaceError::DimensionMismatch(format!(
            "projectors act on different spaces: p = {} vs {}",
            e.dim(),
            f.dim()
        )));
    }
    if e.rank() != f.rank() {
        return Err(SubspaceError::DimensionMismatch(format!(
            "projector ranks differ: {} vs {}",
            e.rank(),
            f.rank()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{haar_pair, random_psd_with_gap, random_symmetric, rng, unit_canonical};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn span_of_canonicals(p: usize, idx: &[usize]) -> StiefelMatrix {
        let mut m = DMatrix::zeros(p, idx.len());
        for (j, &i) in idx.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        StiefelMatrix::new(m).unwrap()
    }

    #[test]
    fn identical_spans_have_zero_angles() {
        let v = span_of_canonicals(5, &[0, 1]);
        let e = v.projector();
        let ang = canonical_angles(&e, &e).unwrap();
        assert!(ang.angles().iter().all(|a| a.abs() < 1e-12));
        assert!(sin_theta_sq(&e, &e).unwrap() < 1e-15);
    }

    #[test]
    fn orthogonal_spans_have_right_angles() {
        let e = span_of_canonicals(4, &[0]).projector();
        let f = span_of_canonicals(4, &[1]).projector();
        let ang = canonical_angles(&e, &f).unwrap();
        assert_abs_diff_eq!(ang.angles()[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(sin_theta_sq(&e, &f).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn planar_rotation_recovers_the_angle() {
        let t = 0.3_f64;
        let v1 = span_of_canonicals(2, &[0]);
        let v2 = StiefelMatrix::new(DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()])).unwrap();
        let ang = canonical_angles(&v1.projector(), &v2.projector()).unwrap();
        assert_abs_diff_eq!(ang.angles()[0], t, epsilon = 1e-12);
        assert_abs_diff_eq!(
            sin_theta_sq(&v1.projector(), &v2.projector()).unwrap(),
            t.sin().powi(2),
            epsilon = 1e-12
        );
    }

    // The three forms of the squared distance, each computed from raw
    // matrix algebra, must agree with the library value.
    #[test]
    fn squared_distance_forms_agree() {
        let mut r = rng(71_001);
        for _ in 0..60 {
            let p = r.random_range(2..=20);
            let d = r.random_range(1..=p.min(4));
            let (v1, v2) = haar_pair(p, d, &mut r);
            let e = v1.projector();
            let f = v2.projector();
            let got = sin_theta_sq(&e, &f).unwrap();
            let ef_c = (e.matrix() * f.complement_matrix()).norm_squared();
            let e_c_f = (e.complement_matrix() * f.matrix()).norm_squared();
            let half_diff = 0.5 * (e.matrix() - f.matrix()).norm_squared();
            assert_abs_diff_eq!(got, ef_c, epsilon = 1e-9);
            assert_abs_diff_eq!(got, e_c_f, epsilon = 1e-9);
            assert_abs_diff_eq!(got, half_diff, epsilon = 1e-9);
            let by_angles = canonical_angles(&e, &f).unwrap().sin_sq_sum();
            assert_abs_diff_eq!(got, by_angles, epsilon = 1e-9);
            assert!((0.0..=d as f64 + 1e-12).contains(&got));
        }
    }

    #[test]
    fn procrustes_vanishes_on_rotated_bases() {
        let mut r = rng(71_002);
        for _ in 0..20 {
            let p = r.random_range(2..=15);
            let d = r.random_range(1..=p.min(4));
            let (v1, _) = haar_pair(p, d, &mut r);
            let (q, _) = haar_pair(d, d, &mut r);
            let v2 = StiefelMatrix::new(v1.matrix() * q.matrix()).unwrap();
            assert!(procrustes_distance(&v1, &v2).unwrap() < 1e-7);
        }
    }

    #[test]
    fn procrustes_sandwiches_the_subspace_distance() {
        let mut r = rng(71_003);
        for _ in 0..40 {
            let p = r.random_range(2..=30);
            let d = r.random_range(1..=p.min(4));
            let (v1, v2) = haar_pair(p, d, &mut r);
            let s2 = sin_theta_sq(&v1.projector(), &v2.projector()).unwrap();
            let dist = procrustes_distance(&v1, &v2).unwrap();
            assert!(0.5 * dist * dist <= s2 + 1e-9);
            assert!(s2 <= dist * dist + 1e-9);
        }
    }

    #[test]
    fn orthonormalize_fixes_identity_columns() {
        let m = span_of_canonicals(6, &[0, 1, 2]).into_inner();
        let q = orthonormalize(&m).unwrap();
        assert_eq!(q.matrix(), &m);
    }

    #[test]
    fn orthonormalize_preserves_orthonormal_spans() {
        let mut r = rng(71_004);
        for _ in 0..20 {
            let p = r.random_range(2..=20);
            let d = r.random_range(1..=p.min(5));
            let (v, _) = haar_pair(p, d, &mut r);
            let q = orthonormalize(v.matrix()).unwrap();
            let s2 = sin_theta_sq(&v.projector(), &q.projector()).unwrap();
            assert!(s2 < 1e-18, "span moved by {s2}");
        }
    }

    #[test]
    fn orthonormalize_rejects_dependent_columns() {
        let mut m = DMatrix::zeros(4, 2);
        m[(0, 0)] = 1.0;
        m[(0, 1)] = 1.0 + 1e-14;
        let err = orthonormalize(&m).unwrap_err();
        assert!(matches!(err, SubspaceError::RankDeficiency(_)));
    }

    #[test]
    fn row_norms_match_hand_computations() {
        // Rows (3,4)/5 and (0,0): one nonzero row of l2 norm 1.
        let u = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, 0.0, 0.0]);
        assert_abs_diff_eq!(row_q_norm(&u, 0.0).unwrap(), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(row_q_norm(&u, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(row_q_norm(&u, 0.5).unwrap(), 1.0, epsilon = 1e-15);

        let v = span_of_canonicals(5, &[0, 1]);
        assert_abs_diff_eq!(row_q_norm(v.matrix(), 0.0).unwrap(), 2.0, epsilon = 0.0);
        assert_abs_diff_eq!(row_q_norm(v.matrix(), 1.0).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn column_norms_match_hand_computations() {
        let v = span_of_canonicals(5, &[0, 1]);
        assert_abs_diff_eq!(col_q_norm(v.matrix(), 0.0).unwrap(), 1.0, epsilon = 0.0);
        let u = DMatrix::from_row_slice(2, 1, &[0.6, 0.8]);
        assert_abs_diff_eq!(col_q_norm(&u, 1.0).unwrap(), 1.4, epsilon = 1e-15);
        assert_abs_diff_eq!(col_q_norm(&u, 0.5).unwrap(), (0.6_f64.sqrt() + 0.8_f64.sqrt()).powi(2), epsilon = 1e-12);
    }

    #[test]
    fn row_q_norm_is_rotation_invariant() {
        let mut r = rng(71_005);
        for _ in 0..30 {
            let p = r.random_range(2..=15);
            let d = r.random_range(1..=p.min(4));
            let (v, _) = haar_pair(p, d, &mut r);
            let (q, _) = haar_pair(d, d, &mut r);
            let rotated = v.matrix() * q.matrix();
            for qexp in [0.0, 0.5, 1.0, 1.5] {
                let a = row_q_norm(v.matrix(), qexp).unwrap();
                let b = row_q_norm(&rotated, qexp).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    // ||J||_{2,q}^q <= d^{q/2} ||J||_{2,0}^{1-q/2} on orthonormal frames.
    #[test]
    fn row_q_norm_respects_l0_relation() {
        let mut r = rng(71_006);
        for _ in 0..50 {
            let p = r.random_range(2..=20);
            let d = r.random_range(1..=p.min(4));
            let (v, _) = haar_pair(p, d, &mut r);
            let l0 = row_q_norm(v.matrix(), 0.0).unwrap();
            for qexp in [0.25, 0.5, 1.0] {
                let lq = row_q_norm(v.matrix(), qexp).unwrap();
                let bound = (d as f64).powf(qexp / 2.0) * l0.powf(1.0 - qexp / 2.0);
                assert!(lq <= bound + 1e-9, "lq={lq} bound={bound}");
            }
        }
    }

    #[test]
    fn q_out_of_range_is_rejected() {
        let u = DMatrix::identity(3, 2);
        assert!(matches!(
            row_q_norm(&u, 2.0),
            Err(SubspaceError::InvalidParameter(_))
        ));
        assert!(matches!(
            col_q_norm(&u, -0.1),
            Err(SubspaceError::InvalidParameter(_))
        ));
    }

    // For A = diag(2,1) and F spanned by (cos t, sin t), both sides equal
    // sin^2 t exactly.
    #[test]
    fn curvature_bound_is_tight_in_two_dimensions() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0]));
        let t = 0.5_f64;
        let f = StiefelMatrix::new(DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]))
            .unwrap()
            .projector();
        let b = curvature_gap_bound(&a, &f, 1).unwrap();
        assert_abs_diff_eq!(b.lhs, t.sin().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(b.rhs, t.sin().powi(2), epsilon = 1e-12);
    }

    #[test]
    fn curvature_bound_holds_on_random_instances() {
        let mut r = rng(71_007);
        for _ in 0..100 {
            let p = r.random_range(2..=20);
            let d = r.random_range(1..=(p - 1).min(4));
            let a = random_psd_with_gap(p, d, 0.05, &mut r);
            let (f, _) = haar_pair(p, d, &mut r);
            let b = curvature_gap_bound(&a, &f.projector(), d).unwrap();
            assert!(b.lhs <= b.rhs + 1e-9, "lhs={} rhs={}", b.lhs, b.rhs);
        }
    }

    #[test]
    fn degenerate_gap_is_rejected() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0, 1.0]));
        let f = unit_canonical(3, 0).projector();
        assert!(matches!(
            curvature_gap_bound(&a, &f, 1),
            Err(SubspaceError::DegenerateGap(_))
        ));
    }

    #[test]
    fn variational_bound_is_zero_at_the_optimum() {
        let a = random_psd_with_gap(6, 2, 0.2, &mut rng(71_008));
        let e = leading_eigenbasis(&a, 2).unwrap().projector();
        let v = variational_sin_theta_bound(&a, &a, &e, 0.0, 0.0, 2).unwrap();
        assert!(v.applicable);
        assert!(v.lhs.abs() < 1e-12);
        assert!(v.rhs.abs() < 1e-9);
    }

    // With B = A + W and F the top-d projector of B, the premise holds by
    // optimality and the bound implies the Frobenius Davis-Kahan estimate.
    #[test]
    fn variational_bound_covers_eigen_perturbations() {
        let mut r = rng(71_009);
        for _ in 0..30 {
            let p = r.random_range(3..=15);
            let d = r.random_range(1..=(p - 1).min(3));
            let a = random_psd_with_gap(p, d, 0.1, &mut r);
            let mut w = random_symmetric(p, &mut r);
            w *= 0.05;
            let b = &a + &w;
            let f = leading_eigenbasis(&b, d).unwrap().projector();
            let v = variational_sin_theta_bound(&b, &a, &f, 0.0, 0.0, d).unwrap();
            assert!(v.applicable);
            assert!(v.lhs <= v.rhs + 1e-9);
        }
    }

    #[test]
    fn cross_terms_vanish_when_spans_agree() {
        let mut r = rng(71_010);
        let (v, _) = haar_pair(7, 2, &mut r);
        let e = v.projector();
        let w = random_symmetric(7, &mut r);
        let ct = cross_decomposition(&w, &e, &e).unwrap();
        assert!(ct.t1.abs() < 1e-10);
        assert!(ct.t2.abs() < 1e-10);
        assert!(ct.t3.abs() < 1e-10);
    }

    #[test]
    fn cross_terms_reassemble_the_inner_product() {
        let mut r = rng(71_011);
        for _ in 0..30 {
            let p = r.random_range(2..=15);
            let d = r.random_range(1..=p.min(4));
            let (v1, v2) = haar_pair(p, d, &mut r);
            let e = v1.projector();
            let f = v2.projector();
            let w = random_symmetric(p, &mut r);
            let ct = cross_decomposition(&w, &e, &f).unwrap();
            let direct = w.dot(&(f.matrix() - e.matrix()));
            assert_abs_diff_eq!(direct, -ct.t1 + 2.0 * ct.t2 + ct.t3, epsilon = 1e-9);
        }
    }

    #[test]
    fn eigen_solver_is_deterministic_and_sorted() {
        let mut r = rng(71_012);
        let a = random_symmetric(8, &mut r);
        let (vals1, vecs1) = sym_eigen_desc(&a).unwrap();
        let (vals2, vecs2) = sym_eigen_desc(&a).unwrap();
        assert_eq!(vals1, vals2);
        assert_eq!(vecs1, vecs2);
        for w in vals1.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // Reconstruction sanity.
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals1));
        let recon = &vecs1 * lam * vecs1.transpose();
        assert!(max_abs(&(recon - symmetrize(&a))) < 1e-9);
    }

    #[test]
    fn angle_spectrum_rejects_increasing_angles() {
        assert!(AngleSpectrum::new(vec![0.1, 0.2]).is_err());
        assert!(AngleSpectrum::new(vec![0.2, 0.1]).is_ok());
    }

    #[test]
    fn projector_validation_catches_non_idempotent_input() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        assert!(matches!(
            SubspaceProjector::new(m, 1),
            Err(SubspaceError::InvalidParameter(_))
        ));
    }
}
