//! Building blocks for information-theoretic lower bounds: packing sets on
//! sparse vectors and subspaces, a local embedding that maps a packing of
//! small frames into well-separated p x d frames, the exact KL divergence
//! between spiked Gaussians, and Fano-style risk bounds.
//!
//! The packing constructors are randomized greedy searches. Cardinality is
//! whatever the search achieves and is reported as such; the metric and
//! sparsity properties, by contrast, are re-verified on every returned set
//! ([`PackingSet::certify`]), so a constructed set always carries checked
//! guarantees rather than existential ones.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Result, SubspaceError};
use crate::geometry::{orthonormalize, row_q_norm, col_q_norm, sin_theta_sq, StiefelMatrix};

/// Rate constant in the hypercube packing's cardinality target
/// `max{c * s * (1 + log(m/s)), log m}`.
pub const HYPERCUBE_RATE_CONSTANT: f64 = 1.0 / 30.0;

/// Internal cap on greedy enumeration work inside code constructors.
const ENUMERATION_CAP: usize = 2_000_000;

/// Cap on the number of kept codewords/points, to bound the quadratic
/// pairwise verification. Cardinality beyond this adds nothing to the
/// bounds the sets feed.
const KEPT_CAP: usize = 4096;

/// Distance used to certify a packing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackingMetric {
    /// Frobenius distance between the frames themselves.
    Euclidean,
    /// Frobenius norm of the sines of the canonical angles between spans.
    SinThetaF,
}

/// Per-point sparsity guarantee carried by a packing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsityBound {
    /// Number of nonzero rows of each point is at most the bound.
    RowL0(f64),
    /// Max per-column nonzero count of each point is at most the bound.
    ColumnL0(f64),
}

/// A finite set of equal-shape frames with a certified pairwise minimum
/// distance. Construction re-verifies every pairwise distance and every
/// sparsity claim; a violation is an error, never a silent downgrade.
#[derive(Debug, Clone)]
pub struct PackingSet {
    points: Vec<StiefelMatrix>,
    min_distance: f64,
    metric: PackingMetric,
    sparsity: Option<SparsityBound>,
}

impl PackingSet {
    /// Certifies `points` as a packing: all pairwise distances must reach
    /// `claimed_min - 1e-9`, and every point must satisfy `sparsity` when
    /// one is declared. The stored `min_distance` is the realized minimum
    /// (infinite for fewer than two points).
    pub fn certify(
        points: Vec<StiefelMatrix>,
        metric: PackingMetric,
        claimed_min: f64,
        sparsity: Option<SparsityBound>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(SubspaceError::InvalidParameter(
                "a packing needs at least one point".into(),
            ));
        }
        let (rows, cols) = (points[0].nrows(), points[0].ncols());
        if points.iter().any(|u| u.nrows() != rows || u.ncols() != cols) {
            return Err(SubspaceError::DimensionMismatch(
                "packing points must share one shape".into(),
            ));
        }
        if let Some(bound) = sparsity {
            for (i, u) in points.iter().enumerate() {
                let (value, limit, what) = match bound {
                    SparsityBound::RowL0(b) => (row_q_norm(u.matrix(), 0.0)?, b, "row"),
                    SparsityBound::ColumnL0(b) => (col_q_norm(u.matrix(), 0.0)?, b, "column"),
                };
                if value > limit {
                    return Err(SubspaceError::CertificationFailed(format!(
                        "point {i} has {what} support {value}, above the bound {limit}"
                    )));
                }
            }
        }
        let pairs: Vec<(usize, usize)> = (0..points.len())
            .flat_map(|i| (i + 1..points.len()).map(move |j| (i, j)))
            .collect();
        let dists = pairs
            .par_iter()
            .map(|&(i, j)| Self::distance(metric, &points[i], &points[j]))
            .collect::<Result<Vec<f64>>>()?;
        let realized = dists.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if realized < claimed_min - 1e-9 {
            return Err(SubspaceError::CertificationFailed(format!(
                "realized minimum distance {realized} is below the claimed {claimed_min}"
            )));
        }
        Ok(Self {
            points,
            min_distance: realized,
            metric,
            sparsity,
        })
    }

    /// Distance between two frames under the named metric.
    pub fn distance(metric: PackingMetric, a: &StiefelMatrix, b: &StiefelMatrix) -> Result<f64> {
        match metric {
            PackingMetric::Euclidean => Ok((a.matrix() - b.matrix()).norm()),
            PackingMetric::SinThetaF => {
                Ok(sin_theta_sq(&a.projector(), &b.projector())?.sqrt())
            }
        }
    }

    pub fn points(&self) -> &[StiefelMatrix] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Realized pairwise minimum distance (infinite below two points).
    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    pub fn metric(&self) -> PackingMetric {
        self.metric
    }

    pub fn sparsity(&self) -> Option<SparsityBound> {
        self.sparsity
    }

    /// Natural log of the cardinality.
    pub fn log_count(&self) -> f64 {
        (self.points.len() as f64).ln()
    }
}

/// A frame drawn uniformly (Haar) from the orthonormal p x d frames:
/// orthonormalized i.i.d. standard Gaussians, uniform by rotation
/// invariance.
pub fn haar_stiefel<R: Rng + ?Sized>(p: usize, d: usize, rng: &mut R) -> Result<StiefelMatrix> {
    let g = DMatrix::from_fn(p, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    orthonormalize(&g)
}

/// The local embedding
///
/// ```text
/// A_eps(J) = [ sqrt(1 - eps^2) I_k   0        ]
///            [ 0                     I_{d-k}  ]
///            [ eps J                 0        ]
/// ```
///
/// mapping a (p-d) x k frame `J` into an orthonormal p x d frame whose
/// distance from the embedding of another frame is controlled both ways:
/// `eps^2 (1 - eps^2) ||J1 - J2||_F^2 <= sin_theta_sq <= eps^2 ||J1 - J2||_F^2`.
/// Row sparsity transfers additively: for 0 < eps < 1 the embedded frame
/// has exactly d more nonzero rows than `J`.
pub fn stiefel_embedding(
    j: &StiefelMatrix,
    epsilon: f64,
    p: usize,
    d: usize,
    k: usize,
) -> Result<StiefelMatrix> {
    if !(1 <= k && k <= d && d < p) {
        return Err(SubspaceError::InvalidParameter(format!(
            "embedding needs 1 <= k <= d < p, got p={p}, d={d}, k={k}"
        )));
    }
    if !epsilon.is_finite() || !(0.0..=1.0).contains(&epsilon) {
        return Err(SubspaceError::InvalidParameter(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    if j.nrows() != p - d || j.ncols() != k {
        return Err(SubspaceError::DimensionMismatch(format!(
            "J must be {}x{k}, got {}x{}",
            p - d,
            j.nrows(),
            j.ncols()
        )));
    }
    let c = (1.0 - epsilon * epsilon).max(0.0).sqrt();
    let mut m = DMatrix::zeros(p, d);
    for a in 0..k {
        m[(a, a)] = c;
    }
    for a in k..d {
        m[(a, a)] = 1.0;
    }
    for r in 0..p - d {
        for a in 0..k {
            m[(d + r, a)] = epsilon * j.matrix()[(r, a)];
        }
    }
    StiefelMatrix::new(m)
}

/// Cardinality target for [`hypercube_packing`]:
/// `max{(1/30) s (1 + log(m/s)), log m}` in nats.
pub fn hypercube_target_log_count(m: usize, s: f64) -> f64 {
    let mf = m as f64;
    (HYPERCUBE_RATE_CONSTANT * s * (1.0 + (mf / s).ln())).max(mf.ln())
}

/// Weight used by the hypercube construction: `floor(min(m/e, s))`.
pub fn hypercube_weight(m: usize, s: f64) -> usize {
    ((m as f64 / std::f64::consts::E).min(s).floor() as usize).max(1)
}

/// Packing of unit vectors in R^m built from scaled binary vectors.
///
/// Greedy search over weight-`s0` binary vectors (scaled by s0^{-1/2} to
/// unit norm), rejecting candidates within Hamming distance s0/4 of a kept
/// one; falls back to the canonical basis family {e_1, .., e_m} when that
/// yields more points, so the cardinality never drops below m. Certified:
/// per-point support at most `s`, pairwise squared distance at least 1/4.
/// Achieved cardinality should be compared against
/// [`hypercube_target_log_count`].
pub fn hypercube_packing(m: usize, s: f64, seed: u64) -> Result<PackingSet> {
    if m < 3 {
        return Err(SubspaceError::InvalidParameter(format!(
            "hypercube dimension must be at least 3, got {m}"
        )));
    }
    if !s.is_finite() || s < 1.0 || s > m as f64 {
        return Err(SubspaceError::InvalidParameter(format!(
            "sparsity must lie in [1, {m}], got {s}"
        )));
    }
    let s0 = hypercube_weight(m, s);
    let target = hypercube_target_log_count(m, s);
    let cap = ((2.0 * (m as f64).max(target.exp())).ceil() as usize).clamp(m, KEPT_CAP);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<Vec<usize>> = Vec::new();
    let attempts = (200 * m).max(1000);
    for _ in 0..attempts {
        if kept.len() >= cap {
            break;
        }
        let mut cand = rand::seq::index::sample(&mut rng, m, s0).into_vec();
        cand.sort_unstable();
        let ok = kept
            .iter()
            .all(|prev| 4 * hamming_supports(prev, &cand, s0) >= s0);
        if ok {
            kept.push(cand);
        }
    }

    let points: Vec<StiefelMatrix> = if kept.len() >= m {
        let scale = 1.0 / (s0 as f64).sqrt();
        kept.iter()
            .map(|supp| {
                let mut v = DMatrix::zeros(m, 1);
                for &i in supp {
                    v[(i, 0)] = scale;
                }
                StiefelMatrix::new(v)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..m)
            .map(|i| {
                let mut v = DMatrix::zeros(m, 1);
                v[(i, 0)] = 1.0;
                StiefelMatrix::new(v)
            })
            .collect::<Result<Vec<_>>>()?
    };
    PackingSet::certify(
        points,
        PackingMetric::Euclidean,
        0.5,
        Some(SparsityBound::RowL0(s)),
    )
}

/// Hamming distance between two equal-weight supports.
fn hamming_supports(a: &[usize], b: &[usize], weight: usize) -> usize {
    let mut inter = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    2 * (weight - inter)
}

/// Greedy code over {0, .., alphabet-1}^length with pairwise Hamming
/// distance at least `min_hamming`. Words are visited in odometer order
/// from a seeded random starting word (wrapping around), so the output is
/// reproducible per seed. Enumeration work and output size are capped
/// internally; the certified property is the pairwise distance of whatever
/// is returned.
pub fn gv_code(
    alphabet: usize,
    length: usize,
    min_hamming: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if alphabet < 2 || length == 0 {
        return Err(SubspaceError::InvalidParameter(format!(
            "code needs alphabet >= 2 and length >= 1, got {alphabet}, {length}"
        )));
    }
    if min_hamming == 0 || min_hamming > length {
        return Err(SubspaceError::InvalidParameter(format!(
            "minimum distance must lie in [1, {length}], got {min_hamming}"
        )));
    }
    let total = (alphabet as u128)
        .checked_pow(length as u32)
        .unwrap_or(u128::MAX);
    let visits = total.min(ENUMERATION_CAP as u128) as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut word: Vec<usize> = (0..length).map(|_| rng.random_range(0..alphabet)).collect();
    let mut code: Vec<Vec<usize>> = Vec::new();
    for _ in 0..visits {
        if code.len() >= KEPT_CAP {
            break;
        }
        let ok = code.iter().all(|c| hamming_words(c, &word) >= min_hamming);
        if ok {
            code.push(word.clone());
        }
        // Odometer increment with wraparound.
        for slot in word.iter_mut().rev() {
            *slot += 1;
            if *slot < alphabet {
                break;
            }
            *slot = 0;
        }
    }
    Ok(code)
}

fn hamming_words(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Column-sparse packing in the (p-d) x d frames: each point's column k
/// lives in its own block of `m = floor((p-d)/d)` rows and is one symbol
/// of a hypercube packing on that block; the symbols along a point form a
/// codeword of a distance-ceil(d/2) code. Disjoint column supports give
/// orthonormality directly, and differing codewords differ in at least
/// d/2 columns by at least 1/4 squared each, so pairwise
/// `||H1 - H2||^2 >= d/8` is certified along with a per-column support of
/// at most `s`.
pub fn column_sparse_packing(p: usize, d: usize, s: f64, seed: u64) -> Result<PackingSet> {
    if d == 0 || p <= d {
        return Err(SubspaceError::InvalidParameter(format!(
            "needs 1 <= d < p, got p={p}, d={d}"
        )));
    }
    let m = (p - d) / d;
    if m < 3 {
        return Err(SubspaceError::InvalidParameter(format!(
            "row blocks of size {m} are too small; need floor((p-d)/d) >= 3"
        )));
    }
    if !s.is_finite() || s < 1.0 {
        return Err(SubspaceError::InvalidParameter(format!(
            "per-column sparsity must be at least 1, got {s}"
        )));
    }
    let alphabet = hypercube_packing(m, s.min(m as f64), seed)?;
    let code = gv_code(
        alphabet.len(),
        d,
        d.div_ceil(2),
        seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
    )?;

    let rows = p - d;
    let points: Vec<StiefelMatrix> = code
        .iter()
        .map(|word| {
            let mut h = DMatrix::zeros(rows, d);
            for (k, &symbol) in word.iter().enumerate() {
                let v = alphabet.points()[symbol].matrix();
                for r in 0..m {
                    h[(k * m + r, k)] = v[(r, 0)];
                }
            }
            StiefelMatrix::new(h)
        })
        .collect::<Result<Vec<_>>>()?;
    PackingSet::certify(
        points,
        PackingMetric::Euclidean,
        (d as f64 / 8.0).sqrt(),
        Some(SparsityBound::ColumnL0(s)),
    )
}

/// Greedy packing of k-dimensional subspaces of R^s in the sin-Theta
/// Frobenius metric: up to `budget` Haar samples, keeping each sample at
/// distance at least `sqrt(k) * delta` from everything kept so far. The
/// certified minimum is the realized one. The Frobenius distance between
/// the returned frames dominates the subspace distance, which is checked
/// pairwise as well.
pub fn grassmann_packing(
    s: usize,
    k: usize,
    delta: f64,
    seed: u64,
    budget: usize,
) -> Result<PackingSet> {
    if k == 0 || k > s.saturating_sub(k) {
        return Err(SubspaceError::InvalidParameter(format!(
            "needs 1 <= k <= s - k, got s={s}, k={k}"
        )));
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(SubspaceError::InvalidParameter(format!(
            "separation must be positive, got {delta}"
        )));
    }
    if budget == 0 {
        return Err(SubspaceError::InvalidParameter(
            "sampling budget must be at least 1".into(),
        ));
    }
    let threshold = (k as f64).sqrt() * delta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<StiefelMatrix> = Vec::new();
    for _ in 0..budget {
        if kept.len() >= KEPT_CAP {
            break;
        }
        let cand = haar_stiefel(s, k, &mut rng)?;
        let mut ok = true;
        for prev in &kept {
            let dist = PackingSet::distance(PackingMetric::SinThetaF, prev, &cand)?;
            if dist < threshold {
                ok = false;
                break;
            }
        }
        if ok {
            kept.push(cand);
        }
    }
    let set = PackingSet::certify(kept, PackingMetric::SinThetaF, threshold, None)?;
    // The frame distance dominates the subspace distance on every pair.
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let euclid =
                PackingSet::distance(PackingMetric::Euclidean, &set.points[i], &set.points[j])?;
            let angle =
                PackingSet::distance(PackingMetric::SinThetaF, &set.points[i], &set.points[j])?;
            if euclid + 1e-9 < angle {
                return Err(SubspaceError::CertificationFailed(format!(
                    "pair ({i}, {j}): frame distance {euclid} below subspace distance {angle}"
                )));
            }
        }
    }
    Ok(set)
}

/// KL divergence between n-sample spiked Gaussian models sharing spike
/// size `b`: `n/2 * b^2/(1+b) * sin_theta_sq(A1, A2)`.
///
/// The two models share a determinant, so the divergence reduces to
/// `n/2 * trace(S2^{-1}(S1 - S2))`, and the trace evaluates to
/// `b^2/(1+b)` times the squared sin-angle distance. The tests pin this
/// against the raw trace-and-logdet Gaussian formula.
pub fn kl_spiked(a1: &StiefelMatrix, a2: &StiefelMatrix, b: f64, n: usize) -> Result<f64> {
    if a1.nrows() != a2.nrows() || a1.ncols() != a2.ncols() {
        return Err(SubspaceError::DimensionMismatch(format!(
            "frames must share a shape, got {}x{} and {}x{}",
            a1.nrows(),
            a1.ncols(),
            a2.nrows(),
            a2.ncols()
        )));
    }
    if !b.is_finite() || b <= 0.0 {
        return Err(SubspaceError::InvalidParameter(format!(
            "spike size must be positive, got {b}"
        )));
    }
    if n == 0 {
        return Err(SubspaceError::InvalidParameter(
            "sample count must be at least 1".into(),
        ));
    }
    let dist = sin_theta_sq(&a1.projector(), &a2.projector())?;
    Ok(n as f64 / 2.0 * b * b / (1.0 + b) * dist)
}

/// Inputs to the generalized Fano bound: a pairwise distance lower bound
/// `alpha`, a pairwise KL upper bound `beta`, and the log-cardinality of
/// the hypothesis set. The cardinality is held in log form so that counts
/// far beyond integer range (e.g. e^100) are representable.
#[derive(Debug, Clone, Copy)]
pub struct FanoInputs {
    alpha: f64,
    beta: f64,
    log_count: f64,
}

impl FanoInputs {
    pub fn from_count(alpha: f64, beta: f64, count: u64) -> Result<Self> {
        if count < 2 {
            return Err(SubspaceError::InvalidParameter(format!(
                "the bound needs at least 2 hypotheses, got {count}"
            )));
        }
        Self::from_log_count(alpha, beta, (count as f64).ln())
    }

    pub fn from_log_count(alpha: f64, beta: f64, log_count: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(SubspaceError::InvalidParameter(format!(
                "distance bound must be a nonnegative real, got {alpha}"
            )));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(SubspaceError::InvalidParameter(format!(
                "divergence bound must be a nonnegative real, got {beta}"
            )));
        }
        if !log_count.is_finite() || log_count < std::f64::consts::LN_2 - 1e-12 {
            return Err(SubspaceError::InvalidParameter(format!(
                "log-cardinality must be at least log 2, got {log_count}"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            log_count,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn log_count(&self) -> f64 {
        self.log_count
    }
}

/// Generalized Fano lower bound
/// `max{0, (alpha/2) (1 - (beta + log 2)/log N)}`, clamped at zero where
/// the expression is vacuous.
pub fn fano_bound(inputs: &FanoInputs) -> f64 {
    let penalty = (inputs.beta + std::f64::consts::LN_2) / inputs.log_count;
    (inputs.alpha / 2.0 * (1.0 - penalty)).max(0.0)
}

/// Fano bound specialized to a packing pushed through the local embedding:
/// `max{0, (delta_n eps sqrt(1-eps^2)/2) (1 - (4 n k eps^2/sigma_sq + log 2)/log N)}`.
/// Equals [`fano_bound`] with `alpha = delta_n eps sqrt(1-eps^2)` and
/// `beta = 4 n k eps^2 / sigma_sq`.
pub fn stiefel_fano_bound(
    delta_n: f64,
    epsilon: f64,
    n: usize,
    k: usize,
    sigma_sq: f64,
    log_count: f64,
) -> Result<f64> {
    if !delta_n.is_finite() || delta_n < 0.0 {
        return Err(SubspaceError::InvalidParameter(format!(
            "packing separation must be a nonnegative real, got {delta_n}"
        )));
    }
    if !epsilon.is_finite() || !(0.0..=1.0).contains(&epsilon) {
        return Err(SubspaceError::InvalidParameter(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    if n == 0 || k == 0 {
        return Err(SubspaceError::InvalidParameter(
            "sample count and packing dimension must be at least 1".into(),
        ));
    }
    if !sigma_sq.is_finite() || sigma_sq <= 0.0 {
        return Err(SubspaceError::InvalidParameter(format!(
            "noise level must be positive, got {sigma_sq}"
        )));
    }
    if !log_count.is_finite() || log_count < std::f64::consts::LN_2 - 1e-12 {
        return Err(SubspaceError::InvalidParameter(format!(
            "log-cardinality must be at least log 2, got {log_count}"
        )));
    }
    let lead = delta_n * epsilon * (1.0 - epsilon * epsilon).max(0.0).sqrt() / 2.0;
    let penalty =
        (4.0 * n as f64 * k as f64 * epsilon * epsilon / sigma_sq + std::f64::consts::LN_2)
            / log_count;
    Ok((lead * (1.0 - penalty)).max(0.0))
}
