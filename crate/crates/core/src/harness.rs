//! Config-driven Monte Carlo experiment runner: samples data from spiked
//! covariance models, runs an estimator on each replicate, aggregates the
//! squared subspace errors per grid cell, and fits the empirical scaling
//! against a theoretical rate driver.
//!
//! Determinism contract: the record set is a pure function of the config.
//! Replicates run concurrently, each on a seed derived from the master
//! seed by a counter bijection, so thread count and execution order never
//! change any field except `runtime_ms`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{
    sample_covariance, sample_gaussian, spiked_covariance, spiked_noise_variance,
};
use crate::error::{Result, SubspaceError};
use crate::estimators::{self, estimation_error, SolverOptions, SparsityConstraint};
use crate::geometry::StiefelMatrix;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
pub(crate) const TRUTH_TAG: u64 = 0x5452_5554;
pub(crate) const DATA_TAG: u64 = 0x4441_5441;
pub(crate) const SOLVER_TAG: u64 = 0x534F_4C56;

/// One grid point of the experiment: problem dimensions plus the spike
/// height `b` (the effective noise is derived as `(1+b)/b^2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub p: usize,
    pub n: usize,
    pub d: usize,
    pub q: f64,
    pub r_q: f64,
    pub b: f64,
}

/// Which estimator the run exercises. `Exact` and `Iterative` solve under
/// the row constraint built from the cell's `(q, r_q)`; `ColumnExact`
/// enumerates per-column supports of size `floor(r_q)` and requires q = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Exact,
    Iterative,
    ColumnExact,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Iterative => "iterative",
            Self::ColumnExact => "column_exact",
        }
    }
}

/// Where the true basis for each replicate comes from: a fresh random
/// row-sparse draw per replicate, or one fixed matrix loaded from a file
/// (which must match every cell's shape and constraint).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSpec {
    #[default]
    RandomSparseStiefel,
    Supplied {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: Vec<GridCell>,
    pub replicates: usize,
    pub master_seed: u64,
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub solver_options: SolverOptions,
    #[serde(default)]
    pub truth: TruthSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| SubspaceError::Parse(format!("bad experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| SubspaceError::Parse(format!("unserializable config: {e}")))
    }

    /// Checks everything that should fail fast rather than per replicate:
    /// cell shapes, constraint ranges, the q = 0 requirement of the
    /// enumerating estimators, and solver options.
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(SubspaceError::InvalidParameter(
                "needs at least one replicate".into(),
            ));
        }
        self.solver_options.validate()?;
        for (idx, cell) in self.grid.iter().enumerate() {
            cell_constraint(cell, self.estimator)
                .and_then(|c| c.validate_for(cell.p, cell.d))
                .map_err(|e| {
                    SubspaceError::InvalidParameter(format!("grid cell {idx}: {e}"))
                })?;
            if cell.n == 0 {
                return Err(SubspaceError::InvalidParameter(format!(
                    "grid cell {idx}: sample count must be at least 1"
                )));
            }
            if !cell.b.is_finite() || cell.b <= 0.0 {
                return Err(SubspaceError::InvalidParameter(format!(
                    "grid cell {idx}: spike height must be positive, got {}",
                    cell.b
                )));
            }
            if matches!(self.estimator, EstimatorKind::Exact | EstimatorKind::ColumnExact)
                && cell.q != 0.0
            {
                return Err(SubspaceError::InvalidParameter(format!(
                    "grid cell {idx}: the enumerating estimators need q = 0, got q = {}",
                    cell.q
                )));
            }
        }
        Ok(())
    }
}

/// One replicate's outcome. `error_sq` is the squared sin-angle distance
/// to the truth (NaN when the estimator itself failed); for the column
/// enumerator `converged` records its certification flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub cell_id: usize,
    pub p: usize,
    pub n: usize,
    pub d: usize,
    pub q: f64,
    pub r_q: f64,
    pub b: f64,
    pub sigma_sq: f64,
    pub estimator: String,
    pub replicate: usize,
    pub seed: u64,
    pub error_sq: f64,
    pub objective: f64,
    pub converged: bool,
    pub runtime_ms: f64,
}

/// Per-cell statistics of `error_sq` over the replicates whose estimator
/// produced a result; `count` is the total including failures and
/// `convergence_rate` the converged fraction of the total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell_id: usize,
    pub p: usize,
    pub n: usize,
    pub d: usize,
    pub q: f64,
    pub r_q: f64,
    pub b: f64,
    pub sigma_sq: f64,
    pub estimator: String,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub convergence_rate: f64,
}

/// Theoretical scale the empirical errors are regressed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateDriver {
    Row,
    Column,
}

impl RateDriver {
    /// `R_q (sigma^2 (d + log p)/n)^{1-q/2}`, times d for the column
    /// variant.
    pub fn value(self, p: usize, n: usize, d: usize, q: f64, r_q: f64, sigma_sq: f64) -> f64 {
        let base = r_q * (sigma_sq * (d as f64 + (p as f64).ln()) / n as f64).powf(1.0 - q / 2.0);
        match self {
            Self::Row => base,
            Self::Column => d as f64 * base,
        }
    }
}

/// Log-log least-squares fit relating mean error to the driver, reported
/// as log driver per unit log mean. Theory predicts slope 1; the
/// intercept absorbs the universal constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one replicate: a bijective mix of the master seed and the
/// replicate counter, so distinct counters always get distinct seeds.
pub fn derive_seed(master_seed: u64, counter: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Random row-sparse basis: a Haar-distributed r0 x d frame placed on r0
/// uniformly chosen rows, zero elsewhere. Deterministic per seed; the
/// result has exactly r0 nonzero rows with probability one.
pub fn make_truth(p: usize, d: usize, r0: usize, seed: u64) -> Result<StiefelMatrix> {
    if d == 0 || d > r0 || r0 > p {
        return Err(SubspaceError::InvalidParameter(format!(
            "needs 1 <= d <= r0 <= p, got p={p}, d={d}, r0={r0}"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut support = rand::seq::index::sample(&mut rng, p, r0).into_vec();
    support.sort_unstable();
    let local = crate::constructions::haar_stiefel(r0, d, &mut rng)?;
    let mut m = DMatrix::zeros(p, d);
    for (i, &row) in support.iter().enumerate() {
        for j in 0..d {
            m[(row, j)] = local.matrix()[(i, j)];
        }
    }
    StiefelMatrix::new(m)
}

fn cell_constraint(cell: &GridCell, kind: EstimatorKind) -> Result<SparsityConstraint> {
    match kind {
        EstimatorKind::Exact | EstimatorKind::Iterative => {
            SparsityConstraint::row(cell.q, cell.r_q)
        }
        EstimatorKind::ColumnExact => SparsityConstraint::column(cell.q, cell.r_q),
    }
}

/// Runs the full grid: for each cell and replicate, draw a truth, build
/// the spiked model, sample n points, estimate from the sample covariance,
/// and score against the truth. Estimator failures are recorded
/// (`converged = false`, NaN error) rather than aborting. Records come
/// back sorted by (cell_id, replicate) and are identical across runs and
/// thread counts except for `runtime_ms`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SimulationRecord>> {
    config.validate()?;
    let supplied = load_supplied_truth(config)?;
    let tasks: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|cell| (0..config.replicates).map(move |rep| (cell, rep)))
        .collect();
    let mut records = tasks
        .par_iter()
        .map(|&(cell_idx, rep)| run_replicate(config, supplied.as_ref(), cell_idx, rep))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.cell_id, r.replicate));
    Ok(records)
}

fn load_supplied_truth(config: &ExperimentConfig) -> Result<Option<StiefelMatrix>> {
    let TruthSpec::Supplied { path } = &config.truth else {
        return Ok(None);
    };
    let truth = StiefelMatrix::new(crate::io::read_matrix(path)?)?;
    for (idx, cell) in config.grid.iter().enumerate() {
        if truth.nrows() != cell.p || truth.ncols() != cell.d {
            return Err(SubspaceError::DimensionMismatch(format!(
                "supplied truth is {}x{} but grid cell {idx} needs {}x{}",
                truth.nrows(),
                truth.ncols(),
                cell.p,
                cell.d
            )));
        }
        let constraint = cell_constraint(cell, config.estimator)?;
        if !constraint.is_satisfied_by(&truth)? {
            return Err(SubspaceError::InvalidParameter(format!(
                "supplied truth violates the sparsity constraint of grid cell {idx}"
            )));
        }
    }
    Ok(Some(truth))
}

fn run_replicate(
    config: &ExperimentConfig,
    supplied: Option<&StiefelMatrix>,
    cell_idx: usize,
    rep: usize,
) -> Result<SimulationRecord> {
    let cell = &config.grid[cell_idx];
    let counter = (cell_idx * config.replicates + rep) as u64;
    let seed = derive_seed(config.master_seed, counter);
    let truth = match supplied {
        Some(v) => v.clone(),
        None => {
            let constraint = cell_constraint(cell, config.estimator)?;
            let r0 = estimators::feasible_support_size(&constraint, cell.p, cell.d);
            make_truth(cell.p, cell.d, r0, splitmix64(seed ^ TRUTH_TAG))?
        }
    };
    let model = spiked_covariance(&truth, cell.b)?;
    let data = sample_gaussian(&model, cell.n, splitmix64(seed ^ DATA_TAG))?;
    let s = sample_covariance(&data)?;

    let started = Instant::now();
    let outcome = run_estimator(&s, cell, config, splitmix64(seed ^ SOLVER_TAG));
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    let (error_sq, objective, converged) = match outcome {
        Ok((basis, objective, converged)) => {
            (estimation_error(&basis, &truth)?, objective, converged)
        }
        Err(_) => (f64::NAN, f64::NAN, false),
    };

    Ok(SimulationRecord {
        cell_id: cell_idx,
        p: cell.p,
        n: cell.n,
        d: cell.d,
        q: cell.q,
        r_q: cell.r_q,
        b: cell.b,
        sigma_sq: spiked_noise_variance(cell.b),
        estimator: config.estimator.name().to_string(),
        replicate: rep,
        seed,
        error_sq,
        objective,
        converged,
        runtime_ms,
    })
}

fn run_estimator(
    s: &DMatrix<f64>,
    cell: &GridCell,
    config: &ExperimentConfig,
    solver_seed: u64,
) -> Result<(StiefelMatrix, f64, bool)> {
    let constraint = cell_constraint(cell, config.estimator)?;
    match config.estimator {
        EstimatorKind::Exact => {
            let basis = estimators::estimate_exact(s, cell.d, &constraint)?;
            let objective = estimators::objective(s, &basis)?;
            Ok((basis, objective, true))
        }
        EstimatorKind::Iterative => {
            let mut opts = config.solver_options;
            opts.seed = solver_seed;
            let sol = estimators::estimate_iterative(s, cell.d, &constraint, &opts)?;
            Ok((sol.basis, sol.objective, sol.converged))
        }
        EstimatorKind::ColumnExact => {
            let r0 = cell.r_q.floor() as usize;
            let sol = estimators::estimate_column_sparse_exact(s, cell.d, r0)?;
            Ok((sol.basis, sol.objective, sol.certified))
        }
    }
}

/// Groups records by cell and summarizes `error_sq`. Statistics cover the
/// records with a finite error (NaN when a cell has none); `sd` is the
/// population standard deviation and the quantiles interpolate linearly.
/// Permutation-invariant in the input order.
pub fn aggregate(records: &[SimulationRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<usize, Vec<&SimulationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.cell_id).or_default().push(r);
    }
    groups
        .into_values()
        .map(|group| {
            let first = group[0];
            let mut finite: Vec<f64> = group
                .iter()
                .filter(|r| r.error_sq.is_finite())
                .map(|r| r.error_sq)
                .collect();
            finite.sort_by(|a, b| a.partial_cmp(b).expect("finite values are ordered"));
            let converged = group.iter().filter(|r| r.converged).count();
            let (mean, sd) = mean_and_sd(&finite);
            SummaryRow {
                cell_id: first.cell_id,
                p: first.p,
                n: first.n,
                d: first.d,
                q: first.q,
                r_q: first.r_q,
                b: first.b,
                sigma_sq: first.sigma_sq,
                estimator: first.estimator.clone(),
                count: group.len(),
                mean,
                sd,
                median: quantile(&finite, 0.5),
                q10: quantile(&finite, 0.1),
                q90: quantile(&finite, 0.9),
                convergence_rate: converged as f64 / group.len() as f64,
            }
        })
        .collect()
}

/// Two-pass mean and population standard deviation.
fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], t: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * t;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Least-squares fit of the log mean error, log driver relationship over
/// the summary rows: the returned line is `log(driver) = intercept +
/// slope * log(mean error_sq)`, so means tracking the driver exactly give
/// slope 1 and means growing faster than the driver give slope below 1.
/// Needs at least three cells, a driver that actually varies, and means
/// that vary and are positive on the log scale.
pub fn rate_fit(summaries: &[SummaryRow], driver: RateDriver) -> Result<RateFit> {
    if summaries.len() < 3 {
        return Err(SubspaceError::InsufficientGrid(format!(
            "rate fitting needs at least 3 cells, got {}",
            summaries.len()
        )));
    }
    let mut xs = Vec::with_capacity(summaries.len());
    let mut ys = Vec::with_capacity(summaries.len());
    for row in summaries {
        let value = driver.value(row.p, row.n, row.d, row.q, row.r_q, row.sigma_sq);
        if !(value.is_finite() && value > 0.0) {
            return Err(SubspaceError::InvalidParameter(format!(
                "cell {} has a degenerate driver value {value}",
                row.cell_id
            )));
        }
        if !(row.mean.is_finite() && row.mean > 0.0) {
            return Err(SubspaceError::InvalidParameter(format!(
                "cell {} has mean {} which cannot be log-fit",
                row.cell_id, row.mean
            )));
        }
        xs.push(row.mean.ln());
        ys.push(value.ln());
    }
    let n = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / n;
    let y_bar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar) * (x - x_bar)).sum();
    let syy: f64 = ys.iter().map(|y| (y - y_bar) * (y - y_bar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_bar) * (y - y_bar))
        .sum();
    if syy <= 1e-24 {
        return Err(SubspaceError::InsufficientGrid(
            "the driver does not vary across the cells".into(),
        ));
    }
    if sxx <= 1e-24 {
        return Err(SubspaceError::InsufficientGrid(
            "the mean error does not vary across the cells".into(),
        ));
    }
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    Ok(RateFit {
        slope,
        intercept: y_bar - slope * x_bar,
        r2,
    })
}

pub const RECORD_CSV_HEADER: &str =
    "cell_id,p,n,d,q,R_q,b,sigma_sq,estimator,replicate,seed,error_sq,objective,converged,runtime_ms";

pub const SUMMARY_CSV_HEADER: &str =
    "cell_id,p,n,d,q,R_q,b,sigma_sq,estimator,count,mean,sd,median,q10,q90,convergence_rate";

pub fn write_records_csv<W: Write>(w: &mut W, records: &[SimulationRecord]) -> Result<()> {
    writeln!(w, "{RECORD_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{:?},{:?},{:?},{:?},{},{},{},{:?},{:?},{},{:?}",
            r.cell_id,
            r.p,
            r.n,
            r.d,
            r.q,
            r.r_q,
            r.b,
            r.sigma_sq,
            r.estimator,
            r.replicate,
            r.seed,
            r.error_sq,
            r.objective,
            r.converged,
            r.runtime_ms
        )?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(w: &mut W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(w, "{SUMMARY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:?},{:?},{:?},{:?},{},{},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.cell_id,
            r.p,
            r.n,
            r.d,
            r.q,
            r.r_q,
            r.b,
            r.sigma_sq,
            r.estimator,
            r.count,
            r.mean,
            r.sd,
            r.median,
            r.q10,
            r.q90,
            r.convergence_rate
        )?;
    }
    Ok(())
}
