//! Command-line front end: estimate sparse principal subspaces from a
//! covariance matrix, build certified packing sets, evaluate rate formulas
//! with their parameter conditions, and drive Monte Carlo experiments.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sparse_subspace::constructions::{
    column_sparse_packing, grassmann_packing, gv_code, hypercube_packing, PackingMetric,
    PackingSet, SparsityBound,
};
use sparse_subspace::estimators::{
    estimate_column_sparse_exact, estimate_exact, estimate_iterative, objective,
    SparsityConstraint,
};
use sparse_subspace::harness::{
    aggregate, rate_fit, run_experiment, write_records_csv, write_summary_csv, EstimatorKind,
    RateDriver,
};
use sparse_subspace::io::{read_matrix, write_matrix};
use sparse_subspace::rates::{
    check_conditions, classic_mse_gamma, epsilon_n, estimation_rate, expectation_overhead,
    lower_rate_column, lower_rate_row, rate_row_q0_weak, sparsity_t, sparsity_t_star,
    upper_rate_column, upper_rate_row, variable_selection_rate, ProblemParams,
};
use sparse_subspace::{ExperimentConfig, Result, SolverOptions, SubspaceError};

/// Prints a line to stdout, swallowing a closed pipe (e.g. `| head`)
/// instead of panicking.
fn emit(line: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

macro_rules! emitln {
    ($($arg:tt)*) => { emit(format_args!($($arg)*)) };
}

#[derive(Parser)]
#[command(
    name = "sparse-subspace",
    version,
    about = "Sparse principal subspace estimation, packings, rates, and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a sparse principal subspace from a covariance matrix file.
    Estimate(EstimateArgs),
    /// Construct a certified packing set and write it to a directory.
    Packing(PackingArgs),
    /// Evaluate all rate formulas and parameter conditions for a params JSON.
    Bounds(BoundsArgs),
    /// Run a Monte Carlo experiment from a config JSON.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Row sparsity: few nonzero rows of the basis.
    Row,
    /// Column sparsity: few nonzero coordinates per basis column.
    Column,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    /// Support enumeration; q = 0 only, small problems.
    Exact,
    /// Truncated orthogonal iteration with restarts.
    Iterative,
}

#[derive(Args)]
struct EstimateArgs {
    /// Symmetric covariance matrix file ("p p" header, then p rows).
    #[arg(long)]
    input: PathBuf,
    /// Subspace dimension.
    #[arg(long)]
    d: usize,
    /// Sparsity exponent in [0, 1]; 0 counts nonzero rows or coordinates.
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    /// Sparsity radius R_q.
    #[arg(long)]
    radius: f64,
    /// Which sparsity pattern the constraint controls.
    #[arg(long, value_enum, default_value_t = Mode::Row)]
    mode: Mode,
    /// Solving strategy.
    #[arg(long, value_enum, default_value_t = Solver::Iterative)]
    solver: Solver,
    /// Restarts for the iterative solver.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Seed for the iterative solver's random restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file for the estimated basis ("p d" header).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PackKind {
    /// Row-sparse hypercube frames in V_{m+1, 1}.
    Hypercube,
    /// Greedy packing of V_{m,k} spans under the sin-theta metric.
    Grassmann,
    /// Block-diagonal column-sparse frames.
    ColumnBlock,
    /// Greedy code with a minimum Hamming distance (no matrix points).
    Gv,
}

#[derive(Args)]
struct PackingArgs {
    /// Construction to run.
    #[arg(long, value_enum)]
    kind: PackKind,
    /// hypercube: rows m; grassmann: ambient dimension; column-block:
    /// ambient dimension p; gv: alphabet size.
    #[arg(long)]
    m: usize,
    /// hypercube/column-block: sparsity level; gv: code length.
    #[arg(long)]
    s: Option<f64>,
    /// grassmann: subspace dimension; column-block: columns d.
    #[arg(long)]
    k: Option<usize>,
    /// grassmann: required pairwise separation; gv: minimum Hamming
    /// distance.
    #[arg(long)]
    delta: Option<f64>,
    /// Seed for randomized candidate generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// grassmann: candidate budget for the greedy search.
    #[arg(long)]
    budget: Option<usize>,
    /// Output directory; receives point files plus manifest.json.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    /// Problem parameters JSON file.
    #[arg(long)]
    params: PathBuf,
    /// Output JSON path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Per-replicate records CSV path.
    #[arg(long)]
    output_records: Option<PathBuf>,
    /// Per-cell summary CSV path.
    #[arg(long)]
    output_summary: Option<PathBuf>,
    /// Log-log rate fit JSON path (needs >= 3 cells with a varying driver).
    #[arg(long)]
    output_fit: Option<PathBuf>,
    /// Worker threads; 0 keeps the library default.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Estimate(args) => run_estimate(&args),
        Command::Packing(args) => run_packing(&args),
        Command::Bounds(args) => run_bounds(&args),
        Command::Simulate(args) => run_simulate(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_estimate(args: &EstimateArgs) -> Result<()> {
    let s = read_matrix(&args.input)?;
    let (basis, obj, converged, label) = match (args.mode, args.solver) {
        (Mode::Row, Solver::Exact) => {
            let constraint = SparsityConstraint::row(args.q, args.radius)?;
            let basis = estimate_exact(&s, args.d, &constraint)?;
            let obj = objective(&s, &basis)?;
            (basis, obj, true, "exact")
        }
        (Mode::Column, Solver::Exact) => {
            if args.q != 0.0 {
                return Err(SubspaceError::InvalidParameter(
                    "the exact column solver only handles q = 0".into(),
                ));
            }
            let r0 = args.radius.floor();
            if r0 < 1.0 || !args.radius.is_finite() {
                return Err(SubspaceError::InvalidParameter(format!(
                    "column support size must be at least 1, got {}",
                    args.radius
                )));
            }
            let sol = estimate_column_sparse_exact(&s, args.d, r0 as usize)?;
            (sol.basis, sol.objective, sol.certified, "column_exact")
        }
        (mode, Solver::Iterative) => {
            let constraint = match mode {
                Mode::Row => SparsityConstraint::row(args.q, args.radius)?,
                Mode::Column => SparsityConstraint::column(args.q, args.radius)?,
            };
            let opts = SolverOptions {
                restarts: args.restarts,
                seed: args.seed,
                ..SolverOptions::default()
            };
            let sol = estimate_iterative(&s, args.d, &constraint, &opts)?;
            (sol.basis, sol.objective, sol.converged, "iterative")
        }
    };
    write_matrix(&args.output, basis.matrix())?;
    emitln!(
        "{label}: p={} d={} objective={:?} converged={converged} -> {}",
        basis.matrix().nrows(),
        basis.matrix().ncols(),
        obj,
        args.output.display()
    );
    Ok(())
}

fn require<T: Copy>(value: Option<T>, flag: &str, kind: &str) -> Result<T> {
    value.ok_or_else(|| {
        SubspaceError::InvalidParameter(format!("--{flag} is required for --kind {kind}"))
    })
}

fn run_packing(args: &PackingArgs) -> Result<()> {
    fs::create_dir_all(&args.output)?;
    let manifest = match args.kind {
        PackKind::Hypercube => {
            let s = require(args.s, "s", "hypercube")?;
            let set = hypercube_packing(args.m, s, args.seed)?;
            let files = write_points(&args.output, &set)?;
            packing_manifest(
                "hypercube",
                json!({"m": args.m, "s": s, "seed": args.seed}),
                &set,
                files,
            )
        }
        PackKind::Grassmann => {
            let k = require(args.k, "k", "grassmann")?;
            let delta = require(args.delta, "delta", "grassmann")?;
            let budget = args.budget.unwrap_or(4096);
            let set = grassmann_packing(args.m, k, delta, args.seed, budget)?;
            let files = write_points(&args.output, &set)?;
            packing_manifest(
                "grassmann",
                json!({
                    "ambient": args.m, "k": k, "delta": delta,
                    "seed": args.seed, "budget": budget
                }),
                &set,
                files,
            )
        }
        PackKind::ColumnBlock => {
            let s = require(args.s, "s", "column-block")?;
            let k = require(args.k, "k", "column-block")?;
            let set = column_sparse_packing(args.m, k, s, args.seed)?;
            let files = write_points(&args.output, &set)?;
            packing_manifest(
                "column-block",
                json!({"p": args.m, "d": k, "s": s, "seed": args.seed}),
                &set,
                files,
            )
        }
        PackKind::Gv => {
            let length = require(args.s, "s", "gv")?;
            let min_hamming = require(args.delta, "delta", "gv")?;
            if length.fract() != 0.0 || min_hamming.fract() != 0.0 {
                return Err(SubspaceError::InvalidParameter(
                    "gv needs integer --s (length) and --delta (Hamming distance)".into(),
                ));
            }
            let code = gv_code(args.m, length as usize, min_hamming as usize, args.seed)?;
            json!({
                "kind": "gv",
                "parameters": {
                    "alphabet": args.m, "length": length,
                    "min_hamming": min_hamming, "seed": args.seed
                },
                "count": code.len(),
                "codewords": code,
            })
        }
    };
    let path = args.output.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())?;
    emitln!("wrote {}", path.display());
    Ok(())
}

fn write_points(dir: &Path, set: &PackingSet) -> Result<Vec<String>> {
    let mut files = Vec::with_capacity(set.len());
    for (i, point) in set.points().iter().enumerate() {
        let name = format!("point_{i:04}.txt");
        write_matrix(dir.join(&name), point.matrix())?;
        files.push(name);
    }
    Ok(files)
}

fn packing_manifest(
    kind: &str,
    parameters: serde_json::Value,
    set: &PackingSet,
    files: Vec<String>,
) -> serde_json::Value {
    let metric = match set.metric() {
        PackingMetric::Euclidean => "euclidean",
        PackingMetric::SinThetaF => "sin_theta_f",
    };
    let sparsity = set.sparsity().map(|bound| match bound {
        SparsityBound::RowL0(v) => json!({"bound": "row_l0", "value": v}),
        SparsityBound::ColumnL0(v) => json!({"bound": "column_l0", "value": v}),
    });
    json!({
        "kind": kind,
        "parameters": parameters,
        "count": set.len(),
        "log_count": set.log_count(),
        "metric": metric,
        "min_distance": set.min_distance(),
        "sparsity": sparsity,
        "point_files": files,
    })
}

fn run_bounds(args: &BoundsArgs) -> Result<()> {
    let text = fs::read_to_string(&args.params)?;
    let params: ProblemParams = serde_json::from_str(&text)
        .map_err(|e| SubspaceError::Parse(format!("bad params JSON: {e}")))?;
    params.validate()?;

    // Every rate is reported at unit leading constant; the constants block
    // of the params only enters the condition checks.
    let mut notes = Vec::new();
    let mut rate = |name: &str, value: Result<f64>| match value {
        Ok(v) => json!(v),
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            serde_json::Value::Null
        }
    };
    let rates = json!({
        "sparsity_t": rate("sparsity_t", sparsity_t(&params)),
        "classic_mse_gamma": rate("classic_mse_gamma", classic_mse_gamma(&params)),
        "sparsity_t_star": rate("sparsity_t_star", sparsity_t_star(&params)),
        "epsilon_n": rate("epsilon_n", epsilon_n(&params)),
        "lower_rate_row": rate("lower_rate_row", lower_rate_row(&params, 1.0)),
        "upper_rate_row": rate("upper_rate_row", upper_rate_row(&params, 1.0)),
        "rate_row_q0_weak": rate("rate_row_q0_weak", rate_row_q0_weak(&params, 1.0)),
        "lower_rate_column": rate("lower_rate_column", lower_rate_column(&params, 1.0)),
        "upper_rate_column": rate("upper_rate_column", upper_rate_column(&params, 1.0)),
        "variable_selection_rate":
            rate("variable_selection_rate", variable_selection_rate(&params, 1.0)),
        "estimation_rate": rate("estimation_rate", estimation_rate(&params, 1.0)),
        "expectation_overhead": rate("expectation_overhead", expectation_overhead(&params)),
    });
    let conditions = check_conditions(&params)?;
    let all_satisfied = conditions.iter().all(|c| c.satisfied);
    let report = json!({
        "params": serde_json::to_value(params)
            .map_err(|e| SubspaceError::Parse(format!("unserializable params: {e}")))?,
        "rates": rates,
        "conditions": conditions,
        "all_conditions_satisfied": all_satisfied,
        "notes": notes,
    });
    let text = serde_json::to_string_pretty(&report).unwrap();
    match &args.output {
        Some(path) => {
            fs::write(path, text)?;
            emitln!("wrote {}", path.display());
        }
        None => emitln!("{text}"),
    }
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)?;
    let config = ExperimentConfig::from_json(&text)?;
    let records = if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build()
            .map_err(|e| SubspaceError::InvalidParameter(format!("thread pool: {e}")))?
            .install(|| run_experiment(&config))?
    } else {
        run_experiment(&config)?
    };
    let summary = aggregate(&records);
    for row in &summary {
        emitln!(
            "cell {}: p={} n={} d={} q={} R_q={} mean={:.6e} sd={:.6e} convergence={:.3}",
            row.cell_id, row.p, row.n, row.d, row.q, row.r_q, row.mean, row.sd,
            row.convergence_rate
        );
    }
    if let Some(path) = &args.output_records {
        let mut w = BufWriter::new(fs::File::create(path)?);
        write_records_csv(&mut w, &records)?;
        emitln!("wrote {}", path.display());
    }
    if let Some(path) = &args.output_summary {
        let mut w = BufWriter::new(fs::File::create(path)?);
        write_summary_csv(&mut w, &summary)?;
        emitln!("wrote {}", path.display());
    }
    if let Some(path) = &args.output_fit {
        let driver = match config.estimator {
            EstimatorKind::ColumnExact => RateDriver::Column,
            _ => RateDriver::Row,
        };
        let fit = rate_fit(&summary, driver)?;
        fs::write(path, serde_json::to_string_pretty(&fit).unwrap())?;
        emitln!(
            "fit: slope={:?} intercept={:?} r2={:?} -> {}",
            fit.slope,
            fit.intercept,
            fit.r2,
            path.display()
        );
    }
    Ok(())
}
