//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data or
//! validation error, 3 non-convergence (or failed invariants) under `--strict`.

use crate::config::load_grid_config;
use crate::error::{GlarError, Result};
use crate::estimator::{empirical_lambda_floor, fit, matrix_to_csv, EstimateResult, EstimatorConfig};
use crate::experiments::{
    default_initial_state, mse, run_cell, scaling_diagnostics, CellResult,
    ExperimentGrid, ExperimentResult, LambdaRule, MIXED_BURN_IN,
};
use crate::family::Family;
use crate::io::atomic_write;
use crate::model::{validate_model, GlarModel};
use crate::plot::write_experiment_plots;
use crate::simulator::{sample_sparse_matrix, simulate, GenSpec, InitialState, SeriesMetadata, Structure, TimeSeries};
use crate::theory::verify::{run_verify, VerifyOptions};
use crate::theory::{cross_term_stat, theory_report, ReportOptions};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_STRICT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "glarnet", version, about = "Sparse network estimation for Bernoulli and Poisson autoregressive processes")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "GLARNET_THREADS")]
    pub threads: Option<usize>,
    /// Suppress progress lines.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a sample path from a model file or a freshly drawn sparse model.
    Simulate(SimulateArgs),
    /// Estimate the network matrix from a series.
    Fit(FitArgs),
    /// Run an MSE study over a grid of (s, T) cells.
    Experiment(ExperimentArgs),
    /// Check the theoretical invariants numerically.
    Verify(VerifyArgs),
    /// Report assumption constants and error bounds for a model.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model JSON. Without it a random sparse model is drawn from --family/--M/--s/--rho.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "poisson")]
    pub family: Family,
    #[arg(long = "M", default_value_t = 20)]
    pub dim: usize,
    #[arg(long, default_value_t = 40)]
    pub s: usize,
    #[arg(long, default_value_t = 5)]
    pub rho: usize,
    #[arg(long, default_value = "random")]
    pub structure: Structure,
    /// Number of recorded transitions; the CSV holds T + 1 states.
    #[arg(long = "T")]
    pub transitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "burn-in", default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub series: PathBuf,
    /// Model JSON supplying the family and ν (the matrix is ignored).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Family when no model is given; ν is then taken as 0.
    #[arg(long)]
    pub family: Option<Family>,
    /// `paper` (0.1/√T), `thm2`, or a number.
    #[arg(long, default_value = "paper", value_parser = LambdaRule::parse)]
    pub lambda: LambdaRule,
    /// Output directory for A_hat.csv and estimate.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Grid configuration; defaults apply to anything it leaves out.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = LambdaRule::parse)]
    pub lambda: Option<LambdaRule>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    /// Comma-separated sample sizes overriding the grid.
    #[arg(long = "T", value_delimiter = ',')]
    pub transitions: Option<Vec<usize>>,
    /// Also run the grid with a 10^4-step burn-in and report median ratios.
    #[arg(long)]
    pub compare_burn_in: bool,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "bernoulli")]
    pub family: Family,
    #[arg(long = "M", default_value_t = 5)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    #[arg(long = "T", default_value_t = 10_000)]
    pub transitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model for the accompanying theory report (defaults to the independent model).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "paper", value_parser = LambdaRule::parse)]
    pub lambda: LambdaRule,
    #[arg(long, default_value = "verify")]
    pub out: PathBuf,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Series used for T and the empirical cross-term statistics.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Estimate JSON to compare against the model matrix.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    #[arg(long = "T")]
    pub transitions: Option<usize>,
    #[arg(long, default_value = "paper", value_parser = LambdaRule::parse)]
    pub lambda: LambdaRule,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Output JSON path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    let quiet = cli.quiet;
    let command = cli.command;
    match cli.threads {
        Some(0) => Err(GlarError::InvalidConfig("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| GlarError::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| dispatch(command, quiet)),
        None => dispatch(command, quiet),
    }
}

fn dispatch(command: Command, quiet: bool) -> Result<i32> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a, quiet),
        Command::Fit(a) => cmd_fit(&a, quiet),
        Command::Experiment(a) => cmd_experiment(&a, quiet),
        Command::Verify(a) => cmd_verify(&a, quiet),
        Command::Report(a) => cmd_report(&a),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "series".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn load_checked_model(path: &Path, quiet: bool) -> Result<GlarModel> {
    let model = GlarModel::load(path)?;
    for v in validate_model(&model) {
        if !quiet {
            eprintln!("warning: {v}");
        }
    }
    Ok(model)
}

fn cmd_simulate(a: &SimulateArgs, quiet: bool) -> Result<i32> {
    let model = match &a.model {
        Some(path) => load_checked_model(path, quiet)?,
        None => {
            let spec = GenSpec {
                dim: a.dim,
                s: a.s,
                rho: a.rho,
                value_low: -1.0,
                value_high: 0.0,
                structure: a.structure,
                seed: a.seed,
            };
            let model = GlarModel::new(a.family, sample_sparse_matrix(&spec)?, vec![0.0; a.dim])?;
            atomic_write(&sibling(&a.out, ".model.json"), model.to_json()?.as_bytes())?;
            model
        }
    };
    let init: InitialState = default_initial_state(model.family, model.dim(), a.seed);
    let series = simulate(&model, &init, a.transitions, a.burn_in, a.seed)?;
    atomic_write(&a.out, series.to_csv().as_bytes())?;
    let meta = SeriesMetadata::new(&series, &model)?;
    atomic_write(&sibling(&a.out, ".meta.json"), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    if !quiet {
        eprintln!("simulate: wrote {} states of dimension {} to {}", a.transitions + 1, model.dim(), a.out.display());
    }
    Ok(EXIT_OK)
}

fn cmd_fit(a: &FitArgs, quiet: bool) -> Result<i32> {
    let series = TimeSeries::load(&a.series)?;
    let (family, nu) = match (&a.model, a.family) {
        (Some(path), _) => {
            let m = load_checked_model(path, quiet)?;
            if m.dim() != series.dim() {
                return Err(GlarError::DimensionMismatch { expected: m.dim(), got: series.dim() });
            }
            (m.family, m.nu.clone())
        }
        (None, Some(f)) => (f, vec![0.0; series.dim()]),
        (None, None) => return Err(GlarError::InvalidConfig("fit needs --model or --family".into())),
    };
    if !series.in_support(family) {
        return Err(GlarError::Format(format!("series has values outside the {} support", family.name())));
    }
    let nu_max = nu.iter().copied().fold(0.0, f64::max);
    let lambda = a.lambda.lambda(family, series.dim(), series.transitions(), nu_max)?;
    let est = fit(family, &nu, &series, &EstimatorConfig::with_lambda(lambda))?;
    atomic_write(&a.out.join("A_hat.csv"), matrix_to_csv(&est.a_hat).as_bytes())?;
    atomic_write(&a.out.join("estimate.json"), est.to_json()?.as_bytes())?;
    let unconverged = est.converged_per_row.iter().filter(|c| !**c).count();
    if !quiet {
        eprintln!(
            "fit: lambda = {lambda:e}, objective = {:.6}, {unconverged} of {} rows unconverged",
            est.objective(),
            series.dim()
        );
    }
    if a.strict && unconverged > 0 {
        eprintln!("error: estimator: {unconverged} rows did not converge");
        return Ok(EXIT_STRICT);
    }
    Ok(EXIT_OK)
}

/// Per-cell result file; reused on restart when the grid matches.
#[derive(Serialize, Deserialize)]
struct CellFile {
    grid: ExperimentGrid,
    cell: CellResult,
}

fn run_grid_resumable(grid: &ExperimentGrid, dir: &Path, quiet: bool) -> Result<ExperimentResult> {
    grid.validate()?;
    let cells_dir = dir.join("cells");
    let mut cells = Vec::new();
    let all = grid.cells();
    for (k, (s, t)) in all.iter().copied().enumerate() {
        let path = cells_dir.join(format!("s{s}_T{t}.json"));
        let cached = std::fs::read_to_string(&path)
            .ok()
            .and_then(|text| serde_json::from_str::<CellFile>(&text).ok())
            .filter(|f| f.grid == *grid);
        let cell = match cached {
            Some(f) => f.cell,
            None => {
                let cell = run_cell(grid, s, t)?;
                let file = CellFile { grid: grid.clone(), cell };
                atomic_write(&path, serde_json::to_string_pretty(&file)?.as_bytes())?;
                file.cell
            }
        };
        if !quiet {
            eprintln!(
                "experiment: cell {}/{} s={s} T={t} median mse={:.5} failed={}",
                k + 1,
                all.len(),
                cell.mse_median,
                cell.failed
            );
        }
        cells.push(cell);
    }
    let result = ExperimentResult { grid: grid.clone(), cells };
    atomic_write(&dir.join("results.csv"), result.to_csv()?.as_bytes())?;
    atomic_write(&dir.join("results.json"), result.to_json()?.as_bytes())?;
    write_experiment_plots(&result.cells, dir)?;
    if let Ok(diag) = scaling_diagnostics(&result.cells) {
        atomic_write(&dir.join("diagnostics.json"), serde_json::to_string_pretty(&diag)?.as_bytes())?;
    }
    Ok(result)
}

fn cmd_experiment(a: &ExperimentArgs, quiet: bool) -> Result<i32> {
    let mut grid = match &a.grid {
        Some(path) => load_grid_config(path)?,
        None => ExperimentGrid::default(),
    };
    if let Some(v) = a.trials {
        grid.trials = v;
    }
    if let Some(v) = a.seed {
        grid.base_seed = v;
    }
    if let Some(v) = a.lambda {
        grid.lambda_rule = v;
    }
    if let Some(v) = a.burn_in {
        grid.burn_in = v;
    }
    if let Some(v) = &a.transitions {
        grid.t_values = v.clone();
    }
    grid.validate()?;
    let failed: usize;
    if a.compare_burn_in {
        let unmixed = run_grid_resumable(&ExperimentGrid { burn_in: 0, ..grid.clone() }, &a.out.join("unmixed"), quiet)?;
        let mixed = run_grid_resumable(&ExperimentGrid { burn_in: MIXED_BURN_IN, ..grid.clone() }, &a.out.join("mixed"), quiet)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["s", "T", "median_unmixed", "median_mixed", "ratio"])?;
        for (u, m) in unmixed.cells.iter().zip(&mixed.cells) {
            w.write_record([
                u.s.to_string(),
                u.transitions.to_string(),
                u.mse_median.to_string(),
                m.mse_median.to_string(),
                (m.mse_median / u.mse_median).to_string(),
            ])?;
        }
        let text = w.into_inner().map_err(|e| e.into_error())?;
        atomic_write(&a.out.join("burn_in_ratios.csv"), &text)?;
        failed = unmixed.cells.iter().chain(&mixed.cells).map(|c| c.failed).sum();
    } else {
        let result = run_grid_resumable(&grid, &a.out, quiet)?;
        failed = result.cells.iter().map(|c| c.failed).sum();
    }
    if a.strict && failed > 0 {
        eprintln!("error: experiments: {failed} trials failed");
        return Ok(EXIT_STRICT);
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, quiet: bool) -> Result<i32> {
    let options = VerifyOptions {
        family: a.family,
        dim: a.dim,
        seeds: a.seeds,
        transitions: a.transitions,
        base_seed: a.seed,
        ..VerifyOptions::default()
    };
    let report = run_verify(&options)?;
    let model = match &a.model {
        Some(path) => load_checked_model(path, quiet)?,
        None => GlarModel::independent(a.family, a.dim),
    };
    let nu_max = model.nu.iter().copied().fold(0.0, f64::max);
    let lambda = a.lambda.lambda(model.family, model.dim(), a.transitions, nu_max)?;
    let theory = theory_report(&model, &ReportOptions::new(lambda, a.transitions))?;
    let table = report.to_csv()?;
    atomic_write(&a.out.join("verify.csv"), table.as_bytes())?;
    atomic_write(&a.out.join("theory_report.json"), serde_json::to_string_pretty(&theory)?.as_bytes())?;
    print!("{table}");
    if a.strict && !report.all_passed() {
        eprintln!("error: theory: some invariants failed");
        return Ok(EXIT_STRICT);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FullReport {
    theory: crate::theory::TheoryReport,
    /// `2 max |(1/T) Σ X_t ε_{t+1}ᵀ|` on the supplied series.
    empirical_lambda_floor: Option<f64>,
    cross_term_stat: Option<f64>,
    estimate_mse: Option<f64>,
}

fn cmd_report(a: &ReportArgs) -> Result<i32> {
    let model = load_checked_model(&a.model, true)?;
    let series = a.series.as_deref().map(TimeSeries::load).transpose()?;
    let transitions = match (&series, a.transitions) {
        (_, Some(t)) => t,
        (Some(s), None) => s.transitions(),
        (None, None) => return Err(GlarError::InvalidConfig("report needs --series or --T".into())),
    };
    let nu_max = model.nu.iter().copied().fold(0.0, f64::max);
    let lambda = a.lambda.lambda(model.family, model.dim(), transitions, nu_max)?;
    let mut options = ReportOptions::new(lambda, transitions);
    options.alpha = a.alpha;
    options.delta = a.delta;
    let theory = theory_report(&model, &options)?;
    let (floor, cross) = match &series {
        Some(s) => (Some(empirical_lambda_floor(&model, s)?), Some(cross_term_stat(s, &model)?)),
        None => (None, None),
    };
    let estimate_mse = match &a.estimate {
        Some(path) => Some(mse(&EstimateResult::from_json(&std::fs::read_to_string(path)?)?.a_hat, &model.a)?),
        None => None,
    };
    let json = serde_json::to_string_pretty(&FullReport { theory, empirical_lambda_floor: floor, cross_term_stat: cross, estimate_mse })?;
    match &a.out {
        Some(path) => atomic_write(path, json.as_bytes())?,
        None => println!("{json}"),
    }
    Ok(EXIT_OK)
}
