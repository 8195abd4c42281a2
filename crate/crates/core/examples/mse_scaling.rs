//! Median squared error against T and s on a reduced Poisson grid, with the
//! log-log slope and the MSE x T / MSE / s summaries. Writes SVG plots to
//! `target/mse_scaling/`.

use glarnet::experiments::{run_grid, scaling_diagnostics, ExperimentGrid};
use glarnet::plot::write_experiment_plots;

fn main() -> glarnet::Result<()> {
    let grid = ExperimentGrid {
        s_values: vec![20, 40],
        t_values: vec![100, 178, 316, 400],
        trials: 8,
        base_seed: 1,
        ..ExperimentGrid::default()
    };
    let result = run_grid(&grid)?;
    print!("{}", result.to_csv()?);
    let diag = scaling_diagnostics(&result.cells)?;
    println!("slope of log MSE on log T (s = 20): {:.3}", diag.slope_log_t.unwrap_or(f64::NAN));
    println!("max/min MSE x T: {:.3}", diag.mse_times_t_ratio.unwrap_or(f64::NAN));
    let dir = std::path::Path::new("target/mse_scaling");
    write_experiment_plots(&result.cells, dir)?;
    println!("plots written to {}", dir.display());
    Ok(())
}
