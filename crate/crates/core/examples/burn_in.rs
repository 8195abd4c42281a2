//! Effect of discarding 10^4 mixing steps before recording: median MSE with
//! and without the burn-in on the same ground truths.

use glarnet::experiments::{burn_in_comparison, ExperimentGrid, MIXED_BURN_IN};

fn main() -> glarnet::Result<()> {
    let grid = ExperimentGrid { t_values: vec![100, 400], trials: 10, ..ExperimentGrid::default() };
    let cmp = burn_in_comparison(&grid, MIXED_BURN_IN)?;
    for ((u, m), r) in cmp.unmixed.cells.iter().zip(&cmp.mixed.cells).zip(&cmp.ratios) {
        println!(
            "s = {}, T = {:>3}: median MSE {:.4} (no burn-in) vs {:.4} (burn-in), ratio {:.3}",
            u.s, u.transitions, u.mse_median, m.mse_median, r.ratio
        );
    }
    Ok(())
}
