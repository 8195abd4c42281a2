//! Block-diagonal ground truth: how many off-support entries exceed 0.1 in
//! magnitude as T grows, and the support precision/recall.

use glarnet::experiments::{run_grid, ExperimentGrid};
use glarnet::simulator::Structure;

fn main() -> glarnet::Result<()> {
    let grid = ExperimentGrid {
        structure: Structure::BlockDiagonal,
        s_values: vec![60],
        t_values: vec![100, 316, 1000],
        trials: 10,
        ..ExperimentGrid::default()
    };
    for c in run_grid(&grid)?.cells {
        println!(
            "T = {:>4}: median off-support count {:>6.1}, precision {:.3}, recall {:.3}",
            c.transitions, c.off_support_median, c.precision_median, c.recall_median
        );
    }
    Ok(())
}
