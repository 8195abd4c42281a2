//! Draws a sparse inhibitory Poisson network and simulates a sample path.
//!
//! Run with `cargo run --example simulate_poisson`.

use glarnet::simulator::{sample_sparse_matrix, simulate, GenSpec, InitialState, Structure};
use glarnet::{Family, GlarModel};

fn main() -> glarnet::Result<()> {
    let spec = GenSpec { dim: 8, s: 12, rho: 3, value_low: -1.0, value_high: 0.0, structure: Structure::Random, seed: 11 };
    let a = sample_sparse_matrix(&spec)?;
    let model = GlarModel::new(Family::Poisson, a, vec![0.5; 8])?;
    println!("network matrix:{:.2}", model.a);

    let series = simulate(&model, &InitialState::Poisson1, 2000, 1000, 11)?;
    let mut means = vec![0.0; model.dim()];
    for x in series.states() {
        for (m, v) in x.iter().enumerate() {
            means[m] += v / (series.transitions() + 1) as f64;
        }
    }
    println!("T = {}, empirical means per node:", series.transitions());
    for (m, v) in means.iter().enumerate() {
        println!("  node {m}: {v:.3} (mean without inhibition e^0.5 = {:.3})", 0.5f64.exp());
    }
    println!("first rows of the CSV:");
    for line in series.to_csv().lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
