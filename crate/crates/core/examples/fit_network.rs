//! Fits the network matrix of a simulated Bernoulli process and compares it
//! with the truth, entry by entry.

use glarnet::estimator::{default_lambda, fit, EstimatorConfig};
use glarnet::experiments::{mse, support_metrics, SUPPORT_THRESHOLD};
use glarnet::simulator::{simulate, InitialState};
use glarnet::{Family, GlarModel};
use nalgebra::DMatrix;

fn main() -> glarnet::Result<()> {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0, -2.0, 0.0, 0.0,
        1.5,  0.0, 0.0, 0.0,
        0.0,  0.0, 0.0, 2.0,
        0.0,  0.0, -1.0, 0.0,
    ]);
    let model = GlarModel::new(Family::Bernoulli, a, vec![-0.5; 4])?;
    for transitions in [500, 5000, 50_000] {
        let series = simulate(&model, &InitialState::Given(vec![0.0; 4]), transitions, 100, 3)?;
        let lambda = default_lambda(transitions);
        let est = fit(Family::Bernoulli, &model.nu, &series, &EstimatorConfig::with_lambda(lambda))?;
        let (p, r) = support_metrics(&est.a_hat, &model.a, SUPPORT_THRESHOLD)?;
        println!(
            "T = {transitions:>6}  lambda = {lambda:.4}  squared error = {:.4}  precision = {p:.2}  recall = {r:.2}",
            mse(&est.a_hat, &model.a)?
        );
        if transitions == 50_000 {
            println!("estimate:{:.2}", est.a_hat);
        }
    }
    Ok(())
}
