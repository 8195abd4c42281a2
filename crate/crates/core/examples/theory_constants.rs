//! Assumption constants and the Frobenius error ceiling for a small Bernoulli
//! network and a small Poisson network, plus the Poisson observation ceilings.

use glarnet::theory::{omega_bernoulli, poisson_bound_report, sigma_bernoulli, theory_report, ReportOptions};
use glarnet::estimator::default_lambda;
use glarnet::{Family, GlarModel};
use nalgebra::DMatrix;

fn main() -> glarnet::Result<()> {
    println!("Bernoulli curvature constants as the row degree grows (nu = 0, |a| <= 0.5):");
    for rho in 0..=4 {
        println!("  rho = {rho}: sigma = {:.5}, omega = {:.5}", sigma_bernoulli(0.0, rho, 0.5), omega_bernoulli(0.0, rho, 0.5));
    }

    let a = DMatrix::from_row_slice(3, 3, &[0.0, -0.5, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, -0.2]);
    for family in Family::ALL {
        let mut a = a.clone();
        if family == Family::Poisson {
            a.iter_mut().for_each(|v: &mut f64| *v = -v.abs());
        }
        let model = GlarModel::new(family, a, vec![0.0; 3])?;
        let t = 10_000;
        let report = theory_report(&model, &ReportOptions::new(default_lambda(t), t))?;
        println!(
            "{}: U = {:.2}, ln sigma = {:.3}, ln omega = {:.3}, xi = {:.2}, ln(Frobenius ceiling) = {:.2}",
            family.name(),
            report.params.u,
            report.params.ln_sigma,
            report.params.ln_omega,
            report.params.xi,
            report.ln_frob_bound
        );
    }

    let b = poisson_bound_report(20, 400, 0.0, 0.995)?;
    println!("Poisson M=20, T=400: C = {:.3}, C log(MT) = {:.2}, U = {:.2}, xi = {:.3}", b.c_logbound, b.x_ceiling, b.u, b.xi);
    Ok(())
}
