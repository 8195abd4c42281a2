//! Exact stationary law and total-variation mixing of a 3-node Bernoulli
//! chain with symmetric inhibitory couplings.

use glarnet::theory::{index_to_state, mixing_tv_bound, stationary_pi, stationary_residuals, tv_curve};
use glarnet::{Family, GlarModel};
use nalgebra::DMatrix;

fn main() -> glarnet::Result<()> {
    let a = DMatrix::from_row_slice(3, 3, &[0.0, -0.8, -0.3, -0.8, 0.0, 0.0, -0.3, 0.0, -0.5]);
    let model = GlarModel::new(Family::Bernoulli, a, vec![0.2, -0.1, 0.0])?;
    let pi = stationary_pi(&model)?;
    for (k, p) in pi.iter().enumerate() {
        println!("pi{:?} = {p:.5}", index_to_state(k, 3));
    }
    let (fixed, balance) = stationary_residuals(&model)?;
    println!("max |pi P - pi| = {fixed:.2e}, max detailed-balance gap = {balance:.2e}");

    let nu_max = 0.2;
    println!("  t   TV from (1,1,1)   bound");
    for (t, tv) in tv_curve(&model, &[1.0, 1.0, 1.0], 10)?.iter().enumerate() {
        println!("{t:>3}   {tv:.6}          {:.6}", mixing_tv_bound(t as u32, 3, nu_max, Family::Bernoulli));
    }
    Ok(())
}
