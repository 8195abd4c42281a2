//! Exact finite-state computations for Bernoulli chains on `{0,1}^M`.
//!
//! State index `k` encodes `x_j = (k >> j) & 1`.

use crate::error::{GlarError, Result};
use crate::family::Family;
use crate::model::GlarModel;
use nalgebra::{DMatrix, DVector};

/// Largest dimension for which the `2^M x 2^M` kernel is built.
pub const MAX_CHAIN_DIM: usize = 12;

pub fn index_to_state(k: usize, dim: usize) -> Vec<f64> {
    (0..dim).map(|j| ((k >> j) & 1) as f64).collect()
}

pub fn state_to_index(x: &[f64]) -> usize {
    x.iter().enumerate().fold(0, |acc, (j, &v)| if v != 0.0 { acc | (1 << j) } else { acc })
}

fn check_chain(model: &GlarModel) -> Result<usize> {
    if model.family != Family::Bernoulli {
        return Err(GlarError::Precondition("exact kernels need the finite Bernoulli state space".into()));
    }
    if model.dim() > MAX_CHAIN_DIM {
        return Err(GlarError::Precondition(format!(
            "exact kernels need M <= {MAX_CHAIN_DIM}, got {}",
            model.dim()
        )));
    }
    Ok(model.dim())
}

/// Row-stochastic kernel `P(x, y) = exp(Σ_m [y_m θ_m(x) − Z(θ_m(x))]) Π h(y_m)`.
pub fn transition_kernel(model: &GlarModel) -> Result<DMatrix<f64>> {
    let dim = check_chain(model)?;
    let n = 1usize << dim;
    let family = model.family;
    let mut p = DMatrix::zeros(n, n);
    for from in 0..n {
        let x = index_to_state(from, dim);
        let theta: Vec<f64> = (0..dim).map(|m| model.theta_row(m, &x)).collect();
        // Per-coordinate log-probabilities of y_m = 0 and y_m = 1.
        let logs: Vec<[f64; 2]> = theta
            .iter()
            .map(|&t| [family.log_density(0.0, t), family.log_density(1.0, t)])
            .collect();
        for to in 0..n {
            let lp: f64 = (0..dim).map(|m| logs[m][(to >> m) & 1]).sum();
            p[(from, to)] = lp.exp();
        }
    }
    Ok(p)
}

/// Unnormalized log weight `ν·x + Σ_m Z(ν_m + a_m·x) + Σ_m log h(x_m)`.
fn log_weight(model: &GlarModel, x: &[f64]) -> f64 {
    let family = model.family;
    let mut w = 0.0;
    for m in 0..model.dim() {
        w += model.nu[m] * x[m] + family.z(model.theta_row(m, x)) + family.log_base_measure(x[m]);
    }
    w
}

/// Stationary law of a symmetric-`A` chain, normalized to sum to one.
pub fn stationary_pi(model: &GlarModel) -> Result<Vec<f64>> {
    let dim = check_chain(model)?;
    if !model.is_symmetric(0.0) {
        return Err(GlarError::NotSymmetric);
    }
    let n = 1usize << dim;
    let logs: Vec<f64> = (0..n).map(|k| log_weight(model, &index_to_state(k, dim))).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// Largest `|πP − π|` entry and largest detailed-balance gap `|π(x)P(x,y) − π(y)P(y,x)|`.
pub fn stationary_residuals(model: &GlarModel) -> Result<(f64, f64)> {
    let p = transition_kernel(model)?;
    let pi = DVector::from_vec(stationary_pi(model)?);
    let moved = p.tr_mul(&pi);
    let fixed = (moved - &pi).amax();
    let n = pi.len();
    let mut balance = 0.0f64;
    for x in 0..n {
        for y in 0..x {
            balance = balance.max((pi[x] * p[(x, y)] - pi[y] * p[(y, x)]).abs());
        }
    }
    Ok((fixed, balance))
}

/// `(1 − h(0)^{−2M} e^{−2M Z(ν_max)})^t`.
pub fn mixing_tv_bound(t: u32, dim: usize, nu_max: f64, family: Family) -> f64 {
    let h0 = family.base_measure(0.0);
    let m = dim as f64;
    let rate = 1.0 - h0.powf(-2.0 * m) * (-2.0 * m * family.z(nu_max)).exp();
    rate.powi(t as i32)
}

/// Exact `‖P^t(y0, ·) − π‖_TV` for `t = 0..=t_max`.
pub fn tv_curve(model: &GlarModel, y0: &[f64], t_max: u32) -> Result<Vec<f64>> {
    let dim = check_chain(model)?;
    if y0.len() != dim {
        return Err(GlarError::DimensionMismatch { expected: dim, got: y0.len() });
    }
    if !y0.iter().all(|&v| Family::Bernoulli.in_support(v)) {
        return Err(GlarError::Precondition("starting state must be binary".into()));
    }
    let p = transition_kernel(model)?;
    let pi = DVector::from_vec(stationary_pi(model)?);
    let mut dist = DVector::zeros(pi.len());
    dist[state_to_index(y0)] = 1.0;
    let mut out = Vec::with_capacity(t_max as usize + 1);
    for t in 0..=t_max {
        if t > 0 {
            dist = p.tr_mul(&dist);
        }
        out.push(0.5 * (&dist - &pi).abs().sum());
    }
    Ok(out)
}

pub fn empirical_tv(model: &GlarModel, y0: &[f64], t: u32) -> Result<f64> {
    Ok(*tv_curve(model, y0, t)?.last().expect("curve has t+1 entries"))
}
