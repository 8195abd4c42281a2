//! Closed-form constants and error bounds of the RMLE, plus exact and Monte
//! Carlo checks of the probabilistic statements behind them.
//!
//! Constants that only appear as "some absolute constant" in the bounds are
//! caller-supplied and default to 1, so every value produced from them is
//! meaningful only up to that constant.

mod chain;
mod poisson;
pub mod verify;

pub use chain::{
    empirical_tv, index_to_state, mixing_tv_bound, state_to_index, stationary_pi, stationary_residuals,
    transition_kernel, tv_curve, MAX_CHAIN_DIM,
};
pub use poisson::{
    poisson_bound_report, poisson_pmf, poisson_tail_bound, poisson_upper_tail, truncated_poisson_variance,
    PoissonBounds,
};

use crate::error::{GlarError, Result};
use crate::estimator::innovation_cross_moments;
use crate::family::Family;
use crate::model::GlarModel;
use crate::simulator::TimeSeries;
use crate::sparsity::SparsityProfile;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

/// `ρ · x` with `0 · ∞ = 0`, so an empty row contributes nothing even for an unbounded box.
fn degree_times(rho: usize, x: f64) -> f64 {
    if rho == 0 {
        0.0
    } else {
        rho as f64 * x
    }
}

/// Strong-convexity constant of `log(1+e^θ)` on the bounded parameter range: `(3 + e^{ν̃ + 9ρã})^{-1}`.
pub fn sigma_bernoulli(nu_tilde: f64, rho: usize, a_tilde: f64) -> f64 {
    1.0 / (3.0 + (nu_tilde + degree_times(rho, 9.0 * a_tilde)).exp())
}

/// `ln(3 + e^x)` without overflow.
fn ln_three_plus_exp(x: f64) -> f64 {
    if x > 30.0 {
        x + (3.0 * (-x).exp()).ln_1p()
    } else {
        (3.0 + x.exp()).ln()
    }
}

/// Eigenvalue floor of `E[X_t X_tᵀ | X_{t-1}]`: `(3 + e^{ν̃ + ρã})^{-1}`.
pub fn omega_bernoulli(nu_tilde: f64, rho: usize, a_tilde: f64) -> f64 {
    1.0 / (3.0 + (nu_tilde + degree_times(rho, a_tilde)).exp())
}

/// `exp(−ν̃ + 9ρ a_min U)`.
pub fn sigma_poisson(nu_tilde: f64, rho: usize, a_min: f64, u: f64) -> f64 {
    (-nu_tilde + degree_times(rho, 9.0 * a_min * u)).exp()
}

/// `(4ξ/5) exp(ν_min + ρ a_min U)`.
pub fn omega_poisson(xi: f64, nu_min: f64, rho: usize, a_min: f64, u: f64) -> f64 {
    0.8 * xi * (nu_min + degree_times(rho, a_min * u)).exp()
}

/// Per-row and Frobenius error ceilings `144/(ξσω)² · ρ_m λ²` and `144/(ξσω)² · s λ²`.
pub fn thm1_bounds(xi: f64, sigma: f64, omega: f64, lambda: f64, sparsity: &SparsityProfile) -> (Vec<f64>, f64) {
    let scale = 144.0 / (xi * sigma * omega).powi(2) * lambda * lambda;
    let rows = sparsity.rho_per_row.iter().map(|&r| scale * r as f64).collect();
    (rows, scale * sparsity.s as f64)
}

/// Sample size above which the Frobenius bound holds with probability `1 − δ`:
/// `c ρ²/ω² ((ρ/ω² + 1) log 2M + log 1/δ)`.
pub fn min_samples_required(rho: usize, omega: f64, dim: usize, delta: f64, c: f64) -> f64 {
    let rho = rho as f64;
    let w2 = omega * omega;
    c * rho * rho / w2 * ((rho / w2 + 1.0) * (2.0 * dim as f64).ln() + (1.0 / delta).ln())
}

/// Inputs of the family-specific corollary rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorollaryInputs {
    pub family: Family,
    pub dim: usize,
    pub transitions: usize,
    pub s: usize,
    pub rho: usize,
    /// `ν̃` for Bernoulli; unused for Poisson.
    pub nu_tilde: f64,
    /// `ã` for Bernoulli, `a_min` for Poisson.
    pub a_scale: f64,
    /// Observation ceiling; unused for Bernoulli.
    pub u: f64,
    pub xi: f64,
    /// Unspecified absolute constant.
    pub c: f64,
}

/// Corollary error rates, up to the absolute constant `c`:
///
/// * Bernoulli: `c (3 + e^{ν̃+9ρã})⁴ s log²(MT) / (ξ² T)`
/// * Poisson: `c exp(20 |a_min| U ρ) s log⁶(MT) / (ξ³ T)`
///
/// Only meaningful for scaling comparisons.
pub fn corollary_bound(inputs: &CorollaryInputs) -> Result<f64> {
    let CorollaryInputs { family, dim, transitions, s, rho, nu_tilde, a_scale, u, xi, c } = *inputs;
    let log_mt = (dim as f64 * transitions as f64).ln();
    if transitions < 2 || log_mt < 1.0 {
        return Err(GlarError::Precondition(format!(
            "corollary rates need T >= 2 and log(MT) >= 1 (T={transitions}, log(MT)={log_mt:.4})"
        )));
    }
    let t = transitions as f64;
    let s = s as f64;
    Ok(match family {
        Family::Bernoulli => {
            let k = 3.0 + (nu_tilde + degree_times(rho, 9.0 * a_scale)).exp();
            c * k.powi(4) * s * log_mt.powi(2) / (xi * xi * t)
        }
        Family::Poisson => {
            let k = degree_times(rho, 20.0 * a_scale.abs() * u).exp();
            c * k * s * log_mt.powi(6) / (xi.powi(3) * t)
        }
    })
}

/// Exact `Γ = E[X_{t+1} X_{t+1}ᵀ | X_t = x] = μμᵀ + diag(Z''(θ))` and its smallest eigenvalue.
pub fn gamma_conditional(model: &GlarModel, x_prev: &[f64]) -> Result<(DMatrix<f64>, f64)> {
    let theta = model.natural_params(x_prev)?;
    let mu: Vec<f64> = theta.iter().map(|&t| model.family.mean(t)).collect();
    let dim = mu.len();
    let mut g = DMatrix::from_fn(dim, dim, |i, j| mu[i] * mu[j]);
    for (i, &t) in theta.iter().enumerate() {
        g[(i, i)] += model.family.variance(t);
    }
    let min_eig = SymmetricEigen::new(g.clone()).eigenvalues.min();
    Ok((g, min_eig))
}

/// `max_{i,j} (1/T) |Σ_t X_{t,i} (X_{t+1,j} − E[X_{t+1,j} | X_t])|` under the true model.
pub fn cross_term_stat(series: &TimeSeries, model: &GlarModel) -> Result<f64> {
    let c = innovation_cross_moments(model, series)?;
    Ok(c.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// `3 log(MT) / √T`.
pub fn bernoulli_cross_ceiling(dim: usize, transitions: usize) -> f64 {
    let t = transitions as f64;
    3.0 * (dim as f64 * t).ln() / t.sqrt()
}

/// `4 C² e^{ν_max} log³(MT) / √T`.
pub fn poisson_cross_ceiling(dim: usize, transitions: usize, c_logbound: f64, nu_max: f64) -> f64 {
    let t = transitions as f64;
    4.0 * c_logbound * c_logbound * nu_max.exp() * (dim as f64 * t).ln().powi(3) / t.sqrt()
}

/// Assumption constants of the error bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionParams {
    #[serde(rename = "U")]
    pub u: f64,
    pub sigma: f64,
    pub omega: f64,
    /// `ln σ` and `ln ω`, kept separately because the Poisson constants underflow for moderate `ρ |a_min| U`.
    pub ln_sigma: f64,
    pub ln_omega: f64,
    pub xi: f64,
    /// Bounded fraction for the Poisson case; 1 for Bernoulli.
    pub alpha: f64,
}

impl AssumptionParams {
    pub fn check(&self) -> Result<()> {
        if !(self.u > 0.0 && self.ln_sigma.is_finite() && self.ln_omega.is_finite()) {
            return Err(GlarError::Precondition("U must be positive and ln sigma, ln omega finite".into()));
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(GlarError::Precondition(format!("xi must lie in (0, 1], got {}", self.xi)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportOptions {
    pub lambda: f64,
    pub transitions: usize,
    /// Bounded fraction used for Poisson models.
    pub alpha: Option<f64>,
    pub delta: f64,
    /// Absolute constant of the sample-size requirement.
    pub c: f64,
    pub zero_tol: f64,
}

impl ReportOptions {
    pub fn new(lambda: f64, transitions: usize) -> Self {
        Self { lambda, transitions, alpha: None, delta: 0.05, c: 1.0, zero_tol: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryReport {
    pub family: Family,
    #[serde(rename = "M")]
    pub dim: usize,
    #[serde(rename = "T")]
    pub transitions: usize,
    pub params: AssumptionParams,
    pub lambda_used: f64,
    pub s: usize,
    pub rho: usize,
    pub nu_tilde: f64,
    pub a_tilde: f64,
    pub a_min_used: f64,
    pub row_bounds: Vec<f64>,
    /// Infinite (serialized as null) when `σω` underflows; see `ln_frob_bound`.
    pub frob_bound: f64,
    pub ln_frob_bound: f64,
    pub min_t_required: f64,
    pub delta: f64,
    /// Poisson only: `C` with `X_{t,m} <= C log(MT)` w.h.p., and that ceiling.
    pub c_logbound: Option<f64>,
    pub x_ceiling: Option<f64>,
    pub note: &'static str,
}

/// Box edges used by the theory: the model's box when finite, otherwise the
/// extreme entries of `A` (widened to include 0).
fn effective_box(model: &GlarModel) -> (f64, f64) {
    let (lo, hi) = model.entry_range();
    let a_min = if model.a_min.is_finite() { model.a_min } else { lo };
    let a_max = if model.a_max.is_finite() { model.a_max } else { hi };
    (a_min, a_max)
}

pub fn theory_report(model: &GlarModel, options: &ReportOptions) -> Result<TheoryReport> {
    let dim = model.dim();
    let sparsity = model.sparsity(options.zero_tol);
    let (a_min, a_max) = effective_box(model);
    let a_tilde = a_min.abs().max(a_max.abs());
    let nu_tilde = model.nu_tilde();
    let (params, c_logbound, x_ceiling) = match model.family {
        Family::Bernoulli => (
            AssumptionParams {
                u: 1.0,
                sigma: sigma_bernoulli(nu_tilde, sparsity.rho, a_tilde),
                omega: omega_bernoulli(nu_tilde, sparsity.rho, a_tilde),
                ln_sigma: -ln_three_plus_exp(nu_tilde + degree_times(sparsity.rho, 9.0 * a_tilde)),
                ln_omega: -ln_three_plus_exp(nu_tilde + degree_times(sparsity.rho, a_tilde)),
                xi: 1.0,
                alpha: 1.0,
            },
            None,
            None,
        ),
        Family::Poisson => {
            let alpha = options.alpha.unwrap_or(1.0 - 0.1 / dim as f64);
            let b = poisson_bound_report(dim, options.transitions, model.nu_max, alpha)?;
            let ln_sigma = -nu_tilde + degree_times(sparsity.rho, 9.0 * a_min * b.u);
            let ln_omega = (0.8 * b.xi).ln() + model.nu_min + degree_times(sparsity.rho, a_min * b.u);
            let params = AssumptionParams {
                u: b.u,
                sigma: ln_sigma.exp(),
                omega: ln_omega.exp(),
                ln_sigma,
                ln_omega,
                xi: b.xi,
                alpha,
            };
            (params, Some(b.c_logbound), Some(b.x_ceiling))
        }
    };
    params.check()?;
    let (row_bounds, frob_bound) = thm1_bounds(params.xi, params.sigma, params.omega, options.lambda, &sparsity);
    let min_t_required = min_samples_required(sparsity.rho, params.omega, dim, options.delta, options.c);
    let ln_frob_bound = 144f64.ln() - 2.0 * (params.xi.ln() + params.ln_sigma + params.ln_omega)
        + (sparsity.s as f64).ln()
        + 2.0 * options.lambda.ln();
    Ok(TheoryReport {
        family: model.family,
        dim,
        transitions: options.transitions,
        lambda_used: options.lambda,
        s: sparsity.s,
        rho: sparsity.rho,
        nu_tilde,
        a_tilde,
        a_min_used: a_min,
        row_bounds,
        frob_bound,
        ln_frob_bound,
        min_t_required,
        delta: options.delta,
        c_logbound,
        x_ceiling,
        params,
        note: "sample-size requirement and corollary rates are up to unspecified absolute constants (set to 1)",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsity::sparsity_of;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn bernoulli_constants() {
        assert_eq!(sigma_bernoulli(0.0, 0, f64::INFINITY), 0.25);
        assert_eq!(sigma_bernoulli(0.0, 0, 3.0), 0.25);
        assert!((sigma_bernoulli(1.0, 1, 0.0) - 1.0 / (3.0 + E)).abs() < 1e-15);
        assert!((sigma_bernoulli(1.0, 1, 0.0) - 0.174880).abs() < 5e-6);
        assert_eq!(omega_bernoulli(0.0, 0, 7.0), 0.25);
        assert!((omega_bernoulli(0.0, 1, 1.0) - 1.0 / (3.0 + E)).abs() < 1e-15);
        assert!(sigma_bernoulli(0.5, 2, 0.3) > sigma_bernoulli(0.6, 2, 0.3));
        assert!(sigma_bernoulli(0.5, 2, 0.3) > sigma_bernoulli(0.5, 3, 0.3));
        assert!(sigma_bernoulli(0.5, 2, 0.3) > sigma_bernoulli(0.5, 2, 0.4));
        assert!(omega_bernoulli(0.5, 2, 0.3) >= sigma_bernoulli(0.5, 2, 0.3));
    }

    #[test]
    fn poisson_constants() {
        assert_eq!(sigma_poisson(0.0, 0, -3.0, 10.0), 1.0);
        assert_eq!(omega_poisson(1.0, 0.0, 0, -1.0, 1.0), 0.8);
        assert!((omega_poisson(1.0, 0.0, 1, -1.0, 1.0) - 0.8 / E).abs() < 1e-15);
        assert!((omega_poisson(1.0, 0.0, 1, -1.0, 1.0) - 0.294304).abs() < 1e-6);
    }

    #[test]
    fn thm1_plug_in() {
        let p = sparsity_of(&DMatrix::from_element(1, 1, -1.0), 0.0);
        let (rows, frob) = thm1_bounds(1.0, 1.0, 1.0, 1.0, &p);
        assert_eq!(rows, vec![144.0]);
        assert_eq!(frob, 144.0);
        let (rows0, frob0) = thm1_bounds(1.0, 1.0, 1.0, 0.0, &p);
        assert_eq!((rows0[0], frob0), (0.0, 0.0));
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, 0.0, -0.5]);
        let p = sparsity_of(&a, 0.0);
        let (r1, f1) = thm1_bounds(0.7, 0.3, 0.2, 0.01, &p);
        let (r2, f2) = thm1_bounds(0.7, 0.3, 0.2, 0.02, &p);
        assert!((f2 / f1 - 4.0).abs() < 1e-12);
        assert!((r2[0] / r1[0] - 4.0).abs() < 1e-12);
        assert!((r1.iter().sum::<f64>() - f1).abs() < 1e-12 * f1);
    }

    #[test]
    fn corollary_scaling() {
        let base = CorollaryInputs {
            family: Family::Bernoulli,
            dim: 20,
            transitions: 400,
            s: 10,
            rho: 0,
            nu_tilde: 0.0,
            a_scale: 0.0,
            u: 1.0,
            xi: 1.0,
            c: 1.0,
        };
        let v = corollary_bound(&base).unwrap();
        let log_mt = (8000f64).ln();
        assert!((v - 256.0 * 10.0 * log_mt * log_mt / 400.0).abs() < 1e-9);
        let doubled = corollary_bound(&CorollaryInputs { s: 20, ..base }).unwrap();
        assert!((doubled / v - 2.0).abs() < 1e-12);
        let half_t = corollary_bound(&CorollaryInputs { transitions: 200, ..base }).unwrap();
        assert!(half_t / v > 1.6 && half_t / v < 2.0);
        let poisson = CorollaryInputs { family: Family::Poisson, rho: 1, a_scale: -0.1, u: 5.0, ..base };
        let p = corollary_bound(&poisson).unwrap();
        assert!((p - 1f64.exp().powi(10) * 10.0 * log_mt.powi(6) / 400.0).abs() < 1e-6 * p);
        assert!(corollary_bound(&CorollaryInputs { dim: 1, transitions: 2, ..base }).is_err());
    }

    #[test]
    fn gamma_examples() {
        let m = GlarModel::independent(Family::Bernoulli, 1);
        let (g, e) = gamma_conditional(&m, &[1.0]).unwrap();
        assert!((g[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((e - 0.5).abs() < 1e-15);
        assert!(e >= omega_bernoulli(0.0, 0, 0.0));

        let m = GlarModel::independent(Family::Poisson, 1);
        let (g, _) = gamma_conditional(&m, &[3.0]).unwrap();
        assert!((g[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_eigenvalue_dominates_smallest_variance() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, -0.4, 0.2, -0.4, 0.1, 0.0, 0.3, -0.2, -0.5]);
        for family in Family::ALL {
            let m = GlarModel::new(family, a.clone(), vec![0.2, -0.1, 0.0]).unwrap();
            for x in [[0.0, 0.0, 0.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0]] {
                let (_, e) = gamma_conditional(&m, &x).unwrap();
                let vmin = m.conditional_variance(&x).unwrap().into_iter().fold(f64::INFINITY, f64::min);
                assert!(e >= vmin - 1e-12);
            }
        }
    }

    #[test]
    fn cross_term_of_zero_series() {
        let model = GlarModel::independent(Family::Bernoulli, 2);
        let ts = TimeSeries::from_states(&[vec![0.0, 0.0], vec![0.0, 0.0]], 0, 0).unwrap();
        assert_eq!(cross_term_stat(&ts, &model).unwrap(), 0.0);
    }

    #[test]
    fn report_for_bernoulli_model() {
        let model = GlarModel::new(
            Family::Bernoulli,
            DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 0.0]),
            vec![0.0, 0.0],
        )
        .unwrap();
        let r = theory_report(&model, &ReportOptions::new(0.01, 100)).unwrap();
        assert_eq!(r.rho, 1);
        assert_eq!(r.params.xi, 1.0);
        assert!((r.params.omega - 1.0 / (3.0 + E)).abs() < 1e-15);
        let expected = 144.0 / (r.params.sigma * r.params.omega).powi(2) * 1.0 * 1e-4;
        assert!((r.frob_bound - expected).abs() < 1e-12 * expected);
        assert!((r.params.ln_sigma - r.params.sigma.ln()).abs() < 1e-14);
        assert!((r.ln_frob_bound - expected.ln()).abs() < 1e-12);
    }

    #[test]
    fn report_for_poisson_model() {
        let model = GlarModel::new(
            Family::Poisson,
            DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, -0.2]),
            vec![0.0, 0.0],
        )
        .unwrap();
        let r = theory_report(&model, &ReportOptions::new(0.01, 100)).unwrap();
        assert!(r.params.xi > 0.0 && r.params.xi < 1.0);
        assert!(r.c_logbound.unwrap() >= 5.0);
        assert!(r.frob_bound.is_finite() && r.frob_bound > 0.0);
        assert!((r.ln_frob_bound - r.frob_bound.ln()).abs() < 1e-9);
    }

    #[test]
    fn underflowing_poisson_constants_stay_finite_in_logs() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.9, -0.8, -0.7, 0.0]);
        let model = GlarModel::new(Family::Poisson, a, vec![0.0, 0.0]).unwrap();
        let r = theory_report(&model, &ReportOptions::new(0.01, 1000)).unwrap();
        assert_eq!(r.params.sigma, 0.0);
        assert!(r.params.ln_sigma.is_finite() && r.params.ln_sigma < -745.0);
        assert!(r.ln_frob_bound.is_finite() && r.ln_frob_bound > 1000.0);
    }
}
