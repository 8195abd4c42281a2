//! Numerical checks of the theoretical statements, each summarized as one
//! row of a pass/fail table.

use super::{
    bernoulli_cross_ceiling, cross_term_stat, gamma_conditional, index_to_state, mixing_tv_bound,
    omega_bernoulli, poisson_bound_report, poisson_cross_ceiling, poisson_tail_bound, poisson_upper_tail,
    stationary_residuals, truncated_poisson_variance, tv_curve,
};
use crate::error::Result;
use crate::family::{Family, Order};
use crate::model::GlarModel;
use crate::rng::{derive_trial_seed, SimRng};
use crate::simulator::{simulate, InitialState};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    /// Family of the Monte Carlo cross-term check.
    pub family: Family,
    /// Dimension of the cross-term check; also caps the exact chain checks.
    pub dim: usize,
    pub seeds: usize,
    pub transitions: usize,
    pub base_seed: u64,
    pub gamma_models: usize,
    pub gamma_max_dim: usize,
    pub chain_models: usize,
    pub tv_horizon: u32,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            family: Family::Bernoulli,
            dim: 5,
            seeds: 100,
            transitions: 10_000,
            base_seed: 0,
            gamma_models: 50,
            gamma_max_dim: 8,
            chain_models: 20,
            tv_horizon: 50,
        }
    }
}

impl VerifyOptions {
    /// Largest `M` used by the kernel-based checks.
    pub fn chain_max_dim(&self) -> usize {
        self.dim.clamp(1, 3)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantRow {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    /// Violations tolerated before the row fails (nonzero only for probabilistic statements).
    pub allowed: usize,
    pub passed: bool,
    /// Worst observed margin; negative values mean a violation.
    pub worst_margin: f64,
}

impl InvariantRow {
    fn new(name: &str, checked: usize, violations: usize, allowed: usize, worst_margin: f64) -> Self {
        Self { name: name.to_owned(), checked, violations, allowed, passed: violations <= allowed, worst_margin }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub rows: Vec<InvariantRow>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["invariant", "checked", "violations", "allowed", "passed", "worst_margin"])?;
        for r in &self.rows {
            w.write_record([
                r.name.clone(),
                r.checked.to_string(),
                r.violations.to_string(),
                r.allowed.to_string(),
                if r.passed { "pass" } else { "fail" }.to_owned(),
                format!("{:e}", r.worst_margin),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }
}

/// Random Bernoulli model: each off-pattern entry is nonzero with probability 1/2,
/// values uniform on `[lo, hi]`, offsets uniform on `[-1, 1]`.
fn random_bernoulli(rng: &mut SimRng, dim: usize, lo: f64, hi: f64, symmetric: bool) -> Result<GlarModel> {
    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let start = if symmetric { i } else { 0 };
        for j in start..dim {
            if rng.uniform() < 0.5 {
                let v = rng.uniform_in(lo, hi);
                a[(i, j)] = v;
                if symmetric {
                    a[(j, i)] = v;
                }
            }
        }
    }
    let nu = (0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    GlarModel::new(Family::Bernoulli, a, nu)
}

fn model_dim(rng: &mut SimRng, max_dim: usize) -> usize {
    1 + rng.below(max_dim as u64) as usize
}

/// Minimum eigenvalue of `Γ` over every conditioning state against `(3 + e^{ν̃+ρã})^{-1}`.
pub fn check_gamma_floor(models: usize, max_dim: usize, seed: u64) -> Result<InvariantRow> {
    let mut rng = SimRng::new(seed, 10);
    let (mut checked, mut violations, mut worst) = (0, 0, f64::INFINITY);
    for _ in 0..models {
        let dim = model_dim(&mut rng, max_dim);
        let model = random_bernoulli(&mut rng, dim, -2.0, 2.0, false)?;
        let sp = model.sparsity(0.0);
        let floor = omega_bernoulli(model.nu_tilde(), sp.rho, model.a_tilde());
        for k in 0..1usize << dim {
            let (_, min_eig) = gamma_conditional(&model, &index_to_state(k, dim))?;
            let margin = min_eig - floor;
            checked += 1;
            worst = worst.min(margin);
            if margin < -1e-12 * floor {
                violations += 1;
            }
        }
    }
    Ok(InvariantRow::new("gamma_min_eig_floor", checked, violations, 0, worst))
}

/// `πP = π` and detailed balance to `tol` for symmetric models with entries in `[-1, 1]`.
pub fn check_stationarity(models: usize, max_dim: usize, seed: u64, tol: f64) -> Result<[InvariantRow; 2]> {
    let mut rng = SimRng::new(seed, 11);
    let (mut fixed_bad, mut balance_bad, mut worst_fixed, mut worst_balance) = (0, 0, f64::INFINITY, f64::INFINITY);
    for _ in 0..models {
        let dim = model_dim(&mut rng, max_dim);
        let model = random_bernoulli(&mut rng, dim, -1.0, 1.0, true)?;
        let (fixed, balance) = stationary_residuals(&model)?;
        worst_fixed = worst_fixed.min(tol - fixed);
        worst_balance = worst_balance.min(tol - balance);
        fixed_bad += usize::from(fixed > tol);
        balance_bad += usize::from(balance > tol);
    }
    Ok([
        InvariantRow::new("stationary_fixed_point", models, fixed_bad, 0, worst_fixed),
        InvariantRow::new("detailed_balance", models, balance_bad, 0, worst_balance),
    ])
}

/// Exact TV distance against the mixing bound, over every start state and `t <= horizon`,
/// for symmetric models with entries in `[-1, 0]`.
pub fn check_mixing(models: usize, max_dim: usize, horizon: u32, seed: u64) -> Result<InvariantRow> {
    let mut rng = SimRng::new(seed, 12);
    let (mut checked, mut violations, mut worst) = (0, 0, f64::INFINITY);
    for _ in 0..models {
        let dim = model_dim(&mut rng, max_dim);
        let model = random_bernoulli(&mut rng, dim, -1.0, 0.0, true)?;
        let nu_max = model.nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for k in 0..1usize << dim {
            let curve = tv_curve(&model, &index_to_state(k, dim), horizon)?;
            for (t, tv) in curve.into_iter().enumerate() {
                let margin = mixing_tv_bound(t as u32, dim, nu_max, Family::Bernoulli) - tv;
                checked += 1;
                worst = worst.min(margin);
                violations += usize::from(margin < -1e-12);
            }
        }
    }
    Ok(InvariantRow::new("tv_mixing_bound", checked, violations, 0, worst))
}

/// Truncated variance floor on the `(λ, U)` pairs satisfying the hypothesis.
pub fn check_truncated_variance() -> Result<InvariantRow> {
    let (mut checked, mut violations, mut worst) = (0, 0, f64::INFINITY);
    for rate in [0.5, 1.0, 2.0] {
        for u in [6.0, 8.0, 12.0, 20.0] {
            let Ok(v) = truncated_poisson_variance(rate, u) else { continue };
            let margin = v - 0.8 * rate;
            checked += 1;
            worst = worst.min(margin);
            violations += usize::from(margin < 0.0);
        }
    }
    Ok(InvariantRow::new("truncated_poisson_variance", checked, violations, 0, worst))
}

/// Exact `P(X > λ + t)` against the tail bound.
pub fn check_tail_bound() -> InvariantRow {
    let (mut checked, mut violations, mut worst) = (0, 0, f64::INFINITY);
    for rate in [0.5, 1.0, 2.0, 5.0] {
        for t in 1..=20 {
            let t = t as f64;
            let margin = poisson_tail_bound(rate, t) - poisson_upper_tail(rate, rate + t);
            checked += 1;
            worst = worst.min(margin);
            violations += usize::from(margin < 0.0);
        }
    }
    InvariantRow::new("poisson_tail_bound", checked, violations, 0, worst)
}

/// Cross-term statistics of independent seeded iid series (`A = 0`, `ν = 0`).
pub fn cross_term_samples(family: Family, dim: usize, transitions: usize, seeds: usize, base_seed: u64) -> Result<Vec<f64>> {
    let model = GlarModel::independent(family, dim);
    let init = InitialState::Given(vec![0.0; dim]);
    (0..seeds)
        .into_par_iter()
        .map(|k| {
            // One burn-in step replaces the fixed zero start with a draw from the iid law.
            let series = simulate(&model, &init, transitions, 1, derive_trial_seed(base_seed, 0, k as u64))?;
            cross_term_stat(&series, &model)
        })
        .collect()
}

pub fn cross_term_ceiling(family: Family, dim: usize, transitions: usize) -> Result<f64> {
    Ok(match family {
        Family::Bernoulli => bernoulli_cross_ceiling(dim, transitions),
        Family::Poisson => {
            let alpha = 1.0 - 0.1 / dim as f64;
            let b = poisson_bound_report(dim, transitions, 0.0, alpha)?;
            poisson_cross_ceiling(dim, transitions, b.c_logbound, 0.0)
        }
    })
}

/// Exceedances of the cross-term ceiling; at most 1% of seeds may exceed it.
pub fn check_cross_term(family: Family, dim: usize, transitions: usize, seeds: usize, base_seed: u64) -> Result<InvariantRow> {
    let ceiling = cross_term_ceiling(family, dim, transitions)?;
    let stats = cross_term_samples(family, dim, transitions, seeds, base_seed)?;
    let violations = stats.iter().filter(|&&s| s > ceiling).count();
    let worst = stats.iter().map(|s| ceiling - s).fold(f64::INFINITY, f64::min);
    let name = format!("cross_term_{}", family.name());
    Ok(InvariantRow::new(&name, seeds, violations, seeds / 100, worst))
}

/// Central differences of `Z` and `Z'` against `Z'` and `Z''` on `[-10, 10]`.
pub fn check_log_partition() -> InvariantRow {
    let h = 1e-5;
    let (mut checked, mut violations, mut worst) = (0, 0, f64::INFINITY);
    for family in Family::ALL {
        for i in 0..=40 {
            let theta = -10.0 + 0.5 * i as f64;
            for (lower, upper) in [(Order::Value, Order::First), (Order::First, Order::Second)] {
                let fd = (family.log_partition(theta + h, lower) - family.log_partition(theta - h, lower)) / (2.0 * h);
                let exact = family.log_partition(theta, upper);
                let rel = (fd - exact).abs() / exact.abs().max(1.0);
                checked += 1;
                worst = worst.min(1e-6 - rel);
                violations += usize::from(rel > 1e-6);
            }
        }
    }
    InvariantRow::new("log_partition_derivatives", checked, violations, 0, worst)
}

/// Every invariant check with the given options.
pub fn run_verify(options: &VerifyOptions) -> Result<VerifyReport> {
    let seed = options.base_seed;
    let chain_dim = options.chain_max_dim();
    let mut rows = vec![check_gamma_floor(options.gamma_models, options.gamma_max_dim, seed)?];
    rows.extend(check_stationarity(options.chain_models, chain_dim, seed, 1e-10)?);
    rows.push(check_mixing(options.chain_models, chain_dim, options.tv_horizon, seed)?);
    rows.push(check_truncated_variance()?);
    rows.push(check_tail_bound());
    rows.push(check_cross_term(options.family, options.dim, options.transitions, options.seeds, seed)?);
    rows.push(check_log_partition());
    Ok(VerifyReport { rows })
}
