//! ℓ1-regularized maximum likelihood estimation of the network matrix.
//!
//! The objective
//!
//! ```text
//! (1/T) Σ_t Σ_m [ Z(ν_m + a_m·X_t) − (a_m·X_t) X_{t+1,m} ] + λ Σ_m ‖a_m‖_1
//! ```
//!
//! is a sum of independent row problems, each solved by proximal gradient
//! descent from the zero vector. The proximal map of `τ‖·‖_1` plus a box
//! containing zero is soft-thresholding followed by clipping.
//!
//! Summation order is fixed: the per-row loss accumulates over `t = 0..T` in
//! order, `‖a‖_1` accumulates over `j = 0..M` in order, and the full objective
//! accumulates row objectives over `m = 0..M` in order. Row results do not
//! depend on how rows are scheduled across threads.

use crate::error::{GlarError, Result};
use crate::family::Family;
use crate::model::GlarModel;
use crate::simulator::TimeSeries;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Step-size rule of the proximal gradient loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepPolicy {
    Fixed { eta: f64 },
    /// Start at `eta0` and multiply by `beta` until the quadratic upper bound holds.
    Backtracking { eta0: f64, beta: f64 },
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::Backtracking { eta0: 1.0, beta: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub lambda: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Threshold on the scaled fixed-point residual `‖a − prox_step(a)‖_∞ / η`.
    pub tol: f64,
    pub max_iter: usize,
    pub step_policy: StepPolicy,
    /// FISTA momentum with restart whenever the objective would increase.
    pub acceleration: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            a_min: f64::NEG_INFINITY,
            a_max: f64::INFINITY,
            tol: 1e-7,
            max_iter: 5000,
            step_policy: StepPolicy::default(),
            acceleration: true,
        }
    }
}

impl EstimatorConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GlarError::InvalidConfig(msg));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be a finite nonnegative number, got {}", self.lambda));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if !(self.a_min <= 0.0 && self.a_max >= 0.0) {
            return bad(format!("box [{}, {}] must contain 0", self.a_min, self.a_max));
        }
        match self.step_policy {
            StepPolicy::Fixed { eta } if !(eta > 0.0) => bad(format!("step size must be positive, got {eta}")),
            StepPolicy::Backtracking { eta0, beta } if !(eta0 > 0.0) || !(beta > 0.0 && beta < 1.0) => {
                bad(format!("backtracking needs eta0 > 0 and beta in (0,1), got {eta0}, {beta}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowDiagnostics {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub a_hat: DMatrix<f64>,
    pub lambda: f64,
    pub objective_per_row: Vec<f64>,
    pub iterations_per_row: Vec<usize>,
    pub converged_per_row: Vec<bool>,
    pub final_residual_per_row: Vec<f64>,
}

impl EstimateResult {
    pub fn all_converged(&self) -> bool {
        self.converged_per_row.iter().all(|&c| c)
    }

    /// Row objectives summed in row order.
    pub fn objective(&self) -> f64 {
        self.objective_per_row.iter().fold(0.0, |acc, &v| acc + v)
    }

    pub fn to_json(&self) -> Result<String> {
        let m = self.a_hat.nrows();
        let file = EstimateFile {
            lambda: self.lambda,
            a_hat: (0..m).map(|i| (0..m).map(|j| self.a_hat[(i, j)]).collect()).collect(),
            objective_per_row: self.objective_per_row.clone(),
            iterations_per_row: self.iterations_per_row.clone(),
            converged_per_row: self.converged_per_row.clone(),
            final_residual_per_row: self.final_residual_per_row.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: EstimateFile = serde_json::from_str(text)?;
        let m = f.a_hat.len();
        if f.a_hat.iter().any(|r| r.len() != m) {
            return Err(GlarError::Format("A_hat must be square".into()));
        }
        let flat: Vec<f64> = f.a_hat.into_iter().flatten().collect();
        Ok(Self {
            a_hat: DMatrix::from_row_slice(m, m, &flat),
            lambda: f.lambda,
            objective_per_row: f.objective_per_row,
            iterations_per_row: f.iterations_per_row,
            converged_per_row: f.converged_per_row,
            final_residual_per_row: f.final_residual_per_row,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct EstimateFile {
    lambda: f64,
    #[serde(rename = "A_hat")]
    a_hat: Vec<Vec<f64>>,
    objective_per_row: Vec<f64>,
    iterations_per_row: Vec<usize>,
    converged_per_row: Vec<bool>,
    final_residual_per_row: Vec<f64>,
}

/// Row-major CSV of a square matrix, no header.
pub fn matrix_to_csv(a: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", a[(i, j)]);
        }
        out.push('\n');
    }
    out
}

/// `0.1 / √T`.
pub fn default_lambda(transitions: usize) -> f64 {
    0.1 / (transitions as f64).sqrt()
}

/// Smooth part of a row problem.
pub trait RowLoss: Sync {
    fn dim(&self) -> usize;
    fn value(&self, a: &[f64]) -> f64;
    /// Writes the gradient into `grad` and returns the same value as [`RowLoss::value`].
    fn value_grad(&self, a: &[f64], grad: &mut [f64]) -> f64;
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

#[inline]
fn l1(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, x| acc + x.abs())
}

/// Negative log-likelihood of row `m`, up to terms constant in `a`.
pub struct GlmRowLoss<'a> {
    pub family: Family,
    pub nu_m: f64,
    pub series: &'a TimeSeries,
    pub m: usize,
}

impl RowLoss for GlmRowLoss<'_> {
    fn dim(&self) -> usize {
        self.series.dim()
    }

    fn value(&self, a: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (x, next) in self.series.transitions_iter() {
            let lin = dot(a, x);
            acc += self.family.z(self.nu_m + lin) - lin * self.family.phi(next[self.m]);
        }
        acc / self.series.transitions() as f64
    }

    fn value_grad(&self, a: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut acc = 0.0;
        for (x, next) in self.series.transitions_iter() {
            let lin = dot(a, x);
            let theta = self.nu_m + lin;
            let y = self.family.phi(next[self.m]);
            acc += self.family.z(theta) - lin * y;
            let w = self.family.mean(theta) - y;
            for (g, &xj) in grad.iter_mut().zip(x) {
                *g += w * xj;
            }
        }
        let n = self.series.transitions() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        acc / n
    }
}

/// `(1/n) ‖y − X a‖²` over design rows `X`.
pub struct SquaredRowLoss<'a> {
    pub design: &'a [Vec<f64>],
    pub response: &'a [f64],
}

impl RowLoss for SquaredRowLoss<'_> {
    fn dim(&self) -> usize {
        self.design.first().map(Vec::len).unwrap_or(0)
    }

    fn value(&self, a: &[f64]) -> f64 {
        let acc = self
            .design
            .iter()
            .zip(self.response)
            .fold(0.0, |acc, (x, &y)| acc + (y - dot(a, x)).powi(2));
        acc / self.design.len() as f64
    }

    fn value_grad(&self, a: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut acc = 0.0;
        for (x, &y) in self.design.iter().zip(self.response) {
            let r = y - dot(a, x);
            acc += r.powi(2);
            for (g, &xj) in grad.iter_mut().zip(x) {
                *g -= 2.0 * r * xj;
            }
        }
        let n = self.design.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        acc / n
    }
}

fn check_row(series: &TimeSeries, a: &[f64], m: usize) -> Result<()> {
    if a.len() != series.dim() {
        return Err(GlarError::DimensionMismatch { expected: series.dim(), got: a.len() });
    }
    if m >= series.dim() {
        return Err(GlarError::DimensionMismatch { expected: series.dim(), got: m + 1 });
    }
    Ok(())
}

/// `(1/T) Σ_t [Z(ν_m + a·X_t) − (a·X_t) φ(X_{t+1,m})]`.
pub fn nll_row(family: Family, nu_m: f64, a: &[f64], series: &TimeSeries, m: usize) -> Result<f64> {
    check_row(series, a, m)?;
    Ok(GlmRowLoss { family, nu_m, series, m }.value(a))
}

/// `(1/T) Σ_t [Z'(ν_m + a·X_t) − φ(X_{t+1,m})] X_t`.
pub fn grad_nll_row(family: Family, nu_m: f64, a: &[f64], series: &TimeSeries, m: usize) -> Result<Vec<f64>> {
    check_row(series, a, m)?;
    let mut grad = vec![0.0; a.len()];
    GlmRowLoss { family, nu_m, series, m }.value_grad(a, &mut grad);
    Ok(grad)
}

/// `clip(soft_threshold(v_j, τ), a_min, a_max)` elementwise.
pub fn prox_l1_box(v: &[f64], tau: f64, a_min: f64, a_max: f64) -> Vec<f64> {
    v.iter().map(|&x| prox_scalar(x, tau, a_min, a_max)).collect()
}

#[inline]
fn prox_scalar(x: f64, tau: f64, a_min: f64, a_max: f64) -> f64 {
    let shrunk = x.signum() * (x.abs() - tau).max(0.0);
    let shrunk = if shrunk == 0.0 { 0.0 } else { shrunk };
    shrunk.clamp(a_min, a_max)
}

struct Solver<'c, L: RowLoss> {
    loss: L,
    config: &'c EstimatorConfig,
    row: usize,
}

struct ProxStep {
    point: Vec<f64>,
    smooth: f64,
    eta: f64,
}

impl<L: RowLoss> Solver<'_, L> {
    fn composite(&self, smooth: f64, a: &[f64]) -> f64 {
        smooth + self.config.lambda * l1(a)
    }

    fn prox_point(&self, base: &[f64], grad: &[f64], eta: f64) -> Vec<f64> {
        let tau = eta * self.config.lambda;
        base.iter()
            .zip(grad)
            .map(|(&b, &g)| prox_scalar(b - eta * g, tau, self.config.a_min, self.config.a_max))
            .collect()
    }

    /// One proximal step from `base`; shrinks `eta` under backtracking.
    fn prox_step(&self, base: &[f64], f_base: f64, grad: &[f64], mut eta: f64, iteration: usize) -> Result<ProxStep> {
        let divergent = || GlarError::DivergentStep { row: self.row, iteration };
        match self.config.step_policy {
            StepPolicy::Fixed { .. } => {
                let point = self.prox_point(base, grad, eta);
                let smooth = self.loss.value(&point);
                if !smooth.is_finite() {
                    return Err(divergent());
                }
                Ok(ProxStep { point, smooth, eta })
            }
            StepPolicy::Backtracking { beta, .. } => loop {
                let point = self.prox_point(base, grad, eta);
                let smooth = self.loss.value(&point);
                if smooth.is_finite() {
                    let mut lin = 0.0;
                    let mut sq = 0.0;
                    for ((&p, &b), &g) in point.iter().zip(base).zip(grad) {
                        let d = p - b;
                        lin += g * d;
                        sq += d * d;
                    }
                    let model = f_base + lin + sq / (2.0 * eta);
                    if smooth <= model + 1e-12 * f_base.abs().max(1.0) {
                        return Ok(ProxStep { point, smooth, eta });
                    }
                }
                eta *= beta;
                if eta < 1e-30 {
                    return Err(divergent());
                }
            },
        }
    }

    fn residual(a: &[f64], step: &[f64], eta: f64) -> f64 {
        a.iter().zip(step).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs())) / eta
    }

    fn initial_eta(&self) -> f64 {
        match self.config.step_policy {
            StepPolicy::Fixed { eta } => eta,
            StepPolicy::Backtracking { eta0, .. } => eta0,
        }
    }

    fn finish(&self, a: Vec<f64>, iterations: usize, converged: bool, residual: f64) -> (Vec<f64>, RowDiagnostics) {
        let objective = self.composite(self.loss.value(&a), &a);
        (a, RowDiagnostics { objective, iterations, converged, residual })
    }

    fn run(&self, mut trace: Option<&mut Vec<f64>>) -> Result<(Vec<f64>, RowDiagnostics)> {
        let n = self.loss.dim();
        let mut eta = self.initial_eta();
        let mut x = vec![0.0; n];
        let mut gx = vec![0.0; n];
        let mut fx = self.loss.value_grad(&x, &mut gx);
        if !fx.is_finite() {
            return Err(GlarError::DivergentStep { row: self.row, iteration: 0 });
        }
        let mut obj_x = self.composite(fx, &x);
        if let Some(t) = trace.as_deref_mut() {
            t.push(obj_x);
        }

        let mut y = x.clone();
        let mut gy = gx.clone();
        let mut fy = fx;
        let mut momentum = 1.0f64;
        let mut residual = f64::INFINITY;

        for iteration in 0..self.config.max_iter {
            if !self.config.acceleration {
                let step = self.prox_step(&x, fx, &gx, eta, iteration)?;
                eta = step.eta;
                residual = Self::residual(&x, &step.point, eta);
                if residual <= self.config.tol {
                    return Ok(self.finish(x, iteration, true, residual));
                }
                x = step.point;
                fx = self.loss.value_grad(&x, &mut gx);
                obj_x = self.composite(fx, &x);
                if let Some(t) = trace.as_deref_mut() {
                    t.push(obj_x);
                }
                continue;
            }

            let from_x = y == x;
            let step = if fy.is_finite() {
                Some(self.prox_step(&y, fy, &gy, eta, iteration)?)
            } else {
                None
            };
            let accepted = match step {
                Some(s) if from_x || self.composite(s.smooth, &s.point) <= obj_x => Some(s),
                _ => None,
            };
            let Some(step) = accepted else {
                // Momentum overshoot: restart from the current iterate.
                y.clone_from(&x);
                gy.clone_from(&gx);
                fy = fx;
                momentum = 1.0;
                continue;
            };
            eta = step.eta;
            if from_x {
                residual = Self::residual(&x, &step.point, eta);
                if residual <= self.config.tol {
                    return Ok(self.finish(x, iteration, true, residual));
                }
            }
            let x_prev = std::mem::replace(&mut x, step.point);
            fx = self.loss.value_grad(&x, &mut gx);
            obj_x = self.composite(fx, &x);
            if let Some(t) = trace.as_deref_mut() {
                t.push(obj_x);
            }

            residual = Self::residual(&x, &self.prox_point(&x, &gx, eta), eta);
            if residual <= self.config.tol {
                return Ok(self.finish(x, iteration + 1, true, residual));
            }

            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            momentum = next;
            y = x.iter().zip(&x_prev).map(|(&a, &b)| a + beta * (a - b)).collect();
            if beta == 0.0 {
                gy.clone_from(&gx);
                fy = fx;
            } else {
                fy = self.loss.value_grad(&y, &mut gy);
            }
        }
        Ok(self.finish(x, self.config.max_iter, false, residual))
    }
}

/// Proximal gradient on an arbitrary smooth row loss.
pub fn minimize_row<L: RowLoss>(loss: L, config: &EstimatorConfig, row: usize) -> Result<(Vec<f64>, RowDiagnostics)> {
    config.validate()?;
    Solver { loss, config, row }.run(None)
}

/// Fit of one row of the network matrix.
pub fn fit_row(
    family: Family,
    nu_m: f64,
    series: &TimeSeries,
    m: usize,
    config: &EstimatorConfig,
) -> Result<(Vec<f64>, RowDiagnostics)> {
    check_row(series, &vec![0.0; series.dim()], m)?;
    minimize_row(GlmRowLoss { family, nu_m, series, m }, config, m)
}

/// As [`fit_row`], also returning the composite objective of every accepted iterate.
pub fn fit_row_traced(
    family: Family,
    nu_m: f64,
    series: &TimeSeries,
    m: usize,
    config: &EstimatorConfig,
) -> Result<(Vec<f64>, RowDiagnostics, Vec<f64>)> {
    check_row(series, &vec![0.0; series.dim()], m)?;
    config.validate()?;
    let mut trace = Vec::new();
    let (a, d) = Solver { loss: GlmRowLoss { family, nu_m, series, m }, config, row: m }.run(Some(&mut trace))?;
    Ok((a, d, trace))
}

/// Row-decoupled fit of the full matrix. Rows run on the current rayon pool.
pub fn fit(family: Family, nu: &[f64], series: &TimeSeries, config: &EstimatorConfig) -> Result<EstimateResult> {
    let dim = series.dim();
    if nu.len() != dim {
        return Err(GlarError::DimensionMismatch { expected: dim, got: nu.len() });
    }
    config.validate()?;
    let rows: Vec<Result<(Vec<f64>, RowDiagnostics)>> =
        (0..dim).into_par_iter().map(|m| fit_row(family, nu[m], series, m, config)).collect();

    let mut failed = Vec::new();
    let mut a_hat = DMatrix::zeros(dim, dim);
    let mut out = EstimateResult {
        a_hat: DMatrix::zeros(0, 0),
        lambda: config.lambda,
        objective_per_row: Vec::with_capacity(dim),
        iterations_per_row: Vec::with_capacity(dim),
        converged_per_row: Vec::with_capacity(dim),
        final_residual_per_row: Vec::with_capacity(dim),
    };
    for (m, row) in rows.into_iter().enumerate() {
        match row {
            Ok((a, d)) => {
                for (j, v) in a.into_iter().enumerate() {
                    a_hat[(m, j)] = v;
                }
                out.objective_per_row.push(d.objective);
                out.iterations_per_row.push(d.iterations);
                out.converged_per_row.push(d.converged);
                out.final_residual_per_row.push(d.residual);
            }
            Err(e) => failed.push((m, e)),
        }
    }
    if !failed.is_empty() {
        let rows: Vec<String> = failed.iter().map(|(m, e)| format!("row {m}: {e}")).collect();
        return Err(GlarError::InvalidConfig(format!("{} row fit(s) failed: {}", failed.len(), rows.join("; "))));
    }
    out.a_hat = a_hat;
    Ok(out)
}

/// Full objective `Σ_m (nll_row(m) + λ‖a_m‖_1)`, accumulated in row order.
pub fn rmle_objective(family: Family, nu: &[f64], a: &DMatrix<f64>, series: &TimeSeries, lambda: f64) -> Result<f64> {
    let dim = series.dim();
    if nu.len() != dim || a.nrows() != dim || a.ncols() != dim {
        return Err(GlarError::DimensionMismatch { expected: dim, got: a.nrows() });
    }
    let mut total = 0.0;
    for m in 0..dim {
        let row: Vec<f64> = (0..dim).map(|j| a[(m, j)]).collect();
        total += nll_row(family, nu[m], &row, series, m)? + lambda * l1(&row);
    }
    Ok(total)
}

/// Largest violation of the ℓ1 optimality conditions for an unconstrained box:
/// `|g_j| <= λ` where `a_j = 0` and `g_j = −sign(a_j) λ` elsewhere.
pub fn kkt_violation(grad: &[f64], a: &[f64], lambda: f64) -> f64 {
    grad.iter().zip(a).fold(0.0f64, |acc, (&g, &x)| {
        let v = if x == 0.0 { (g.abs() - lambda).max(0.0) } else { (g + x.signum() * lambda).abs() };
        acc.max(v)
    })
}

/// `C[i,j] = (1/T) Σ_t X_{t,i} (φ(X_{t+1,j}) − E[φ(X_{t+1,j}) | X_t])` under `model`.
pub fn innovation_cross_moments(model: &GlarModel, series: &TimeSeries) -> Result<DMatrix<f64>> {
    let dim = model.dim();
    if series.dim() != dim {
        return Err(GlarError::DimensionMismatch { expected: dim, got: series.dim() });
    }
    let mut c = DMatrix::zeros(dim, dim);
    let mut eps = vec![0.0; dim];
    for (x, next) in series.transitions_iter() {
        for j in 0..dim {
            eps[j] = model.family.phi(next[j]) - model.family.mean(model.theta_row(j, x));
        }
        for i in 0..dim {
            if x[i] != 0.0 {
                for j in 0..dim {
                    c[(i, j)] += x[i] * eps[j];
                }
            }
        }
    }
    Ok(c / series.transitions() as f64)
}

/// `max_m (2/T) ‖Σ_t ε_{t,m} X_t‖_∞`, the smallest λ admitted by the error bound.
pub fn empirical_lambda_floor(model: &GlarModel, series: &TimeSeries) -> Result<f64> {
    let c = innovation_cross_moments(model, series)?;
    Ok(2.0 * c.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Minimizes `(1/n)‖y − X a‖² + λ‖a‖_1` by the same proximal loop.
pub fn lasso_design(design: &[Vec<f64>], response: &[f64], lambda: f64, config: &EstimatorConfig) -> Result<Vec<f64>> {
    if design.len() != response.len() || design.is_empty() {
        return Err(GlarError::DimensionMismatch { expected: design.len(), got: response.len() });
    }
    let config = EstimatorConfig { lambda, ..config.clone() };
    Ok(minimize_row(SquaredRowLoss { design, response }, &config, 0)?.0)
}

/// LASSO regression of `X_{t+1,m}` on `X_t` (empirical comparison only).
pub fn lasso_baseline(series: &TimeSeries, m: usize, lambda: f64, config: &EstimatorConfig) -> Result<Vec<f64>> {
    check_row(series, &vec![0.0; series.dim()], m)?;
    let design: Vec<Vec<f64>> = series.transitions_iter().map(|(x, _)| x.to_vec()).collect();
    let response: Vec<f64> = series.transitions_iter().map(|(_, next)| next[m]).collect();
    lasso_design(&design, &response, lambda, config)
}
