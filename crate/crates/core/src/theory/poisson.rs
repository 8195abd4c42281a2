//! Poisson-specific lemmas: truncated variance floor, one-sided tail bound and
//! the observation ceilings `C log(MT)` and `U`.

use crate::error::{GlarError, Result};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

const E: f64 = std::f64::consts::E;

pub fn poisson_pmf(rate: f64, k: u64) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let k = k as f64;
    (-rate + k * rate.ln() - ln_gamma(k + 1.0)).exp()
}

/// Variance of Poisson(`rate`) conditioned on `X <= U`, by direct summation.
///
/// Refuses inputs outside `U >= max(6, 1.5 e λ, λ + 5)`, where the 4λ/5 floor is claimed.
pub fn truncated_poisson_variance(rate: f64, u: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(GlarError::Precondition(format!("rate must be positive, got {rate}")));
    }
    let needed = 6f64.max(1.5 * E * rate).max(rate + 5.0);
    if !(u >= needed) {
        return Err(GlarError::Precondition(format!(
            "truncation level needs U >= max(6, 1.5 e lambda, lambda + 5) = {needed:.4}, got {u}"
        )));
    }
    let top = u.floor() as u64;
    let (mut mass, mut first, mut second) = (0.0, 0.0, 0.0);
    for k in 0..=top {
        let p = poisson_pmf(rate, k);
        let kf = k as f64;
        mass += p;
        first += kf * p;
        second += kf * kf * p;
    }
    let mean = first / mass;
    Ok(second / mass - mean * mean)
}

/// `exp(−(t/4) log(1 + t/(2λ)))`, bounding `P(X − λ > t)` for `X ~ Poisson(λ)`.
pub fn poisson_tail_bound(rate: f64, t: f64) -> f64 {
    (-(t / 4.0) * (1.0 + t / (2.0 * rate)).ln()).exp()
}

/// Exact `P(X > x)` by summing the upper tail until terms vanish.
pub fn poisson_upper_tail(rate: f64, x: f64) -> f64 {
    let start = if x < 0.0 { 0 } else { x.floor() as u64 + 1 };
    let mut k = start;
    let mut p = poisson_pmf(rate, k);
    let mut total = 0.0;
    loop {
        total += p;
        k += 1;
        p *= rate / k as f64;
        if (k as f64) > rate && p < total * 1e-18 {
            break;
        }
        if p == 0.0 && (k as f64) > rate {
            break;
        }
    }
    total
}

/// Smallest admissible observation ceilings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoissonBounds {
    /// Boundary of `C > max(e^{ν_max}(2e − 1), 4 + e^{ν_max})`; any larger value is admissible.
    pub c_logbound: f64,
    /// `C log(MT)`.
    pub x_ceiling: f64,
    /// Boundary of `U > max(e^{ν_max}(2e − 1), 4 + e^{ν_max} + 4α log 2/(1 − α) − 4 log(1 − α))`.
    #[serde(rename = "U")]
    pub u: f64,
    /// `1 − (1 − α) M`.
    pub xi: f64,
}

pub fn poisson_bound_report(dim: usize, transitions: usize, nu_max: f64, alpha: f64) -> Result<PoissonBounds> {
    let m = dim as f64;
    let log_mt = (m * transitions as f64).ln();
    if !(log_mt >= 1.0) {
        return Err(GlarError::Precondition(format!("needs log(MT) >= 1, got {log_mt:.4}")));
    }
    let lower = (m - 1.0) / m;
    if !(alpha > lower && alpha < 1.0) {
        return Err(GlarError::Precondition(format!(
            "alpha must lie in ((M-1)/M, 1) = ({lower}, 1), got {alpha}"
        )));
    }
    let rate = nu_max.exp();
    let c_logbound = (rate * (2.0 * E - 1.0)).max(4.0 + rate);
    let u = (rate * (2.0 * E - 1.0))
        .max(4.0 + rate + 4.0 * alpha * 2f64.ln() / (1.0 - alpha) - 4.0 * (1.0 - alpha).ln());
    Ok(PoissonBounds { c_logbound, x_ceiling: c_logbound * log_mt, u, xi: 1.0 - (1.0 - alpha) * m })
}
