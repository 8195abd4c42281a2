//! Exponential-family primitives for the two implemented observation laws.
//!
//! Both families use the identity sufficient statistic, so a draw `x` with
//! natural parameter `theta` has density `h(x) exp(x * theta - Z(theta))`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::fmt;
use std::str::FromStr;

/// Observation family of a GLAR process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Support `{0, 1}`, `Z(θ) = log(1 + e^θ)`.
    Bernoulli,
    /// Support `ℤ≥0`, `Z(θ) = e^θ`.
    Poisson,
}

/// Which derivative of the log-partition function to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Value,
    First,
    Second,
}

impl Order {
    pub fn from_index(order: u8) -> Option<Self> {
        match order {
            0 => Some(Order::Value),
            1 => Some(Order::First),
            2 => Some(Order::Second),
            _ => None,
        }
    }
}

/// Logistic function evaluated without overflow for large `|θ|`.
#[inline]
pub fn sigmoid(theta: f64) -> f64 {
    if theta >= 0.0 {
        1.0 / (1.0 + (-theta).exp())
    } else {
        let e = theta.exp();
        e / (1.0 + e)
    }
}

impl Family {
    pub const ALL: [Family; 2] = [Family::Bernoulli, Family::Poisson];

    pub fn name(self) -> &'static str {
        match self {
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
        }
    }

    /// `Z`, `Z'` or `Z''` at `theta`.
    pub fn log_partition(self, theta: f64, order: Order) -> f64 {
        match (self, order) {
            (Family::Bernoulli, Order::Value) => theta.max(0.0) + (-theta.abs()).exp().ln_1p(),
            (Family::Bernoulli, Order::First) => sigmoid(theta),
            (Family::Bernoulli, Order::Second) => {
                let e = (-theta.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            (Family::Poisson, _) => theta.exp(),
        }
    }

    #[inline]
    pub fn z(self, theta: f64) -> f64 {
        self.log_partition(theta, Order::Value)
    }

    /// Conditional mean `Z'(θ)`.
    #[inline]
    pub fn mean(self, theta: f64) -> f64 {
        self.log_partition(theta, Order::First)
    }

    /// Conditional variance `Z''(θ)`.
    #[inline]
    pub fn variance(self, theta: f64) -> f64 {
        self.log_partition(theta, Order::Second)
    }

    /// Sufficient statistic. Identity for both families.
    #[inline]
    pub fn phi(self, x: f64) -> f64 {
        x
    }

    /// Log of the base measure `h(x)`; `-inf` outside the support.
    pub fn log_base_measure(self, x: f64) -> f64 {
        if !self.in_support(x) {
            return f64::NEG_INFINITY;
        }
        match self {
            Family::Bernoulli => 0.0,
            Family::Poisson => -ln_gamma(x + 1.0),
        }
    }

    pub fn base_measure(self, x: f64) -> f64 {
        self.log_base_measure(x).exp()
    }

    pub fn in_support(self, x: f64) -> bool {
        match self {
            Family::Bernoulli => x == 0.0 || x == 1.0,
            Family::Poisson => x >= 0.0 && x.fract() == 0.0 && x.is_finite(),
        }
    }

    /// Log density `log h(x) + x θ - Z(θ)`.
    pub fn log_density(self, x: f64, theta: f64) -> f64 {
        self.log_base_measure(x) + self.phi(x) * theta - self.z(theta)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(Family::Bernoulli),
            "poisson" => Ok(Family::Poisson),
            other => Err(format!("unknown family `{other}`")),
        }
    }
}

/// Free-function form of [`Family::log_partition`] with a numeric order.
///
/// Panics if `order > 2`.
pub fn log_partition(family: Family, theta: f64, order: u8) -> f64 {
    let order = Order::from_index(order).expect("log-partition order must be 0, 1 or 2");
    family.log_partition(theta, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bernoulli_values_at_zero() {
        assert!(close(log_partition(Family::Bernoulli, 0.0, 0), 2f64.ln(), 1e-15));
        assert!(close(log_partition(Family::Bernoulli, 0.0, 1), 0.5, 1e-15));
        assert!(close(log_partition(Family::Bernoulli, 0.0, 2), 0.25, 1e-15));
    }

    #[test]
    fn poisson_all_orders_agree() {
        for order in 0..3 {
            assert!(close(log_partition(Family::Poisson, 0.0, order), 1.0, 1e-15));
            assert!(close(log_partition(Family::Poisson, 1.0, order), std::f64::consts::E, 1e-15));
        }
    }

    #[test]
    fn bernoulli_is_stable_at_extremes() {
        let f = Family::Bernoulli;
        assert!(close(f.z(800.0), 800.0, 1e-12));
        assert!(f.z(-800.0) >= 0.0 && f.z(-800.0) < 1e-300);
        assert!(close(f.mean(800.0), 1.0, 1e-15));
        assert_eq!(f.mean(-800.0), 0.0);
        assert!(f.variance(40.0) > 0.0);
    }

    #[test]
    fn finite_differences_match_derivatives() {
        let h = 1e-5;
        for family in Family::ALL {
            for i in 0..=40 {
                let theta = -10.0 + 0.5 * i as f64;
                let dz = (family.z(theta + h) - family.z(theta - h)) / (2.0 * h);
                let d2z = (family.mean(theta + h) - family.mean(theta - h)) / (2.0 * h);
                let z1 = family.mean(theta);
                let z2 = family.variance(theta);
                assert!((dz - z1).abs() <= 1e-6 * z1.abs(), "{family} θ={theta}: {dz} vs {z1}");
                assert!((d2z - z2).abs() <= 1e-6 * z2.abs(), "{family} θ={theta}: {d2z} vs {z2}");
                assert!(z2 > 0.0);
            }
        }
    }

    #[test]
    fn bernoulli_variance_capped_at_quarter() {
        for i in 0..=2000 {
            let theta = -10.0 + 0.01 * i as f64;
            assert!(Family::Bernoulli.variance(theta) <= 0.25 + 1e-16);
        }
    }

    #[test]
    fn densities_normalize() {
        for theta in [-2.0, 0.0, 1.5] {
            let b: f64 = [0.0, 1.0]
                .iter()
                .map(|&x| Family::Bernoulli.log_density(x, theta).exp())
                .sum();
            assert!(close(b, 1.0, 1e-14));
            let p: f64 = (0..100)
                .map(|k| Family::Poisson.log_density(k as f64, theta).exp())
                .sum();
            assert!(close(p, 1.0, 1e-12));
        }
    }

    #[test]
    fn parse_family_names() {
        assert_eq!("Poisson".parse::<Family>().unwrap(), Family::Poisson);
        assert!("gaussian".parse::<Family>().is_err());
    }
}
