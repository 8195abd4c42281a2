//! Simulation, ℓ1-regularized maximum likelihood estimation and theoretical
//! diagnostics for sparse generalized linear autoregressive (GLAR) processes.
//!
//! Each coordinate of `X_{t+1}` is drawn from an exponential family
//! (Bernoulli or Poisson) with natural parameter `ν_m + a_m·X_t`; the network
//! matrix `A` is estimated row by row with a proximal gradient solver.
//!
//! ```
//! use glarnet::{estimator, family::Family, model::GlarModel, simulator};
//! use nalgebra::DMatrix;
//!
//! let a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, -0.8, -0.2]);
//! let model = GlarModel::new(Family::Poisson, a, vec![0.0, 0.0]).unwrap();
//! let series = simulator::simulate(&model, &simulator::InitialState::Poisson1, 500, 0, 7).unwrap();
//! let lambda = estimator::default_lambda(series.transitions());
//! let est = estimator::fit(Family::Poisson, &model.nu, &series, &estimator::EstimatorConfig::with_lambda(lambda)).unwrap();
//! assert!(est.all_converged());
//! ```

pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod family;
pub mod io;
pub mod model;
pub mod plot;
pub mod rng;
pub mod simulator;
pub mod sparsity;
pub mod theory;

pub use error::{GlarError, Result};
pub use family::Family;
pub use model::GlarModel;
