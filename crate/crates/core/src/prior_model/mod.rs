//! Dirichlet process mixture prior: stick-breaking draws, covariance priors,
//! Monte Carlo checks of the tail conditions and KL-ball prior mass.

mod covariance;
mod kl_ball;
mod wishart_facts;
mod spec;
mod stick;
mod tails;

pub use covariance::{sample_covariance, sample_precision_eigenvalues, CovarianceDraw};
pub use kl_ball::*;
pub use wishart_facts::*;
pub use spec::{CovariancePrior, PriorSpec};
pub use stick::*;
pub use tails::*;
