//! Numerical laboratory for Dirichlet-process location mixtures of normals.
//!
//! The crate builds the objects needed to study how well such mixtures
//! approximate smooth densities: higher-order kernel transforms, density
//! truncations, discretized mixing measures, stick-breaking priors with
//! covariance priors, sieves with explicit covering nets, a truncated blocked
//! Gibbs sampler, and a harness that measures empirical contraction rates.

pub mod density;
pub mod divergences;
pub mod error;
pub mod index_calculus;
pub mod kernel_approx;
pub mod linalg;
pub mod measure_discretization;
pub mod posterior_gibbs;
pub mod prior_model;
pub mod quadrature;
pub mod rate_lab;
pub mod rng;
pub mod scalar;
pub mod sieve_entropy;
pub mod special;
pub mod stats;
pub mod test_densities;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

/// Coefficient table in exact rational arithmetic.
pub type ExactCoefficientTable = index_calculus::CoefficientTable<num_rational::BigRational>;
/// Coefficient table rounded to `f64`.
pub type CoefficientTableF64 = index_calculus::CoefficientTable<f64>;
/// Coefficient table rounded to `f32`.
pub type CoefficientTableF32 = index_calculus::CoefficientTable<f32>;
/// Quadrature grid over `f64`.
pub type Grid = quadrature::GridSpec<f64>;
/// Quadrature grid over `f32`.
pub type GridF32 = quadrature::GridSpec<f32>;
