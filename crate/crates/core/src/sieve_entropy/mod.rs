//! The sieve of location mixtures with bounded atoms, small stick tail and a
//! covariance eigenvalue window: membership, constructive covering nets,
//! entropy counts and the prior mass of the complement.

mod complement;
mod coverage;
mod entropy;
mod net;
mod spec;

pub use complement::*;
pub use coverage::*;
pub use entropy::*;
pub use net::*;
pub use spec::*;
