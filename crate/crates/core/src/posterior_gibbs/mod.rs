//! Truncated blocked Gibbs sampler for the Dirichlet location mixture with a
//! common covariance, and posterior loss summaries.

mod reproduction;
mod run;
mod sampler;

pub use reproduction::*;
pub use run::*;
pub use sampler::{GibbsChain, GibbsState};
