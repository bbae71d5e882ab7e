//! Multi-index arithmetic, standard-normal moments and the coefficient
//! recursion behind the bias-correction transform.

mod cancellation;
mod coefficients;
mod multi_index;

pub use cancellation::{check_cancellation, smoothing_residual_series, CancellationReport, PolyGaussian};
pub use coefficients::{
    cd_coefficients, cd_coefficients_exact, gaussian_moment, gaussian_moment_exact,
    univariate_gaussian_moment, weighted_abs_d_sum, CdPair, CoefficientTable,
    MAX_COEFFICIENT_ORDER,
};
pub use multi_index::{enumerate_multiindices, indices_of_order, MultiIndex};
pub use crate::scalar::{strict_ceil, strict_floor};
