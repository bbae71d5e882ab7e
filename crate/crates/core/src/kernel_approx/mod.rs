//! The bias-correcting transform `T_{β,σ}`, Gaussian smoothing, the
//! constructions `g_σ`, `h_σ`, `h̃_σ`, and approximation-order scans.

mod construct;
mod convolve;
mod scan;
mod transform;

pub use construct::*;
pub use convolve::*;
pub use scan::*;
pub use transform::*;
