//! Rate formulas, contraction-rate experiments over a sample-size ladder,
//! deterministic reports and the named property suites.

mod config;
mod experiment;
mod formula;
mod registry;
mod report;
mod verify;

pub use config::*;
pub use experiment::*;
pub use formula::*;
pub use registry::*;
pub use report::*;
pub use verify::*;
