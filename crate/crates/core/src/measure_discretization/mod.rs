//! Discrete approximations of mixing measures: moment matching, lattice
//! snapping, and partition-based perturbation bounds.

mod axis;
mod discretize;
mod measure;
mod partition;
mod smooth;
mod snap;

pub use axis::{gauss_rule_from_discrete, AxisLaw};
pub use discretize::*;
pub use measure::MixingMeasure;
pub use partition::{partition_perturbation_bound, Cell, Partition, PerturbationReport};
pub use snap::{snap_to_grid, SnapReport};
pub use smooth::{error_grid, mixture_values, product_values, sup_and_l1};
