//! L1, Hellinger and Kullback–Leibler functionals by quadrature, a closed-form
//! Gaussian oracle, and checkers for the Hellinger-to-KL inequalities.

mod functionals;
mod inequalities;

pub use functionals::*;
pub use inequalities::*;
