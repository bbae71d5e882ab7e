//! Analytic densities with exact derivatives, envelopes, smoothness tags and
//! samplers. They serve as the ground truth `f0` everywhere else.

mod gaussian_mixture;
mod integrability;
mod spline;

use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::Result;
use crate::index_calculus::MultiIndex;
use crate::quadrature::{GridSpec, QuadratureRule};

pub use gaussian_mixture::{hermite_table, make_gaussian_mixture, GaussianMixtureDensity};
pub use integrability::{
    tail_window_integral, verify_integrability_conditions, IntegrabilityEntry, IntegrabilityReport,
    WindowVerdict, WindowedIntegral,
};
pub use spline::{make_spline_density, PiecewisePoly, SplineDensity};

/// Smoothness `β` and anisotropy `α` (with `Σ α_j = d`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    /// `f64::INFINITY` marks a super-smooth density.
    pub beta: f64,
    pub alpha: Vec<f64>,
}

impl Smoothness {
    pub fn isotropic(beta: f64, d: usize) -> Self {
        Smoothness {
            beta,
            alpha: vec![1.0; d],
        }
    }
}

/// Constants of the tail bound `f(x) ≤ c exp(−b‖x‖^τ)` for `‖x‖ > a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub tau: f64,
}

/// Which norm of the shift enters the envelope growth factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftNorm {
    /// `exp(τ0 ‖y‖₂²)`, the isotropic class.
    Euclidean,
    /// `exp(τ0 ‖y‖₁²)`, the anisotropic class.
    L1,
}

/// Closed-form Gaussian smoothing of a density's derivatives.
pub trait SmoothedDerivatives: Send + Sync {
    /// `(K D^k f)(x)` for the per-axis kernel scales this object was built with.
    fn eval(&self, k: &MultiIndex, x: &[f64]) -> f64;

    /// `Σ_k c_k (K D^k f)(x)`.
    fn eval_combination(&self, terms: &[(MultiIndex, f64)], x: &[f64]) -> f64 {
        terms.iter().map(|(k, c)| c * self.eval(k, x)).sum()
    }
}

/// A density serving as ground truth.
pub trait TestDensity: Density {
    /// Stable identifier.
    fn id(&self) -> String;

    fn smoothness(&self) -> Smoothness;

    /// `β` used for envelopes and integrability checks. Equal to the tag for
    /// finitely smooth densities; for super-smooth ones a caller-chosen value.
    fn working_beta(&self) -> f64 {
        self.smoothness().beta
    }

    /// Highest total derivative order the oracle supports.
    fn max_derivative_order(&self) -> u32;

    /// `D^k f(x)`.
    fn derivative(&self, k: &MultiIndex, x: &[f64]) -> Result<f64>;

    /// `Σ_k c_k D^k f(x)`.
    fn derivative_combination(&self, terms: &[(MultiIndex, f64)], x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (k, c) in terms {
            acc += c * self.derivative(k, x)?;
        }
        Ok(acc)
    }

    /// Envelope `L(x)` of the Hölder bound at order `⌊working_beta⌋`.
    fn envelope(&self, x: &[f64]) -> f64;

    /// `τ0` in the envelope growth factor.
    fn tau0(&self) -> f64 {
        0.0
    }

    fn shift_norm(&self) -> ShiftNorm {
        ShiftNorm::Euclidean
    }

    fn tail(&self) -> TailParams;

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Half-widths of a box outside which `f < 1e-12`.
    fn working_box(&self) -> Vec<(f64, f64)>;

    /// Closed-form smoothing with per-axis kernel standard deviations.
    fn smoothing(&self, _scales: &[f64]) -> Option<Arc<dyn SmoothedDerivatives>> {
        None
    }

    /// `P0(f < t)` when available in closed or semi-closed form.
    fn mass_below_level(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Largest `‖x‖` with `f(x) ≥ t`, when available analytically.
    fn superlevel_radius(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Compactly supported densities report a bounding box of the support.
    fn support_box(&self) -> Option<Vec<(f64, f64)>> {
        None
    }

    /// A grid over the working box.
    fn default_grid(&self, points_per_axis: usize) -> Result<GridSpec<f64>> {
        let b = self.working_box();
        GridSpec::new(
            b.iter().map(|p| p.0).collect(),
            b.iter().map(|p| p.1).collect(),
            vec![points_per_axis; b.len()],
            QuadratureRule::Midpoint,
        )
    }
}

/// Default points per axis for grids: 2^10 for `d ≤ 2`, 2^6 for `d = 3`.
pub fn default_points_per_axis(d: usize) -> usize {
    if d <= 2 {
        1 << 10
    } else {
        1 << 6
    }
}

impl<T: TestDensity + ?Sized> TestDensity for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn smoothness(&self) -> Smoothness {
        (**self).smoothness()
    }
    fn working_beta(&self) -> f64 {
        (**self).working_beta()
    }
    fn max_derivative_order(&self) -> u32 {
        (**self).max_derivative_order()
    }
    fn derivative(&self, k: &MultiIndex, x: &[f64]) -> Result<f64> {
        (**self).derivative(k, x)
    }
    fn derivative_combination(&self, terms: &[(MultiIndex, f64)], x: &[f64]) -> Result<f64> {
        (**self).derivative_combination(terms, x)
    }
    fn envelope(&self, x: &[f64]) -> f64 {
        (**self).envelope(x)
    }
    fn tau0(&self) -> f64 {
        (**self).tau0()
    }
    fn shift_norm(&self) -> ShiftNorm {
        (**self).shift_norm()
    }
    fn tail(&self) -> TailParams {
        (**self).tail()
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (**self).sample(rng)
    }
    fn working_box(&self) -> Vec<(f64, f64)> {
        (**self).working_box()
    }
    fn smoothing(&self, scales: &[f64]) -> Option<Arc<dyn SmoothedDerivatives>> {
        (**self).smoothing(scales)
    }
    fn mass_below_level(&self, t: f64) -> Option<f64> {
        (**self).mass_below_level(t)
    }
    fn superlevel_radius(&self, t: f64) -> Option<f64> {
        (**self).superlevel_radius(t)
    }
    fn support_box(&self) -> Option<Vec<(f64, f64)>> {
        (**self).support_box()
    }
}
