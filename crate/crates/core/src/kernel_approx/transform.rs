use std::sync::Arc;

use num_traits::ToPrimitive;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::index_calculus::{cd_coefficients_exact, enumerate_multiindices, MultiIndex};
use crate::scalar::strict_floor;
use crate::test_densities::TestDensity;

/// Isotropic transform or the anisotropic one with weights `α` (`Σ α_j = d`).
#[derive(Clone, Debug, PartialEq)]
pub enum TransformMode {
    Isotropic,
    Anisotropic(Vec<f64>),
}

impl TransformMode {
    pub fn alpha(&self, d: usize) -> Vec<f64> {
        match self {
            TransformMode::Isotropic => vec![1.0; d],
            TransformMode::Anisotropic(a) => a.clone(),
        }
    }

    /// Per-axis kernel standard deviations: `σ` or `σ^{α_j}`.
    pub fn kernel_scales(&self, sigma: f64, d: usize) -> Vec<f64> {
        match self {
            TransformMode::Isotropic => vec![sigma; d],
            TransformMode::Anisotropic(a) => a.iter().map(|&aj| sigma.powf(aj)).collect(),
        }
    }
}

/// `T_{β,σ} f0 = f0 − Σ d_k σ^{w(k)} D^k f0`, with `w(k) = k.` over
/// `1 ≤ k. ≤ ⌊β⌋`, or `w(k) = ⟨k, α⟩` over `1 ≤ ⟨k, α⟩ < β`.
#[derive(Clone)]
pub struct TransformedFunction {
    f0: Arc<dyn TestDensity>,
    sigma: f64,
    beta: f64,
    mode: TransformMode,
    /// `(k, c_k)` with `c_0 = 1` and `c_k = −d_k σ^{w(k)}`; zero terms dropped.
    terms: Vec<(MultiIndex, f64)>,
    /// Index set of the sum together with the exact `d_k` (including zeros).
    used: Vec<(MultiIndex, f64)>,
}

impl std::fmt::Debug for TransformedFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformedFunction")
            .field("f0", &self.f0.id())
            .field("sigma", &self.sigma)
            .field("beta", &self.beta)
            .field("mode", &self.mode)
            .field("terms", &self.terms)
            .finish()
    }
}

/// Index set and exact coefficients `d_k` of the transform.
pub(crate) fn transform_indices(d: usize, beta: f64, mode: &TransformMode) -> Result<Vec<(MultiIndex, f64)>> {
    match mode {
        TransformMode::Isotropic => {
            let fb = strict_floor(beta).max(0) as u32;
            let table = cd_coefficients_exact(d, fb)?;
            Ok(enumerate_multiindices(d, fb)
                .into_iter()
                .filter(|k| k.order() >= 1)
                .map(|k| {
                    let dk = table.d(&k).to_f64().unwrap();
                    (k, dk)
                })
                .collect())
        }
        TransformMode::Anisotropic(alpha) => {
            if alpha.len() != d {
                return Err(Error::invalid("anisotropy vector has the wrong length"));
            }
            if alpha.iter().any(|&a| !(a > 0.0)) {
                return Err(Error::invalid("anisotropy entries must be positive"));
            }
            let total: f64 = alpha.iter().sum();
            if (total - d as f64).abs() > 1e-9 {
                return Err(Error::invalid(format!("anisotropy sums to {total}, expected {d}")));
            }
            let amin = alpha.iter().cloned().fold(f64::INFINITY, f64::min);
            let max_total = ((beta / amin).ceil() as u32).min(crate::index_calculus::MAX_COEFFICIENT_ORDER);
            let table = cd_coefficients_exact(d, max_total)?;
            Ok(enumerate_multiindices(d, max_total)
                .into_iter()
                .filter(|k| {
                    let w = k.weighted_order(alpha);
                    w >= 1.0 - 1e-12 && w < beta - 1e-12
                })
                .map(|k| {
                    let dk = table.d(&k).to_f64().unwrap();
                    (k, dk)
                })
                .collect())
        }
    }
}

/// Build `T_{β,σ} f0` (or its anisotropic version when `alpha` is given).
pub fn apply_transform(
    f0: Arc<dyn TestDensity>,
    beta: f64,
    sigma: f64,
    alpha: Option<Vec<f64>>,
) -> Result<TransformedFunction> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma must be positive"));
    }
    if !(beta > 0.0) {
        return Err(Error::invalid("beta must be positive"));
    }
    let d = f0.dim();
    let mode = match alpha {
        Some(a) => TransformMode::Anisotropic(a),
        None => TransformMode::Isotropic,
    };
    let alpha_v = mode.alpha(d);
    let used = transform_indices(d, beta, &mode)?;
    let top = f0.max_derivative_order();
    for (k, _) in &used {
        if k.order() > top {
            return Err(Error::UnsupportedOrder {
                requested: k.order(),
                available: top,
            });
        }
    }
    let mut terms = vec![(MultiIndex::zeros(d), 1.0)];
    for (k, dk) in &used {
        if *dk != 0.0 {
            let w = k.weighted_order(&alpha_v);
            terms.push((k.clone(), -dk * sigma.powf(w)));
        }
    }
    Ok(TransformedFunction {
        f0,
        sigma,
        beta,
        mode,
        terms,
        used,
    })
}

impl TransformedFunction {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> &TransformMode {
        &self.mode
    }

    pub fn base(&self) -> &Arc<dyn TestDensity> {
        &self.f0
    }

    /// `(k, coefficient)` pairs, the zeroth term being `(0, 1)`.
    pub fn terms(&self) -> &[(MultiIndex, f64)] {
        &self.terms
    }

    /// Index set of the correction sum with each `d_k`, zeros included.
    pub fn index_set(&self) -> &[(MultiIndex, f64)] {
        &self.used
    }

    /// True when every correction coefficient vanishes (e.g. `β ≤ 2`).
    pub fn is_identity(&self) -> bool {
        self.terms.len() == 1
    }

    /// Per-axis kernel standard deviations matching the transform.
    pub fn kernel_scales(&self) -> Vec<f64> {
        self.mode.kernel_scales(self.sigma, self.f0.dim())
    }

    pub fn try_evaluate(&self, x: &[f64]) -> Result<f64> {
        self.f0.derivative_combination(&self.terms, x)
    }

    /// Closed-form `K_σ (T f0)` when the base density supports it.
    pub fn smoothed(&self) -> Option<SmoothedTransform> {
        self.f0.smoothing(&self.kernel_scales()).map(|s| SmoothedTransform {
            smoother: s,
            terms: self.terms.clone(),
            d: self.f0.dim(),
        })
    }
}

impl Density for TransformedFunction {
    fn dim(&self) -> usize {
        self.f0.dim()
    }

    /// May be negative.
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.try_evaluate(x).unwrap_or(f64::NAN)
    }
}

/// `K_σ(T_{β,σ} f0)` evaluated in closed form.
#[derive(Clone)]
pub struct SmoothedTransform {
    smoother: Arc<dyn crate::test_densities::SmoothedDerivatives>,
    terms: Vec<(MultiIndex, f64)>,
    d: usize,
}

impl Density for SmoothedTransform {
    fn dim(&self) -> usize {
        self.d
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.smoother.eval_combination(&self.terms, x)
    }
}
