use serde::Serialize;

use super::TestDensity;
use crate::error::{Error, Result};
use crate::index_calculus::{enumerate_multiindices, MultiIndex};
use crate::quadrature::GridSpec;
use crate::scalar::strict_floor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowVerdict {
    Finite,
    Divergent,
    Undetermined,
}

/// Integral over nested centred windows (quarter, half and full box) with a
/// convergence verdict from the growth of the outer increments.
#[derive(Clone, Debug, Serialize)]
pub struct WindowedIntegral {
    pub windows: [f64; 3],
    pub verdict: WindowVerdict,
}

impl WindowedIntegral {
    pub fn value(&self) -> f64 {
        self.windows[2]
    }
}

/// Integrate `g` over the grid and over its centred sub-boxes of relative
/// size 1/4 and 1/2. The integral is judged finite when the outermost shell
/// adds less than `1e-3` of the total, divergent when shells do not shrink.
pub fn tail_window_integral<F>(grid: &GridSpec<f64>, g: F) -> WindowedIntegral
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let vals = grid.evaluate(|x| {
        let v = g(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    });
    let w = grid.flat_weights();
    let d = grid.dim();
    let centre: Vec<f64> = (0..d)
        .map(|a| 0.5 * (grid.lower()[a] + grid.upper()[a]))
        .collect();
    let half: Vec<f64> = (0..d)
        .map(|a| 0.5 * (grid.upper()[a] - grid.lower()[a]))
        .collect();
    let mut windows = [0.0; 3];
    for (flat, (v, wt)) in vals.iter().zip(&w).enumerate() {
        let x = grid.location(flat);
        let rel = (0..d)
            .map(|a| ((x[a] - centre[a]) / half[a]).abs())
            .fold(0.0, f64::max);
        let c = v * wt;
        windows[2] += c;
        if rel <= 0.5 {
            windows[1] += c;
        }
        if rel <= 0.25 {
            windows[0] += c;
        }
    }
    let outer = windows[2] - windows[1];
    let inner = windows[1] - windows[0];
    let verdict = if !windows[2].is_finite() {
        WindowVerdict::Divergent
    } else if outer.abs() <= 1e-3 * windows[2].abs() + 1e-300 {
        WindowVerdict::Finite
    } else if outer.abs() >= inner.abs() {
        WindowVerdict::Divergent
    } else {
        WindowVerdict::Undetermined
    };
    WindowedIntegral { windows, verdict }
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegrabilityEntry {
    pub index: MultiIndex,
    /// `k.` or `⟨k, α⟩`.
    pub weighted_order: f64,
    /// `(2β + ε) / weighted_order`.
    pub exponent: f64,
    pub value: f64,
    pub windows: [f64; 3],
    pub verdict: WindowVerdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegrabilityReport {
    pub density: String,
    pub beta: f64,
    pub epsilon: f64,
    pub anisotropic: bool,
    pub entries: Vec<IntegrabilityEntry>,
}

impl IntegrabilityReport {
    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.verdict == WindowVerdict::Finite)
    }
}

/// Evaluate `P0 (|D^k f0| / f0)^{(2β+ε)/k.}` for `1 ≤ k. ≤ ⌊β⌋`, or with
/// `⟨k, α⟩` replacing `k.` and index set `1 ≤ ⟨k,α⟩ < β` when the density is
/// anisotropic. Points where `f0 = 0` contribute nothing.
pub fn verify_integrability_conditions(
    f0: &dyn TestDensity,
    epsilon: f64,
    grid: &GridSpec<f64>,
) -> Result<IntegrabilityReport> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let beta = f0.working_beta();
    let alpha = f0.smoothness().alpha;
    let anisotropic = alpha.iter().any(|&a| (a - 1.0).abs() > 1e-12);
    let d = f0.dim();
    let indices: Vec<(MultiIndex, f64)> = if anisotropic {
        let amin = alpha.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_total = (beta / amin).ceil() as u32;
        enumerate_multiindices(d, max_total)
            .into_iter()
            .map(|k| {
                let w = k.weighted_order(&alpha);
                (k, w)
            })
            .filter(|(_, w)| *w >= 1.0 && *w < beta)
            .collect()
    } else {
        let fb = strict_floor(beta).max(0) as u32;
        enumerate_multiindices(d, fb)
            .into_iter()
            .filter(|k| k.order() >= 1)
            .map(|k| {
                let w = k.order() as f64;
                (k, w)
            })
            .collect()
    };
    if let Some((k, _)) = indices
        .iter()
        .find(|(k, _)| k.order() > f0.max_derivative_order())
    {
        return Err(Error::UnsupportedOrder {
            requested: k.order(),
            available: f0.max_derivative_order(),
        });
    }
    let mut entries = Vec::with_capacity(indices.len());
    for (k, w) in indices {
        let p = (2.0 * beta + epsilon) / w;
        let wi = tail_window_integral(grid, |x| {
            let f = f0.evaluate(x);
            if f <= 0.0 {
                return 0.0;
            }
            let dk = f0.derivative(&k, x).unwrap_or(f64::NAN);
            f * (dk.abs() / f).powf(p)
        });
        entries.push(IntegrabilityEntry {
            index: k,
            weighted_order: w,
            exponent: p,
            value: wi.value(),
            windows: wi.windows,
            verdict: wi.verdict,
        });
    }
    Ok(IntegrabilityReport {
        density: f0.id(),
        beta,
        epsilon,
        anisotropic,
        entries,
    })
}
