use std::sync::Arc;

use serde::Serialize;

use super::convolve::convolve_grid;
use super::transform::{apply_transform, TransformedFunction};
use crate::density::Density;
use crate::divergences::hellinger_from_values;
use crate::error::{Error, Result};
use crate::quadrature::{GridFunction, GridSpec, QuadratureRule};
use crate::test_densities::{tail_window_integral, TailParams, TestDensity, WindowVerdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// `g_σ = f_σ + ½ f0 1{f_σ < f0/2}`.
    GSigma,
    /// `h_σ = g_σ / ∫ g_σ`.
    HSigma,
    /// `h_σ` restricted to `E_σ` and renormalised.
    HTildeSigma,
}

/// The superlevel set `E_σ = {f0 ≥ σ^{(4β+2ε+8)/δ}}` and its bounding radius.
#[derive(Clone, Debug, Serialize)]
pub struct TruncationSet {
    pub epsilon: f64,
    pub delta: f64,
    pub threshold: f64,
    pub a0: f64,
    /// `a_σ = a0 (log 1/σ)^{1/τ}`.
    pub a_sigma: f64,
    /// Largest `‖x‖` on `E_σ` (or an upper bound for it).
    pub level_set_radius: f64,
    /// `P0(E_σ^c)`.
    pub mass_outside: f64,
    /// `P0(E_σ^c) / σ^{4β+2ε+8}`.
    pub mass_ratio: f64,
    /// `∫_{E_σ} h_σ`.
    pub retained_mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstructionDiagnostics {
    /// `Σ |d_k| |log σ|^{−k./2}`; must stay below 1/2.
    pub smallness_sum: f64,
    pub c_sigma: f64,
    /// `(c_σ − 1) / σ^{2β}`.
    pub normalizer_excess_ratio: f64,
    /// `∫ f0 1{f_σ < f0/2}`, the mass where the positivity fix is active.
    pub low_set_mass: f64,
    /// Grid points where `f_σ < 0`.
    pub negative_points: usize,
}

/// A density built from the bias-corrected transform of `f0`.
#[derive(Clone)]
pub struct ConstructedDensity {
    stage: Stage,
    transform: TransformedFunction,
    grid: GridSpec<f64>,
    c_sigma: f64,
    truncation: Option<TruncationSet>,
    diagnostics: ConstructionDiagnostics,
}

impl std::fmt::Debug for ConstructedDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstructedDensity")
            .field("stage", &self.stage)
            .field("sigma", &self.transform.sigma())
            .field("c_sigma", &self.c_sigma)
            .field("truncation", &self.truncation)
            .finish()
    }
}

/// Box around the density's working box padded by `pad`, with `n` midpoint
/// nodes per axis.
pub fn padded_grid(f0: &dyn TestDensity, pad: f64, n: usize) -> Result<GridSpec<f64>> {
    let b = f0.working_box();
    GridSpec::new(
        b.iter().map(|p| p.0 - pad).collect(),
        b.iter().map(|p| p.1 + pad).collect(),
        vec![n; b.len()],
        QuadratureRule::Midpoint,
    )
}

/// Points per axis used for constructions: `2^14` in one dimension,
/// `2^10` in two, `2^7` in three.
pub fn construction_points(d: usize) -> usize {
    match d {
        1 => 1 << 14,
        2 => 1 << 10,
        _ => 1 << 7,
    }
}

/// Default grid for constructions at kernel scale `sigma`.
pub fn construction_grid(f0: &dyn TestDensity, sigma: f64) -> Result<GridSpec<f64>> {
    padded_grid(f0, 10.0 * sigma, construction_points(f0.dim()))
}

/// `Σ |d_k| |log σ|^{−k./2}` over the index set of the transform.
pub fn smallness_sum(t: &TransformedFunction) -> f64 {
    let l = (1.0 / t.sigma()).ln();
    t.index_set()
        .iter()
        .map(|(k, dk)| dk.abs() * l.powf(-(k.order() as f64) / 2.0))
        .sum()
}

/// Build `h_σ` on the default construction grid.
pub fn construct_h_sigma(f0: Arc<dyn TestDensity>, beta: f64, sigma: f64) -> Result<ConstructedDensity> {
    let grid = construction_grid(f0.as_ref(), sigma)?;
    construct_h_sigma_on(f0, beta, sigma, grid)
}

/// Build `h_σ` with normaliser computed on the given grid.
pub fn construct_h_sigma_on(
    f0: Arc<dyn TestDensity>,
    beta: f64,
    sigma: f64,
    grid: GridSpec<f64>,
) -> Result<ConstructedDensity> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::Precondition(format!(
            "sigma = {sigma} must lie in (0, 1) so that log(1/sigma) > 0"
        )));
    }
    let t = apply_transform(f0.clone(), beta, sigma, None)?;
    let s = smallness_sum(&t);
    if s >= 0.5 {
        return Err(Error::Precondition(format!(
            "sum_k |d_k| |log sigma|^(-k./2) = {s:.6} is not below 1/2 at sigma = {sigma}"
        )));
    }
    let f0v = grid.evaluate(|x| f0.evaluate(x));
    let fsv = grid.evaluate(|x| t.evaluate(x));
    let negative_points = fsv.iter().filter(|v| **v < 0.0).count();
    let low: Vec<f64> = f0v
        .iter()
        .zip(&fsv)
        .map(|(&f, &fs)| if fs < 0.5 * f { f } else { 0.0 })
        .collect();
    let g: Vec<f64> = fsv
        .iter()
        .zip(&low)
        .map(|(&fs, &l)| fs + 0.5 * l)
        .collect();
    let c_sigma = grid.sum_values(&g);
    let low_set_mass = grid.sum_values(&low);
    if !(c_sigma > 0.0) || !c_sigma.is_finite() {
        return Err(Error::NonFinite {
            what: "normaliser of g_sigma".into(),
            location: vec![sigma],
        });
    }
    let diagnostics = ConstructionDiagnostics {
        smallness_sum: s,
        c_sigma,
        normalizer_excess_ratio: (c_sigma - 1.0) / sigma.powf(2.0 * beta),
        low_set_mass,
        negative_points,
    };
    Ok(ConstructedDensity {
        stage: Stage::HSigma,
        transform: t,
        grid,
        c_sigma,
        truncation: None,
        diagnostics,
    })
}

/// Largest `δ ∈ {1, 1/2, 1/4, …}` (down to `2^-10`) for which
/// `P0(f0^{−δ}) = ∫_{f0>0} f0^{1−δ}` is judged finite on a box twice the
/// working box.
pub fn select_delta(f0: &dyn TestDensity) -> Result<f64> {
    let d = f0.dim();
    let n = match d {
        1 => 1 << 13,
        2 => 1 << 9,
        _ => 1 << 6,
    };
    let b = f0.working_box();
    let grid = GridSpec::new(
        b.iter().map(|p| p.0 - (p.1 - p.0) * 0.5).collect(),
        b.iter().map(|p| p.1 + (p.1 - p.0) * 0.5).collect(),
        vec![n; d],
        QuadratureRule::Midpoint,
    )?;
    let mut delta = 1.0;
    for _ in 0..=10 {
        let w = tail_window_integral(&grid, |x| {
            let f = f0.evaluate(x);
            if f > 0.0 {
                f.powf(1.0 - delta)
            } else {
                0.0
            }
        });
        if w.verdict == WindowVerdict::Finite {
            return Ok(delta);
        }
        delta *= 0.5;
    }
    Err(Error::DegenerateTruncation(
        "no delta >= 2^-10 gives a finite negative moment".into(),
    ))
}

/// Restrict `h_σ` to `E_σ = {f0 ≥ σ^{(4β+2ε+8)/δ}}` and renormalise.
pub fn truncate_to_compact(h: &ConstructedDensity, epsilon: f64, tail: &TailParams) -> Result<ConstructedDensity> {
    if h.stage != Stage::HSigma {
        return Err(Error::invalid("truncation applies to an h_sigma-stage density"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let f0 = h.transform.base().clone();
    let sigma = h.transform.sigma();
    let beta = h.transform.beta();
    let delta = select_delta(f0.as_ref())?;
    let power = 4.0 * beta + 2.0 * epsilon + 8.0;
    let threshold = sigma.powf(power / delta);
    let a0 = ((8.0 * beta + 4.0 * epsilon + 16.0) / (tail.b * delta)).powf(1.0 / tail.tau);
    let a_sigma = a0 * (1.0 / sigma).ln().powf(1.0 / tail.tau);

    let grid = &h.grid;
    let f0v = grid.evaluate(|x| f0.evaluate(x));
    if !f0v.iter().any(|&v| v >= threshold) {
        return Err(Error::DegenerateTruncation(format!(
            "no grid point has f0 >= {threshold:e}"
        )));
    }
    let hv = h.grid_values();
    let inside: Vec<f64> = hv
        .iter()
        .zip(&f0v)
        .map(|(&v, &f)| if f >= threshold { v } else { 0.0 })
        .collect();
    let retained_mass = grid.sum_values(&inside);
    if !(retained_mass > 0.0) {
        return Err(Error::DegenerateTruncation("h_sigma has no mass on E_sigma".into()));
    }
    let mass_outside = match f0.mass_below_level(threshold) {
        Some(m) => m,
        None => {
            let out: Vec<f64> = f0v.iter().map(|&f| if f < threshold { f } else { 0.0 }).collect();
            grid.sum_values(&out).max(0.0)
        }
    };
    let level_set_radius = match f0.superlevel_radius(threshold) {
        Some(r) => r,
        None => {
            let diag: f64 = (0..grid.dim()).map(|a| grid.spacing(a).powi(2)).sum::<f64>().sqrt();
            f0v.iter()
                .enumerate()
                .filter(|(_, &f)| f >= threshold)
                .map(|(i, _)| crate::linalg::norm(&grid.location(i)))
                .fold(0.0, f64::max)
                + diag
        }
    };
    let truncation = TruncationSet {
        epsilon,
        delta,
        threshold,
        a0,
        a_sigma,
        level_set_radius,
        mass_outside,
        mass_ratio: mass_outside / sigma.powf(power),
        retained_mass,
    };
    Ok(ConstructedDensity {
        stage: Stage::HTildeSigma,
        transform: h.transform.clone(),
        grid: h.grid.clone(),
        c_sigma: h.c_sigma,
        truncation: Some(truncation),
        diagnostics: h.diagnostics.clone(),
    })
}

impl ConstructedDensity {
    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn transform(&self) -> &TransformedFunction {
        &self.transform
    }

    pub fn grid(&self) -> &GridSpec<f64> {
        &self.grid
    }

    pub fn c_sigma(&self) -> f64 {
        self.c_sigma
    }

    pub fn truncation(&self) -> Option<&TruncationSet> {
        self.truncation.as_ref()
    }

    pub fn diagnostics(&self) -> &ConstructionDiagnostics {
        &self.diagnostics
    }

    /// `E_σ ⊆ {‖x‖ ≤ a_σ}`.
    pub fn containment_holds(&self) -> Option<bool> {
        self.truncation
            .as_ref()
            .map(|t| t.level_set_radius <= t.a_sigma)
    }

    /// The `g_σ` stage of the same construction.
    pub fn as_g_sigma(&self) -> ConstructedDensity {
        let mut g = self.clone();
        g.stage = Stage::GSigma;
        g.truncation = None;
        g
    }

    fn g_at(&self, x: &[f64]) -> f64 {
        let f = self.transform.base().evaluate(x);
        let fs = self.transform.evaluate(x);
        if fs < 0.5 * f {
            fs + 0.5 * f
        } else {
            fs
        }
    }

    /// Values on the construction grid.
    pub fn grid_values(&self) -> Vec<f64> {
        self.grid.evaluate(|x| self.evaluate(x))
    }

    /// `K_σ` of this density on the construction grid. The transform part is
    /// smoothed in closed form when available; the positivity correction and
    /// the truncation are smoothed by FFT.
    pub fn smoothed_on_grid(&self) -> Result<GridFunction> {
        let f0 = self.transform.base().clone();
        let scales = self.transform.kernel_scales();
        let grid = &self.grid;
        let g_smoothed: Vec<f64> = match self.transform.smoothed() {
            Some(kt) => {
                let kt_vals = grid.evaluate(|x| kt.evaluate(x));
                let corr = grid.evaluate(|x| {
                    let f = f0.evaluate(x);
                    let fs = self.transform.evaluate(x);
                    if fs < 0.5 * f {
                        0.5 * f
                    } else {
                        0.0
                    }
                });
                let kc = convolve_grid(&GridFunction::new(grid.clone(), corr), &scales)?;
                kt_vals.iter().zip(&kc.values).map(|(a, b)| a + b).collect()
            }
            None => {
                let g = grid.evaluate(|x| self.g_at(x));
                convolve_grid(&GridFunction::new(grid.clone(), g), &scales)?.values
            }
        };
        let c = if self.stage == Stage::GSigma { 1.0 } else { self.c_sigma };
        let mut kh: Vec<f64> = g_smoothed.iter().map(|v| v / c).collect();
        if let Some(tr) = &self.truncation {
            let outside = grid.evaluate(|x| {
                if f0.evaluate(x) < tr.threshold {
                    self.g_at(x) / self.c_sigma
                } else {
                    0.0
                }
            });
            let ko = convolve_grid(&GridFunction::new(grid.clone(), outside), &scales)?;
            for (v, o) in kh.iter_mut().zip(&ko.values) {
                *v = (*v - o) / tr.retained_mass;
            }
        }
        Ok(GridFunction::new(grid.clone(), kh))
    }

    /// `d_H(f0, K_σ ·)` on the construction grid.
    pub fn hellinger_to_base(&self) -> Result<f64> {
        let f0 = self.transform.base().clone();
        let f0v = self.grid.evaluate(|x| f0.evaluate(x));
        let k = self.smoothed_on_grid()?;
        Ok(hellinger_from_values(&self.grid, &f0v, &k.values))
    }
}

impl Density for ConstructedDensity {
    fn dim(&self) -> usize {
        self.transform.dim()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let g = self.g_at(x);
        match (&self.stage, &self.truncation) {
            (Stage::GSigma, _) => g,
            (Stage::HSigma, _) => g / self.c_sigma,
            (Stage::HTildeSigma, Some(tr)) => {
                if self.transform.base().evaluate(x) >= tr.threshold {
                    g / self.c_sigma / tr.retained_mass
                } else {
                    0.0
                }
            }
            (Stage::HTildeSigma, None) => unreachable!("truncated stage always carries its set"),
        }
    }
}
