use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::construct::{construct_h_sigma, padded_grid, truncate_to_compact};
use super::transform::apply_transform;
use crate::density::Density;
use crate::error::{Error, Result};
use crate::quadrature::GridSpec;
use crate::stats::{log_log_slope, LinearFit};
use crate::test_densities::TestDensity;

/// Error measured by [`approximation_error_scan`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ScanNorm {
    /// `max_x |K_σ(T f0) − f0|(x) / L(x)` over a grid.
    SupWeighted,
    /// `d_H(f0, K_σ h_σ)`.
    Hellinger,
    /// `d_H(f0, K_σ h̃_σ)` with the truncation exponent `ε`.
    HellingerTruncated { epsilon: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub sigma: f64,
    pub error: f64,
    /// Slope fitted to the rows up to and including this one.
    pub slope_so_far: Option<f64>,
    /// `P0(E_σ^c) / σ^{4β+2ε+8}` for truncated scans.
    pub mass_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub density: String,
    pub beta: f64,
    pub norm: ScanNorm,
    pub rows: Vec<ScanRow>,
    pub fit: LinearFit,
}

impl ScanReport {
    pub fn slope(&self) -> f64 {
        self.fit.slope
    }

    /// CSV with a one-line JSON header prefixed by `#`.
    pub fn to_csv(&self) -> String {
        let header = serde_json::json!({
            "density": self.density,
            "beta": self.beta,
            "norm": self.norm,
            "slope": self.fit.slope,
        });
        let mut out = format!("# {header}\nsigma,error,slope_so_far\n");
        for r in &self.rows {
            let slope = r.slope_so_far.map(|s| format!("{s:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{:e},{:e},{}", r.sigma, r.error, slope);
        }
        out
    }
}

fn check_ladder(sigmas: &[f64], tau0: f64) -> Result<()> {
    if sigmas.len() < 4 {
        return Err(Error::invalid("a scan needs at least 4 kernel scales"));
    }
    if sigmas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("kernel scales must be strictly decreasing"));
    }
    let cap = if tau0 > 0.0 { (1.0 / (2.0 * tau0)).sqrt() } else { f64::INFINITY };
    if sigmas.iter().any(|&s| !(s > 0.0 && s < cap)) {
        return Err(Error::invalid(format!("kernel scales must lie in (0, {cap})")));
    }
    Ok(())
}

/// Grid for the weighted sup error: the working box padded by `5σ`, with a
/// spacing of at most `σ/8` where the point budget allows.
fn sup_grid(f0: &dyn TestDensity, sigma: f64) -> Result<GridSpec<f64>> {
    let d = f0.dim();
    let b = f0.working_box();
    let width = b.iter().map(|p| p.1 - p.0).fold(0.0, f64::max) + 10.0 * sigma;
    let want = (8.0 * width / sigma).ceil() as usize;
    let cap = match d {
        1 => 1 << 15,
        2 => 1 << 10,
        _ => 1 << 6,
    };
    padded_grid(f0, 5.0 * sigma, want.next_power_of_two().clamp(256.min(cap), cap))
}

/// `max_x |K_σ(T_{β,σ} f0) − f0|(x) / L(x)` on a grid. Requires closed-form
/// smoothing of the density.
pub fn sup_weighted_error(f0: Arc<dyn TestDensity>, beta: f64, sigma: f64) -> Result<f64> {
    let t = apply_transform(f0.clone(), beta, sigma, None)?;
    let kt = t
        .smoothed()
        .ok_or_else(|| Error::invalid(format!("{} has no closed-form smoothing", f0.id())))?;
    let grid = sup_grid(f0.as_ref(), sigma)?;
    let ratios = grid.evaluate(|x| {
        let l = f0.envelope(x);
        let e = (kt.evaluate(x) - f0.evaluate(x)).abs();
        if l > 0.0 {
            e / l
        } else if e == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    });
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Approximation error of the smoothed transform (or of the constructed
/// densities) along a decreasing ladder of kernel scales, with the fitted
/// log-log slope.
pub fn approximation_error_scan(
    f0: Arc<dyn TestDensity>,
    beta: f64,
    sigmas: &[f64],
    norm: ScanNorm,
) -> Result<ScanReport> {
    check_ladder(sigmas, f0.tau0())?;
    let results: Vec<Result<(f64, Option<f64>)>> = sigmas
        .par_iter()
        .map(|&s| match norm {
            ScanNorm::SupWeighted => Ok((sup_weighted_error(f0.clone(), beta, s)?, None)),
            ScanNorm::Hellinger => Ok((construct_h_sigma(f0.clone(), beta, s)?.hellinger_to_base()?, None)),
            ScanNorm::HellingerTruncated { epsilon } => {
                let h = construct_h_sigma(f0.clone(), beta, s)?;
                let ht = truncate_to_compact(&h, epsilon, &f0.tail())?;
                let ratio = ht.truncation().map(|t| t.mass_ratio);
                Ok((ht.hellinger_to_base()?, ratio))
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(sigmas.len());
    for (i, (&sigma, r)) in sigmas.iter().zip(results).enumerate() {
        let (error, mass_ratio) = r?;
        rows.push(ScanRow {
            sigma,
            error,
            slope_so_far: None,
            mass_ratio,
        });
        if i >= 1 {
            let xs: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.error).collect();
            rows[i].slope_so_far = Some(log_log_slope(&xs, &ys).slope).filter(|s| s.is_finite());
        }
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let fit = log_log_slope(&xs, &ys);
    Ok(ScanReport {
        density: f0.id(),
        beta,
        norm,
        rows,
        fit,
    })
}
