use serde::Serialize;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::linalg::CovarianceSpec;
use crate::quadrature::GridSpec;

/// Densities are floored at this value before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

/// `d_H = {∫(√p − √q)²}^{1/2}` from values on a grid; negatives count as zero.
pub fn hellinger_from_values(grid: &GridSpec<f64>, p: &[f64], q: &[f64]) -> f64 {
    let sq: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| (a.max(0.0).sqrt() - b.max(0.0).sqrt()).powi(2))
        .collect();
    grid.sum_values(&sq).max(0.0).sqrt()
}

/// `∫|p − q|` from values on a grid.
pub fn l1_from_values(grid: &GridSpec<f64>, p: &[f64], q: &[f64]) -> f64 {
    let diff: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a - b).abs()).collect();
    grid.sum_values(&diff)
}

fn evaluate_pair(p: &dyn Density, q: &dyn Density, grid: &GridSpec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((grid.evaluate_density(p)?, grid.evaluate_density(q)?))
}

/// Quadrature `∫|p − q|`.
pub fn l1_distance(p: &dyn Density, q: &dyn Density, grid: &GridSpec<f64>) -> Result<f64> {
    let (pv, qv) = evaluate_pair(p, q, grid)?;
    Ok(l1_from_values(grid, &pv, &qv))
}

/// Quadrature Hellinger distance with `d_H² = ∫(√p − √q)²` (at most `√2`).
pub fn hellinger(p: &dyn Density, q: &dyn Density, grid: &GridSpec<f64>) -> Result<f64> {
    let (pv, qv) = evaluate_pair(p, q, grid)?;
    Ok(hellinger_from_values(grid, &pv, &qv))
}

/// Closed-form Hellinger distance between `N(μ1, Σ1)` and `N(μ2, Σ2)` through
/// the Bhattacharyya coefficient
/// `BC = det(Σ1)^{1/4} det(Σ2)^{1/4} det(Σ̄)^{−1/2} exp(−Δμᵀ Σ̄^{−1} Δμ / 8)`.
pub fn gaussian_hellinger_oracle(
    s1: &CovarianceSpec,
    s2: &CovarianceSpec,
    mu1: &[f64],
    mu2: &[f64],
) -> Result<f64> {
    let d = s1.dim();
    if s2.dim() != d || mu1.len() != d || mu2.len() != d {
        return Err(Error::invalid("dimension mismatch"));
    }
    let avg: Vec<f64> = s1
        .matrix()
        .iter()
        .zip(s2.matrix())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let sbar = CovarianceSpec::new(d, &avg)?;
    let dm: Vec<f64> = mu1.iter().zip(mu2).map(|(a, b)| a - b).collect();
    let log_bc = 0.25 * s1.log_det() + 0.25 * s2.log_det() - 0.5 * sbar.log_det()
        - sbar.mahalanobis_sq(&dm) / 8.0;
    Ok((-2.0 * log_bc.exp_m1()).max(0.0).sqrt())
}

/// `(P0 log(f0/p), P0 log²(f0/p))` with floor bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KlMoments {
    pub first: f64,
    pub second: f64,
    /// Grid points where either density was raised to [`LOG_FLOOR`].
    pub floor_events: usize,
}

/// Reference mass below which a vanishing candidate is tolerated.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

/// Kullback–Leibler moments of `p` around `f0` by quadrature against `f0`.
pub fn kl_moments(f0: &dyn Density, p: &dyn Density, grid: &GridSpec<f64>) -> Result<KlMoments> {
    let (fv, pv) = evaluate_pair(f0, p, grid)?;
    kl_moments_from_values(grid, &fv, &pv)
}

pub fn kl_moments_from_values(grid: &GridSpec<f64>, fv: &[f64], pv: &[f64]) -> Result<KlMoments> {
    let mut floor_events = 0;
    let mut l1 = vec![0.0; fv.len()];
    let mut l2 = vec![0.0; fv.len()];
    for i in 0..fv.len() {
        let f = fv[i];
        if f <= 0.0 {
            continue;
        }
        if pv[i] <= 0.0 && f > SUPPORT_TOLERANCE {
            return Err(Error::SupportMismatch {
                location: grid.location(i),
                reference: f,
            });
        }
        let mut ff = f;
        let mut pp = pv[i];
        if ff < LOG_FLOOR || pp < LOG_FLOOR {
            floor_events += 1;
            ff = ff.max(LOG_FLOOR);
            pp = pp.max(LOG_FLOOR);
        }
        let lr = (ff / pp).ln();
        l1[i] = f * lr;
        l2[i] = f * lr * lr;
    }
    Ok(KlMoments {
        first: grid.sum_values(&l1),
        second: grid.sum_values(&l2),
        floor_events,
    })
}
