use std::sync::OnceLock;

use serde::Serialize;

use super::functionals::{hellinger_from_values, LOG_FLOOR};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::kernel_approx::convolve_grid;
use crate::quadrature::{GridFunction, GridSpec};
use crate::special::bisect;

/// Slack allowed for quadrature roundoff when judging an inequality.
pub const QUADRATURE_TOLERANCE: f64 = 1e-9;

/// `r(x) = (2(√x − 1) − log x) / (√x − 1)²`, the ratio bounding `log` by a
/// Hellinger-type square. Non-negative and decreasing on `(0, ∞)`.
pub fn r_function(x: f64) -> f64 {
    let s = x.sqrt() - 1.0;
    if s.abs() < 1e-4 {
        // series around x = 1 in s: 1 − 2s/3 + s²/2 − ...
        return 1.0 - 2.0 * s / 3.0 + s * s / 2.0 - 2.0 * s * s * s / 5.0;
    }
    (2.0 * s - x.ln()) / (s * s)
}

/// Crossing of `r(x) = c log(1/x)` in `(0, 1)`; below it `r ≤ c log(1/x)`.
pub fn r_crossing(c: f64) -> f64 {
    bisect(|x| r_function(x) - c * (1.0 / x).ln(), 1e-6, 1.0 - 1e-9, 1e-15)
}

/// Largest admissible `λ` for the Hellinger-to-KL bounds: the smaller of the
/// crossings with `2 log(1/x)` (first bound) and `log(1/x)` (second bound).
pub fn lambda0() -> f64 {
    static L0: OnceLock<f64> = OnceLock::new();
    *L0.get_or_init(|| r_crossing(2.0).min(r_crossing(1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
}

/// One inequality `lhs ≤ rhs`, judged with `tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl InequalityCheck {
    pub fn new(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        let verdict = if slack >= -tolerance { Verdict::Holds } else { Verdict::Violated };
        InequalityCheck { lhs, rhs, slack, tolerance, verdict }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KlByHellReport {
    pub lambda: f64,
    pub hellinger_sq: f64,
    /// `P log(p/q) ≤ d_H²(1 + 2 log(1/λ)) + 2 P{log(p/q) 1(q/p ≤ λ)}`
    pub first: InequalityCheck,
    /// `P log²(p/q) ≤ d_H²(12 + 2 log²(1/λ)) + 8 P{log²(p/q) 1(q/p ≤ λ)}`
    pub second: InequalityCheck,
    pub floor_events: usize,
}

impl KlByHellReport {
    pub fn holds(&self) -> bool {
        self.first.holds() && self.second.holds()
    }
}

/// Evaluates both sides of the KL-by-Hellinger bounds by quadrature.
pub fn check_kl_by_hell(p: &dyn Density, q: &dyn Density, lambda: f64, grid: &GridSpec<f64>) -> Result<KlByHellReport> {
    let l0 = lambda0();
    if !(lambda > 0.0 && lambda < l0) {
        return Err(Error::invalid(format!("lambda must lie in (0, {l0:.6}), got {lambda}")));
    }
    let pv = grid.evaluate_density(p)?;
    let qv = grid.evaluate_density(q)?;
    kl_by_hell_from_values(grid, &pv, &qv, lambda)
}

pub fn kl_by_hell_from_values(grid: &GridSpec<f64>, pv: &[f64], qv: &[f64], lambda: f64) -> Result<KlByHellReport> {
    let n = pv.len();
    let (mut k1, mut k2, mut t1, mut t2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut floor_events = 0;
    for i in 0..n {
        let pi = pv[i];
        if pi <= 0.0 {
            continue;
        }
        if qv[i] <= 0.0 && pi > super::SUPPORT_TOLERANCE {
            return Err(Error::SupportMismatch {
                location: grid.location(i),
                reference: pi,
            });
        }
        let (mut a, mut b) = (pi, qv[i]);
        if a < LOG_FLOOR || b < LOG_FLOOR {
            floor_events += 1;
            a = a.max(LOG_FLOOR);
            b = b.max(LOG_FLOOR);
        }
        let lr = (a / b).ln();
        k1[i] = pi * lr;
        k2[i] = pi * lr * lr;
        if b / a <= lambda {
            t1[i] = k1[i];
            t2[i] = k2[i];
        }
    }
    let h = hellinger_from_values(grid, pv, qv);
    let h2 = h * h;
    let ll = (1.0 / lambda).ln();
    let first = InequalityCheck::new(
        grid.sum_values(&k1),
        h2 * (1.0 + 2.0 * ll) + 2.0 * grid.sum_values(&t1),
        QUADRATURE_TOLERANCE,
    );
    let second = InequalityCheck::new(
        grid.sum_values(&k2),
        h2 * (12.0 + 2.0 * ll * ll) + 8.0 * grid.sum_values(&t2),
        QUADRATURE_TOLERANCE,
    );
    Ok(KlByHellReport {
        lambda,
        hellinger_sq: h2,
        first,
        second,
        floor_events,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingReport {
    /// `d_H²(Σ w_i p_i, Σ w_i q_i) ≤ Σ w_i d_H²(p_i, q_i)`
    pub mixture: InequalityCheck,
    /// `d_H(φ∗p_i, φ∗q_i) ≤ d_H(p_i, q_i)` per pair, when a kernel scale was given.
    pub convolution: Vec<InequalityCheck>,
}

impl MixingReport {
    pub fn holds(&self) -> bool {
        self.mixture.holds() && self.convolution.iter().all(InequalityCheck::holds)
    }
}

/// Checks Hellinger convexity under mixing on a shared grid and, if
/// `kernel_scale` is given, contraction under Gaussian convolution (FFT).
pub fn check_hellinger_mixing(
    pairs: &[(&dyn Density, &dyn Density)],
    weights: &[f64],
    grid: &GridSpec<f64>,
    kernel_scale: Option<f64>,
) -> Result<MixingReport> {
    if pairs.is_empty() || pairs.len() != weights.len() {
        return Err(Error::invalid("one weight per pair is required"));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::invalid("weights must be non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("weights sum to {total}, not 1")));
    }
    let n = grid.total_points();
    let mut pm = vec![0.0; n];
    let mut qm = vec![0.0; n];
    let mut rhs = 0.0;
    let mut convolution = Vec::new();
    for (&(p, q), &w) in pairs.iter().zip(weights) {
        let pv = grid.evaluate_density(p)?;
        let qv = grid.evaluate_density(q)?;
        let h = hellinger_from_values(grid, &pv, &qv);
        rhs += w * h * h;
        for i in 0..n {
            pm[i] += w * pv[i];
            qm[i] += w * qv[i];
        }
        if let Some(s) = kernel_scale {
            let scales = vec![s; grid.dim()];
            let cp = convolve_grid(&GridFunction::new(grid.clone(), pv), &scales)?;
            let cq = convolve_grid(&GridFunction::new(grid.clone(), qv), &scales)?;
            let hc = hellinger_from_values(grid, &cp.values, &cq.values);
            convolution.push(InequalityCheck::new(hc, h, QUADRATURE_TOLERANCE));
        }
    }
    let lhs = hellinger_from_values(grid, &pm, &qm).powi(2);
    Ok(MixingReport {
        mixture: InequalityCheck::new(lhs, rhs, QUADRATURE_TOLERANCE),
        convolution,
    })
}
