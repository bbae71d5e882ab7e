use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::covariance::sample_covariance;
use super::spec::CovariancePrior;
use super::tails::power_law_exponent;
use crate::error::{Error, Result};
use crate::linalg::CovarianceSpec;
use crate::rng::stream_rng;
use crate::stats::{ks_p_value, ks_statistic, mean, quantile, variance};

/// Level of the Kolmogorov–Smirnov test on the trace.
pub const KS_LEVEL: f64 = 0.001;

#[derive(Clone, Debug, Serialize)]
pub struct TraceCheck {
    pub degrees_of_freedom: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallEigenvalueCheck {
    /// Thresholds `x` and `P{eig₁ < x}`.
    pub ladder: Vec<(f64, f64)>,
    /// Fitted exponent of `x^a e^{−bx}`.
    pub slope: f64,
    /// `(ν − d + 1)/2`, the exponent of the smallest-eigenvalue density of a
    /// Wishart matrix plus one.
    pub wishart_exponent: f64,
    /// `(ν + 3 − d)/2`, the exponent obtained from the eigenvalue density with
    /// power `(ν + 1 − d)/2`. Reported for comparison; the draws follow the
    /// Wishart exponent.
    pub alternative_exponent: f64,
    /// Fraction of draws below the smallest ladder point, which must shrink.
    pub vanishes_at_zero: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct InverseWishartReport {
    pub nu: f64,
    pub dim: usize,
    pub draws: usize,
    pub trace: TraceCheck,
    pub small_eigenvalue: SmallEigenvalueCheck,
    pub passed: bool,
}

/// For `Σ ∼ IW(ν, Ψ)`: `tr(Ψ Σ^{-1}) ∼ χ²_{νd}` (Kolmogorov–Smirnov at
/// [`KS_LEVEL`]), and `P{eig₁(Ψ^{1/2} Σ^{-1} Ψ^{1/2}) < x}` is a power of `x`
/// for small `x`. A non-identity `Ψ` is reduced to the identity case.
pub fn check_inverse_wishart_facts(nu: f64, psi: &CovarianceSpec, draws: usize, seed: u64) -> Result<InverseWishartReport> {
    let d = psi.dim();
    let prior = CovariancePrior::InverseWishart { nu, psi: psi.clone() };
    prior.validate(d)?;
    if draws < 1000 {
        return Err(Error::Precondition("need at least 1000 draws".into()));
    }
    let psi_m = DMatrix::from_row_slice(d, d, psi.matrix());
    let root = psi_m.clone().cholesky().expect("validated SPD").l();
    let stats: Vec<(f64, f64)> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let draw = sample_covariance(&prior, d, &mut rng).expect("validated prior");
            let p = DMatrix::from_row_slice(d, d, draw.covariance.precision());
            let w = root.transpose() * &p * &root;
            let trace = w.trace();
            let e = SymmetricEigen::new(w).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            (trace, e)
        })
        .collect();
    let traces: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let smallest: Vec<f64> = stats.iter().map(|s| s.1).collect();

    let df = nu * d as f64;
    let chi = ChiSquared::new(df).map_err(|e| Error::invalid(e.to_string()))?;
    let ks = ks_statistic(&traces, |x| chi.cdf(x));
    let p = ks_p_value(ks, draws);
    let trace = TraceCheck {
        degrees_of_freedom: df,
        mean: mean(&traces),
        mean_se: (variance(&traces) / draws as f64).sqrt(),
        ks_statistic: ks,
        ks_p_value: p,
        passed: p >= KS_LEVEL,
    };

    // small-x ladder between the (100/n)- and 5%-quantiles
    let lo = quantile(&smallest, (100.0 / draws as f64).min(0.01));
    let hi = quantile(&smallest, 0.05);
    let ladder: Vec<(f64, f64)> = (0..8)
        .map(|j| {
            let x = lo * (hi / lo).powf(j as f64 / 7.0);
            let frac = smallest.iter().filter(|&&e| e < x).count() as f64 / draws as f64;
            (x, frac)
        })
        .collect();
    let xs: Vec<f64> = ladder.iter().map(|l| l.0).collect();
    let ms: Vec<f64> = ladder.iter().map(|l| l.1).collect();
    let slope = power_law_exponent(&xs, &ms, &vec![1.0; xs.len()]).unwrap_or(f64::NAN);
    let small_eigenvalue = SmallEigenvalueCheck {
        vanishes_at_zero: ladder.windows(2).all(|w| w[0].1 <= w[1].1) && ladder[0].1 < 0.05,
        ladder,
        slope,
        wishart_exponent: (nu - d as f64 + 1.0) / 2.0,
        alternative_exponent: (nu + 3.0 - d as f64) / 2.0,
    };
    Ok(InverseWishartReport {
        nu,
        dim: d,
        draws,
        passed: trace.passed && small_eigenvalue.vanishes_at_zero,
        trace,
        small_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::InverseGamma;

    #[test]
    fn trace_is_chi_square() {
        let r = check_inverse_wishart_facts(3.0, &CovarianceSpec::isotropic(2, 1.0).unwrap(), 20_000, 2).unwrap();
        assert!(r.trace.passed, "{:?}", r.trace);
        assert!((r.trace.mean - 6.0).abs() < 3.0 * r.trace.mean_se, "{:?}", r.trace);
        assert!((r.small_eigenvalue.slope - 1.0).abs() < 0.15, "{:?}", r.small_eigenvalue);
    }

    #[test]
    fn general_scale_reduces_to_identity() {
        let psi = CovarianceSpec::new(2, &[2.0, 0.7, 0.7, 0.5]).unwrap();
        let r = check_inverse_wishart_facts(4.0, &psi, 20_000, 6).unwrap();
        assert!(r.trace.passed, "{:?}", r.trace);
    }

    #[test]
    fn one_dimension_is_inverse_gamma() {
        // IW(ν, ψ) in d = 1 is IG(ν/2, ψ/2)
        let (nu, psi) = (5.0, 1.5);
        let prior = CovariancePrior::InverseWishart {
            nu,
            psi: CovarianceSpec::isotropic(1, psi).unwrap(),
        };
        let ig = InverseGamma::new(nu / 2.0, psi / 2.0).unwrap();
        let mut rng = stream_rng(8, 0);
        let v: Vec<f64> = (0..20_000)
            .map(|_| sample_covariance(&prior, 1, &mut rng).unwrap().covariance.entry(0, 0))
            .collect();
        let ks = ks_statistic(&v, |x| ig.cdf(x));
        assert!(ks_p_value(ks, v.len()) > KS_LEVEL, "{ks}");
    }
}
