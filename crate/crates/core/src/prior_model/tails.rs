use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::covariance::sample_precision_eigenvalues;
use super::spec::{CovariancePrior, PriorSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{least_squares, percentile_interval, quantile};

/// Relative width `t` of the eigenvalue band `(s, s(1 + t))`.
pub const BAND_WIDTH: f64 = 0.5;
pub const LADDER_POINTS: usize = 10;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_TAIL_DRAWS: usize = 10_000;
/// Ladder points with a nonzero estimate needed for a fit.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailCondition {
    /// `1 − ᾱ([−x, x]^d) ≤ b₁ exp(−C₁ x^{a₁})`.
    BaseTail,
    /// `G{eig_d(Σ^{-1}) ≥ x} ≤ b₂ exp(−C₂ x^{a₂})`.
    LargeEigenvalue,
    /// `G{eig_1(Σ^{-1}) < x} ≤ b₃ x^{a₃}`.
    SmallEigenvalue,
    /// `G{s < eig_j(Σ^{-1}) < s(1 + t) ∀j} ≥ b s^{a} exp(−C s^{κ/2})`.
    EigenvalueBand,
}

impl TailCondition {
    pub const ALL: [TailCondition; 4] = [
        TailCondition::BaseTail,
        TailCondition::LargeEigenvalue,
        TailCondition::SmallEigenvalue,
        TailCondition::EigenvalueBand,
    ];

    pub fn exponent_name(self) -> &'static str {
        match self {
            TailCondition::BaseTail => "a1",
            TailCondition::LargeEigenvalue => "a2",
            TailCondition::SmallEigenvalue => "a3",
            TailCondition::EigenvalueBand => "kappa",
        }
    }

    fn label(self) -> &'static str {
        match self {
            TailCondition::BaseTail => "base-tail",
            TailCondition::LargeEigenvalue => "large-eigenvalue",
            TailCondition::SmallEigenvalue => "small-eigenvalue",
            TailCondition::EigenvalueBand => "eigenvalue-band",
        }
    }
}

/// Exponents the covariance prior should show, from its distribution.
pub fn expected_exponent(prior: &CovariancePrior, d: usize, c: TailCondition) -> f64 {
    match (c, prior) {
        (TailCondition::BaseTail, _) => 2.0,
        (TailCondition::EigenvalueBand, p) => p.kappa(),
        (TailCondition::LargeEigenvalue, CovariancePrior::DiagonalSquaredInverseGamma { .. }) => 0.5,
        (TailCondition::LargeEigenvalue, _) => 1.0,
        // smallest eigenvalue of a Wishart matrix: density ~ x^{(ν−d−1)/2} at 0
        (TailCondition::SmallEigenvalue, CovariancePrior::InverseWishart { nu, .. }) => (nu - d as f64 + 1.0) / 2.0,
        (TailCondition::SmallEigenvalue, CovariancePrior::DiagonalInverseGamma { shape, .. }) => *shape,
        (TailCondition::SmallEigenvalue, CovariancePrior::DiagonalSquaredInverseGamma { shape, .. }) => shape / 2.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LadderPoint {
    /// `x`, or `s` for the band.
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub expected: f64,
    /// `expected` lies in the bootstrap interval.
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub condition: TailCondition,
    pub exponent: &'static str,
    pub ladder: Vec<LadderPoint>,
    pub fit: Option<ExponentFit>,
    /// Fewer than [`MIN_FIT_POINTS`] ladder points had nonzero estimates.
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub prior: &'static str,
    pub dim: usize,
    pub draws: usize,
    pub seed: u64,
    pub band_width: f64,
    pub ci_level: f64,
    pub conditions: Vec<ConditionReport>,
}

impl TailReport {
    pub fn condition(&self, c: TailCondition) -> &ConditionReport {
        self.conditions.iter().find(|r| r.condition == c).expect("all conditions reported")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    /// Ladders as `condition,x,estimate,stderr,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,x,estimate,stderr,count\n");
        for c in &self.conditions {
            for p in &c.ladder {
                out.push_str(&format!(
                    "{},{:e},{:e},{:e},{}\n",
                    c.condition.label(),
                    p.x,
                    p.estimate,
                    p.stderr,
                    p.count
                ));
            }
        }
        out
    }
}

/// Fit `log m(x) = c₀ + c₁ log x − C x^p` by weighted least squares, profiling
/// `p` over a grid. Weights are the hit counts (inverse variance of `log m`).
pub fn profile_stretched_exponent(x: &[f64], m: &[f64], weights: &[f64]) -> Option<f64> {
    let keep: Vec<usize> = (0..x.len()).filter(|&i| m[i] > 0.0 && weights[i] > 0.0).collect();
    if keep.len() < MIN_FIT_POINTS {
        return None;
    }
    let mut best: Option<(f64, f64)> = None;
    for step in 0..=390 {
        let p = 0.1 + 0.01 * step as f64;
        let rows: Vec<Vec<f64>> = keep
            .iter()
            .map(|&i| {
                let w = weights[i].sqrt();
                vec![w, w * x[i].ln(), -w * x[i].powf(p)]
            })
            .collect();
        let y: Vec<f64> = keep.iter().map(|&i| weights[i].sqrt() * m[i].ln()).collect();
        if let Some((_, rss)) = least_squares(&rows, &y) {
            if best.is_none_or(|(r, _)| rss < r) {
                best = Some((rss, p));
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Exponent `a` in `m(x) ≈ c x^a e^{−b x}` by weighted least squares; the
/// exponential factor absorbs the curvature of the small-`x` regime.
pub(crate) fn power_law_exponent(x: &[f64], m: &[f64], weights: &[f64]) -> Option<f64> {
    let keep: Vec<usize> = (0..x.len()).filter(|&i| m[i] > 0.0 && weights[i] > 0.0).collect();
    if keep.len() < MIN_FIT_POINTS {
        return None;
    }
    let rows: Vec<Vec<f64>> = keep
        .iter()
        .map(|&i| {
            let w = weights[i].sqrt();
            vec![w, w * x[i].ln(), w * x[i]]
        })
        .collect();
    let y: Vec<f64> = keep.iter().map(|&i| weights[i].sqrt() * m[i].ln()).collect();
    least_squares(&rows, &y).map(|(c, _)| c[1])
}

fn fit_exponent(c: TailCondition, x: &[f64], counts: &[usize], n: usize) -> Option<f64> {
    let m: Vec<f64> = counts.iter().map(|&k| k as f64 / n as f64).collect();
    let w: Vec<f64> = counts.iter().map(|&k| k as f64).collect();
    match c {
        TailCondition::SmallEigenvalue => power_law_exponent(x, &m, &w),
        // the band decays like exp(−C s^{κ/2})
        TailCondition::EigenvalueBand => profile_stretched_exponent(x, &m, &w).map(|p| 2.0 * p),
        _ => profile_stretched_exponent(x, &m, &w),
    }
}

fn geometric(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let r = (hi / lo).ln() / (k - 1) as f64;
    (0..k).map(|i| lo * (r * i as f64).exp()).collect()
}

/// Per-draw summary: `max_j |Z_j − mean_j|` and the precision eigenvalues.
struct TailSample {
    base: f64,
    eig: Vec<f64>,
}

/// Monte Carlo estimates of the four tail and band probabilities on ladders
/// chosen from empirical quantiles, with fitted exponents and percentile
/// bootstrap intervals over draws.
pub fn verify_prior_tails(spec: &PriorSpec, draws: usize, seed: u64) -> Result<TailReport> {
    spec.validate()?;
    if draws < MIN_TAIL_DRAWS {
        return Err(Error::Precondition(format!("need at least {MIN_TAIL_DRAWS} draws, got {draws}")));
    }
    let d = spec.dim();
    let samples: Vec<TailSample> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let base = spec.base_cov.transform_standard(&z).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            TailSample {
                base,
                eig: sample_precision_eigenvalues(&spec.covariance, d, &mut rng),
            }
        })
        .collect();

    // ladders from empirical quantiles: far enough into each tail to keep
    // a few hundred expected hits at the last point
    let q = (300.0 / draws as f64).min(0.02);
    let base: Vec<f64> = samples.iter().map(|s| s.base).collect();
    let top: Vec<f64> = samples.iter().map(|s| s.eig[d - 1]).collect();
    let bottom: Vec<f64> = samples.iter().map(|s| s.eig[0]).collect();
    let k = LADDER_POINTS;
    let ladders = [
        // starting at the 0.7 quantile keeps the log-power and stretched terms
        // apart; from 0.9 the fitted a₁ scatters by ±1 at 2·10⁵ draws
        geometric(quantile(&base, 0.7), quantile(&base, 1.0 - q), k),
        geometric(quantile(&top, 0.5), quantile(&top, 1.0 - q), k),
        geometric(quantile(&bottom, q), quantile(&bottom, 0.05), k),
        geometric(quantile(&bottom, 0.5), quantile(&bottom, 1.0 - q) / (1.0 + BAND_WIDTH), k),
    ];
    drop((base, top, bottom));

    // membership masks: ladder point j of condition c is bit c*k + j
    let masks: Vec<u64> = samples
        .par_iter()
        .map(|s| {
            let mut m = 0u64;
            for j in 0..k {
                if s.base > ladders[0][j] {
                    m |= 1 << j;
                }
                if s.eig[d - 1] >= ladders[1][j] {
                    m |= 1 << (k + j);
                }
                if s.eig[0] < ladders[2][j] {
                    m |= 1 << (2 * k + j);
                }
                let sj = ladders[3][j];
                if s.eig[0] > sj && s.eig[d - 1] < sj * (1.0 + BAND_WIDTH) {
                    m |= 1 << (3 * k + j);
                }
            }
            m
        })
        .collect();
    drop(samples);

    let tally = |idx: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        let mut counts = vec![0usize; 4 * k];
        for i in idx {
            let mut m = masks[i];
            while m != 0 {
                counts[m.trailing_zeros() as usize] += 1;
                m &= m - 1;
            }
        }
        counts
    };
    let counts = tally(&mut (0..draws));
    let boot_seed = derive_seed(seed, 0xB0075);
    let replicates: Vec<Vec<usize>> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(boot_seed, r as u64);
            tally(&mut (0..draws).map(|_| rng.random_range(0..draws)))
        })
        .collect();

    let ci_level = 0.95;
    let conditions = TailCondition::ALL
        .iter()
        .enumerate()
        .map(|(ci, &c)| {
            let x = &ladders[ci];
            let own = &counts[ci * k..(ci + 1) * k];
            let ladder: Vec<LadderPoint> = (0..k)
                .map(|j| {
                    let p = own[j] as f64 / draws as f64;
                    LadderPoint {
                        x: x[j],
                        estimate: p,
                        stderr: (p * (1.0 - p) / draws as f64).sqrt(),
                        count: own[j],
                    }
                })
                .collect();
            let estimate = fit_exponent(c, x, own, draws);
            let fit = estimate.map(|e| {
                let boot: Vec<f64> = replicates
                    .iter()
                    .filter_map(|rc| fit_exponent(c, x, &rc[ci * k..(ci + 1) * k], draws))
                    .collect();
                let (lo, hi) = if boot.is_empty() { (e, e) } else { percentile_interval(&boot, ci_level) };
                let expected = expected_exponent(&spec.covariance, d, c);
                ExponentFit {
                    estimate: e,
                    ci_low: lo,
                    ci_high: hi,
                    expected,
                    consistent: lo <= expected && expected <= hi,
                }
            });
            ConditionReport {
                condition: c,
                exponent: c.exponent_name(),
                degenerate: fit.is_none(),
                ladder,
                fit,
            }
        })
        .collect();
    Ok(TailReport {
        prior: spec.covariance.name(),
        dim: d,
        draws,
        seed,
        band_width: BAND_WIDTH,
        ci_level,
        conditions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CovarianceSpec;

    #[test]
    fn profile_fit_recovers_exact_exponent() {
        // m(x) = 3 x^{1.5} exp(−0.7 x^{1.3})
        let x = geometric(1.0, 20.0, 10);
        let m: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(1.5) * (-0.7 * v.powf(1.3)).exp()).collect();
        let p = profile_stretched_exponent(&x, &m, &[1.0; 10]).unwrap();
        assert!((p - 1.3).abs() < 0.011, "{p}");
    }

    #[test]
    fn power_law_with_exponential_factor() {
        let x = geometric(0.01, 0.5, 8);
        let m: Vec<f64> = x.iter().map(|v| 0.2 * v.powf(2.5) * (-0.5 * v).exp()).collect();
        let a = power_law_exponent(&x, &m, &[1.0; 8]).unwrap();
        assert!((a - 2.5).abs() < 1e-9, "{a}");
    }

    #[test]
    fn degenerate_when_too_few_points() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(profile_stretched_exponent(&x, &[0.1, 0.05, 0.0, 0.0, 0.0], &[10.0, 5.0, 0.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn rejects_small_samples() {
        assert!(matches!(
            verify_prior_tails(&PriorSpec::standard(1), 100, 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn inverse_wishart_exponents() {
        let spec = PriorSpec::new(
            vec![0.0],
            CovarianceSpec::isotropic(1, 1.0).unwrap(),
            1.0,
            CovariancePrior::InverseWishart {
                nu: 4.0,
                psi: CovarianceSpec::isotropic(1, 1.0).unwrap(),
            },
        )
        .unwrap();
        let r = verify_prior_tails(&spec, 200_000, 17).unwrap();
        let a1 = r.condition(TailCondition::BaseTail).fit.unwrap();
        let a2 = r.condition(TailCondition::LargeEigenvalue).fit.unwrap();
        let a3 = r.condition(TailCondition::SmallEigenvalue).fit.unwrap();
        assert!((a1.estimate - 2.0).abs() < 0.4, "{a1:?}");
        assert!((a2.estimate - 1.0).abs() < 0.3, "{a2:?}");
        // P(χ²_4 < x) ~ x² / 8
        assert!((a3.estimate - 2.0).abs() < 0.1, "{a3:?}");
        assert!(r.to_csv().lines().count() == 1 + 4 * LADDER_POINTS);
    }
}
