use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Gamma};

use super::covariance::{sample_covariance, CovarianceDraw};
use super::spec::PriorSpec;
use crate::error::{Error, Result};
use crate::measure_discretization::MixingMeasure;
use crate::test_densities::{make_gaussian_mixture, GaussianMixtureDensity};

/// A truncated stick-breaking draw `π_h = V_h ∏_{j<h}(1 − V_j)`.
#[derive(Clone, Debug, Serialize)]
pub struct StickBreakingDraw {
    pub truncation: usize,
    pub sticks: Vec<f64>,
    pub weights: Vec<f64>,
    /// `∏_{h≤H}(1 − V_h)`, the mass beyond the truncation.
    pub remainder: f64,
    pub atoms: Vec<Vec<f64>>,
    /// The weights with the remainder folded into the last atom.
    pub mixing: MixingMeasure,
}

/// Stick weights and remainder from the sticks.
pub fn stick_weights(sticks: &[f64]) -> (Vec<f64>, f64) {
    let mut rest = 1.0;
    let weights = sticks
        .iter()
        .map(|v| {
            let w = v * rest;
            rest *= 1.0 - v;
            w
        })
        .collect();
    (weights, rest)
}

/// `V_h ∼ Beta(1, |α|)` for `h = 1..H`.
pub fn sample_sticks<R: Rng + ?Sized>(h: usize, total_mass: f64, rng: &mut R) -> Result<Vec<f64>> {
    let beta = Beta::new(1.0, total_mass).map_err(|e| Error::invalid(format!("stick law: {e}")))?;
    Ok((0..h).map(|_| beta.sample(rng)).collect())
}

/// Atoms `Z_h ∼ ᾱ` with sticks `V_h ∼ Beta(1, |α|)`.
pub fn sample_stick_breaking<R: Rng + ?Sized>(spec: &PriorSpec, h: usize, rng: &mut R) -> Result<StickBreakingDraw> {
    if h == 0 {
        return Err(Error::Precondition("truncation must be at least 1".into()));
    }
    let d = spec.dim();
    let sticks = sample_sticks(h, spec.total_mass, rng)?;
    let atoms: Vec<Vec<f64>> = (0..h)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            spec.base_cov
                .transform_standard(&z)
                .iter()
                .zip(&spec.base_mean)
                .map(|(a, m)| a + m)
                .collect()
        })
        .collect();
    let (weights, remainder) = stick_weights(&sticks);
    let mut folded = weights.clone();
    folded[h - 1] += remainder;
    let mixing = MixingMeasure::new(atoms.clone(), folded)?;
    Ok(StickBreakingDraw {
        truncation: h,
        sticks,
        weights,
        remainder,
        atoms,
        mixing,
    })
}

/// One prior density `p_{F,Σ}` with its ingredients.
#[derive(Clone, Debug)]
pub struct PriorDraw {
    pub sticks: StickBreakingDraw,
    pub covariance: CovarianceDraw,
    pub density: GaussianMixtureDensity,
}

/// `F ∼ D_α` truncated at `H` sticks, `Σ ∼ G` independently, and the
/// location mixture `p_{F,Σ}`. The remainder mass is folded into the last atom.
pub fn sample_prior_density<R: Rng + ?Sized>(spec: &PriorSpec, h: usize, rng: &mut R) -> Result<PriorDraw> {
    spec.validate()?;
    let sticks = sample_stick_breaking(spec, h, rng)?;
    let covariance = sample_covariance(&spec.covariance, spec.dim(), rng)?;
    let density = make_gaussian_mixture(sticks.mixing.clone(), covariance.covariance.clone())?;
    Ok(PriorDraw {
        sticks,
        covariance,
        density,
    })
}

/// `P(Σ_{h>H} π_h > ε)` and its Stirling-type bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StickTail {
    pub exact: f64,
    /// `(e|α| log(1/ε) / H)^H`.
    pub stirling_bound: f64,
    /// Whether `H ≥ e|α| log(1/ε)`, where the bound is below one.
    pub bound_applies: bool,
}

/// The tail mass `∏(1 − V_h)` exceeds `ε` exactly when
/// `W = −Σ log(1 − V_h) < log(1/ε)`, and `W ∼ Gamma(H, rate |α|)`.
pub fn stick_tail_probability(h: usize, total_mass: f64, eps: f64) -> Result<StickTail> {
    if h == 0 || !(total_mass > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!(
            "need H >= 1, |alpha| > 0, eps in (0, 1); got ({h}, {total_mass}, {eps})"
        )));
    }
    let l = (1.0 / eps).ln();
    let gamma = Gamma::new(h as f64, total_mass).map_err(|e| Error::invalid(e.to_string()))?;
    let ratio = std::f64::consts::E * total_mass * l / h as f64;
    Ok(StickTail {
        exact: gamma.cdf(l),
        stirling_bound: ratio.powi(h as i32),
        bound_applies: ratio <= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Density;
    use crate::rng::stream_rng;

    /// `P(Gamma(H, rate a) < x) = P(Poisson(a x) ≥ H)` for integer `H`.
    fn poisson_oracle(h: usize, a: f64, eps: f64) -> f64 {
        let lam = a * (1.0 / eps).ln();
        let mut term = (-lam).exp();
        let mut below = 0.0;
        for k in 0..h {
            below += term;
            term *= lam / (k + 1) as f64;
        }
        1.0 - below
    }

    #[test]
    fn single_stick_tail() {
        let t = stick_tail_probability(1, 1.0, 0.2).unwrap();
        assert!((t.exact - 0.8).abs() < 1e-12);
    }

    #[test]
    fn tail_matches_poisson_identity() {
        for &(h, a, eps) in &[(5, 2.0, 0.05), (10, 1.0, 1e-3), (3, 0.5, 0.3), (20, 4.0, 1e-6)] {
            let t = stick_tail_probability(h, a, eps).unwrap();
            let o = poisson_oracle(h, a, eps);
            assert!((t.exact - o).abs() < 1e-10, "{h} {a} {eps}: {} vs {o}", t.exact);
        }
    }

    #[test]
    fn tail_vanishes_as_eps_approaches_one() {
        let t = stick_tail_probability(4, 1.0, 1.0 - 1e-9).unwrap();
        assert!(t.exact < 1e-30);
    }

    #[test]
    fn monte_carlo_tail() {
        let (h, a, eps) = (5, 2.0, 0.05);
        let exact = stick_tail_probability(h, a, eps).unwrap().exact;
        let mut rng = stream_rng(21, 0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| stick_weights(&sample_sticks(h, a, &mut rng).unwrap()).1 > eps)
            .count();
        let p = hits as f64 / n as f64;
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((p - exact).abs() < 3.0 * se, "{p} vs {exact}");
    }

    #[test]
    fn large_mass_gives_small_sticks() {
        let mut rng = stream_rng(1, 0);
        let v = sample_sticks(20_000, 999.0, &mut rng).unwrap();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        assert!((m - 1e-3).abs() < 5e-5, "{m}");
    }

    #[test]
    fn number_of_large_weights() {
        // independent simulation through uniform draws: V = 1 − U^{1/|α|}
        let (h, reps) = (100, 4000);
        let mut rng = stream_rng(2, 0);
        let spec = PriorSpec::standard(1);
        let ours: Vec<f64> = (0..reps)
            .map(|_| {
                let d = sample_stick_breaking(&spec, h, &mut rng).unwrap();
                d.weights.iter().filter(|&&w| w > 0.01).count() as f64
            })
            .collect();
        let mut rng = stream_rng(2, 1);
        let direct: Vec<f64> = (0..reps)
            .map(|_| {
                let mut rest = 1.0;
                let mut count = 0.0;
                for _ in 0..h {
                    let u: f64 = rng.random();
                    let v = 1.0 - u;
                    if v * rest > 0.01 {
                        count += 1.0;
                    }
                    rest *= 1.0 - v;
                }
                count
            })
            .collect();
        let (ma, mb) = (crate::stats::mean(&ours), crate::stats::mean(&direct));
        let se = ((crate::stats::variance(&ours) + crate::stats::variance(&direct)) / reps as f64).sqrt();
        assert!((ma - mb).abs() < 3.0 * se, "{ma} vs {mb} (se {se})");
    }

    #[test]
    fn folded_remainder_gives_proper_measure() {
        let mut rng = stream_rng(9, 0);
        let draw = sample_prior_density(&PriorSpec::standard(2), 7, &mut rng).unwrap();
        let s: f64 = draw.sticks.weights.iter().sum();
        assert!((s + draw.sticks.remainder - 1.0).abs() < 1e-12);
        let w = draw.sticks.mixing.weights();
        assert!((w[6] - draw.sticks.weights[6] - draw.sticks.remainder).abs() < 1e-15);
        assert_eq!(draw.density.dim(), 2);
    }
}
