use rayon::prelude::*;
use serde::Serialize;

use super::spec::PriorSpec;
use super::stick::sample_prior_density;
use crate::density::Density;
use crate::divergences::{kl_moments_from_values, KlMoments};
use crate::error::{Error, Result};
use crate::quadrature::GridSpec;
use crate::rng::stream_rng;
use crate::test_densities::TestDensity;

/// Confidence level of the one-sided bound reported when nothing hits.
pub const ZERO_HIT_LEVEL: f64 = 0.95;

/// KL moments of `draws` prior densities around `f0`, with common random
/// numbers so that masses at different thresholds are comparable.
#[derive(Clone, Debug)]
pub struct KlBallSample {
    /// `None` marks a draw that vanishes where `f0` does not (infinite KL).
    pub moments: Vec<Option<KlMoments>>,
    pub dim: usize,
    pub kappa: f64,
    pub beta: f64,
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MassEstimate {
    Point { mass: f64, stderr: f64 },
    /// No draw hit the ball; one-sided upper confidence bound.
    UpperBound { bound: f64, level: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KlBallEstimate {
    pub eps: f64,
    pub a: f64,
    pub threshold: f64,
    pub hits: usize,
    pub draws: usize,
    pub estimate: MassEstimate,
    /// `log` of the point estimate or of the bound.
    pub log_mass: f64,
    /// `ε^{−d*/β} (log 1/ε)^{s d* + 1}` with `d* = max(d, κ)` and
    /// `s = 1 + 1/β + 1/τ`; the log-mass should be at least `−c` times this.
    pub predicted_shape: f64,
}

/// Growth shape of `−log Π(KL ball of radius ε)`.
pub fn thickness_shape(eps: f64, d_star: f64, beta: f64, tau: f64) -> f64 {
    let s = 1.0 + 1.0 / beta + 1.0 / tau;
    eps.powf(-d_star / beta) * (1.0 / eps).ln().powf(s * d_star + 1.0)
}

/// Draw `draws` prior densities truncated at `h` sticks and compute their KL
/// moments around `f0` on `grid`. Draw `i` uses stream `i` of `seed`.
pub fn sample_kl_moments(
    spec: &PriorSpec,
    f0: &dyn TestDensity,
    draws: usize,
    h: usize,
    grid: &GridSpec<f64>,
    seed: u64,
) -> Result<KlBallSample> {
    spec.validate()?;
    if f0.dim() != spec.dim() || grid.dim() != spec.dim() {
        return Err(Error::invalid("prior, density and grid dimensions differ"));
    }
    if draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let fv: Vec<f64> = (0..grid.total_points()).map(|i| f0.evaluate(&grid.location(i))).collect();
    let points: Vec<Vec<f64>> = (0..grid.total_points()).map(|i| grid.location(i)).collect();
    let moments = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let draw = sample_prior_density(spec, h, &mut rng)?;
            let pv: Vec<f64> = points.iter().map(|x| draw.density.evaluate(x)).collect();
            match kl_moments_from_values(grid, &fv, &pv) {
                Ok(m) => Ok(Some(m)),
                Err(Error::SupportMismatch { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KlBallSample {
        moments,
        dim: spec.dim(),
        kappa: spec.kappa(),
        beta: f0.working_beta(),
        tau: f0.tail().tau,
    })
}

impl KlBallSample {
    /// Fraction of draws with both KL moments at most `a ε²`.
    pub fn mass(&self, eps: f64, a: f64) -> Result<KlBallEstimate> {
        if !(eps > 0.0) || !(a > 0.0) {
            return Err(Error::invalid("eps and A must be positive"));
        }
        let threshold = a * eps * eps;
        let n = self.moments.len();
        let hits = self
            .moments
            .iter()
            .flatten()
            .filter(|m| m.first <= threshold && m.second <= threshold)
            .count();
        let estimate = if hits == 0 {
            MassEstimate::UpperBound {
                bound: 1.0 - (1.0 - ZERO_HIT_LEVEL).powf(1.0 / n as f64),
                level: ZERO_HIT_LEVEL,
            }
        } else {
            let p = hits as f64 / n as f64;
            MassEstimate::Point {
                mass: p,
                stderr: (p * (1.0 - p) / n as f64).sqrt(),
            }
        };
        let log_mass = match estimate {
            MassEstimate::Point { mass, .. } => mass.ln(),
            MassEstimate::UpperBound { bound, .. } => bound.ln(),
        };
        let d_star = (self.dim as f64).max(self.kappa);
        Ok(KlBallEstimate {
            eps,
            a,
            threshold,
            hits,
            draws: n,
            estimate,
            log_mass,
            predicted_shape: thickness_shape(eps, d_star, self.beta, self.tau),
        })
    }
}

/// Prior mass of `{P0 log(f0/p) ≤ A ε², P0 log²(f0/p) ≤ A ε²}` by plain Monte Carlo.
#[allow(clippy::too_many_arguments)]
pub fn estimate_kl_ball_mass(
    spec: &PriorSpec,
    f0: &dyn TestDensity,
    eps: f64,
    a: f64,
    draws: usize,
    h: usize,
    grid: &GridSpec<f64>,
    seed: u64,
) -> Result<KlBallEstimate> {
    sample_kl_moments(spec, f0, draws, h, grid, seed)?.mass(eps, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CovarianceSpec;
    use crate::prior_model::CovariancePrior;
    use crate::quadrature::QuadratureRule;
    use crate::test_densities::GaussianMixtureDensity;

    fn setup() -> (PriorSpec, GaussianMixtureDensity, GridSpec<f64>) {
        let spec = PriorSpec::new(
            vec![0.0],
            CovarianceSpec::isotropic(1, 1.0).unwrap(),
            1.0,
            CovariancePrior::InverseWishart {
                nu: 4.0,
                psi: CovarianceSpec::isotropic(1, 4.0).unwrap(),
            },
        )
        .unwrap();
        let grid = GridSpec::cube(1, 8.0, 256, QuadratureRule::Midpoint).unwrap();
        (spec, GaussianMixtureDensity::standard(1), grid)
    }

    #[test]
    fn monotone_in_radius_and_constant() {
        let (spec, f0, grid) = setup();
        let s = sample_kl_moments(&spec, &f0, 2000, 5, &grid, 3).unwrap();
        let mut last = 0;
        for a in [0.5, 1.0, 2.0, 8.0, 1e3] {
            for eps in [0.1, 0.3, 0.6] {
                let lo = s.mass(eps, a).unwrap();
                let hi_eps = s.mass(eps * 1.5, a).unwrap();
                let hi_a = s.mass(eps, a * 2.0).unwrap();
                assert!(hi_eps.hits >= lo.hits && hi_a.hits >= lo.hits);
            }
            let m = s.mass(0.3, a).unwrap().hits;
            assert!(m >= last);
            last = m;
        }
        // every draw is inside a large enough ball
        let all = s.mass(1.0, 1e12).unwrap();
        assert_eq!(all.hits, s.moments.iter().flatten().count());
        assert!(all.hits > 1990);
    }

    #[test]
    fn typical_truth_has_positive_mass() {
        // a one-atom mixture the prior produces readily
        let (spec, _, grid) = setup();
        let f0 = crate::test_densities::make_gaussian_mixture(
            crate::measure_discretization::MixingMeasure::dirac(vec![0.3]),
            CovarianceSpec::isotropic(1, 1.0).unwrap(),
        )
        .unwrap();
        let e = estimate_kl_ball_mass(&spec, &f0, 0.3, 4.0, 10_000, 5, &grid, 1).unwrap();
        match e.estimate {
            MassEstimate::Point { mass, .. } => assert!(mass > 0.0),
            other => panic!("{other:?}"),
        }
        assert!(e.predicted_shape > 0.0);
    }

    #[test]
    fn zero_hits_give_an_upper_bound() {
        let (spec, f0, grid) = setup();
        let s = sample_kl_moments(&spec, &f0, 50, 5, &grid, 4).unwrap();
        let e = s.mass(1e-6, 1e-6).unwrap();
        assert_eq!(e.hits, 0);
        match e.estimate {
            MassEstimate::UpperBound { bound, .. } => assert!((bound - (1.0 - 0.05f64.powf(1.0 / 50.0))).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }
}
