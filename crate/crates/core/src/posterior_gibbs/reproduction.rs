use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::sampler::GibbsChain;
use crate::error::Result;
use crate::prior_model::{sample_prior_density, PriorSpec};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{ks_p_value, ks_statistic, ks_two_sample, ks_two_sample_p_value};

pub const REPRODUCTION_LEVEL: f64 = 0.001;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KsCheck {
    pub statistic: f64,
    pub p_value: f64,
}

impl KsCheck {
    fn passed(&self) -> bool {
        self.p_value > REPRODUCTION_LEVEL
    }
}

/// The chain run without data against direct prior draws.
#[derive(Clone, Debug, Serialize)]
pub struct PriorReproductionReport {
    pub draws: usize,
    /// `V_1` against `Be(1, |α|)`.
    pub first_stick: KsCheck,
    /// First coordinate of `z_1` against the base measure marginal.
    pub first_atom: KsCheck,
    /// `tr Σ^{-1}` against independent prior draws (two-sample).
    pub precision_trace: KsCheck,
    pub passed: bool,
}

/// With no observations every full conditional is the prior, so the chain's
/// draws must match `sample_prior_density` marginals.
pub fn prior_reproduction_check(prior: &PriorSpec, h: usize, draws: usize, seed: u64) -> Result<PriorReproductionReport> {
    let data: Vec<Vec<f64>> = Vec::new();
    let mut rng = stream_rng(seed, 0);
    let mut chain = GibbsChain::new(&data, prior, h, &mut rng)?;
    let (mut v1, mut z1, mut trace) = (Vec::with_capacity(draws), Vec::with_capacity(draws), Vec::with_capacity(draws));
    for _ in 0..draws {
        chain.step(&mut rng)?;
        v1.push(chain.state.sticks[0]);
        z1.push(chain.state.atoms[0][0]);
        trace.push(chain.state.covariance.trace_precision());
    }
    let mut direct_rng = stream_rng(derive_seed(seed, 0x9121), 0);
    let mut direct = Vec::with_capacity(draws);
    for _ in 0..draws {
        direct.push(sample_prior_density(prior, h, &mut direct_rng)?.covariance.covariance.trace_precision());
    }
    let alpha = prior.total_mass;
    let stick = ks_statistic(&v1, |v| 1.0 - (1.0 - v.clamp(0.0, 1.0)).powf(alpha));
    let base = Normal::new(prior.base_mean[0], prior.base_cov.entry(0, 0).sqrt()).expect("validated base");
    let atom = ks_statistic(&z1, |z| base.cdf(z));
    let tr = ks_two_sample(&trace, &direct);
    let first_stick = KsCheck {
        statistic: stick,
        p_value: ks_p_value(stick, draws),
    };
    let first_atom = KsCheck {
        statistic: atom,
        p_value: ks_p_value(atom, draws),
    };
    let precision_trace = KsCheck {
        statistic: tr,
        p_value: ks_two_sample_p_value(tr, draws, draws),
    };
    Ok(PriorReproductionReport {
        draws,
        passed: first_stick.passed() && first_atom.passed() && precision_trace.passed(),
        first_stick,
        first_atom,
        precision_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CovarianceSpec;
    use crate::prior_model::CovariancePrior;

    #[test]
    fn reproduces_standard_prior() {
        let r = prior_reproduction_check(&PriorSpec::standard(2), 10, 5_000, 1).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn reproduces_squared_gamma_prior() {
        let prior = PriorSpec::new(
            vec![1.0],
            CovarianceSpec::isotropic(1, 4.0).unwrap(),
            2.0,
            CovariancePrior::DiagonalSquaredInverseGamma { shape: 2.0, rate: 1.0 },
        )
        .unwrap();
        let r = prior_reproduction_check(&prior, 8, 5_000, 2).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
