use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Gamma};

use super::spec::{sieve_membership, SieveSpec, SieveViolation};
use crate::error::{Error, Result};
use crate::measure_discretization::MixingMeasure;
use crate::prior_model::{
    sample_covariance, sample_precision_eigenvalues, sample_stick_breaking, stick_tail_probability, CovariancePrior,
    PriorSpec,
};
use crate::rng::{derive_seed, stream_rng};
use crate::special::normal_interval_mass;

pub const MIN_COMPLEMENT_DRAWS: usize = 10_000;
/// Extra covariance-only draws per joint draw when an eigenvalue term has no
/// closed form.
const AUXILIARY_FACTOR: usize = 10;

/// Union-bound terms for the prior mass outside the sieve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComplementTerms {
    /// `H (1 − ᾱ([−a, a]^d))`; a union bound over axes when the base
    /// covariance is not diagonal.
    pub base: f64,
    /// `P(W < log 1/ε)` with `W ∼ Gamma(H, |α|)`.
    pub stick_exact: f64,
    /// `(e|α| log(1/ε)/H)^H`.
    pub stick_stirling: f64,
    /// `P{eig_d(Σ^{-1}) > σ0^{-2}}`.
    pub large_eigenvalue: f64,
    /// `P{eig_1(Σ^{-1}) ≤ σ0^{-2}(1 + ε²/d)^{-M}}`.
    pub small_eigenvalue: f64,
    /// The two eigenvalue terms were estimated by Monte Carlo.
    pub eigen_terms_estimated: bool,
}

impl ComplementTerms {
    /// Sum of the terms with the exact stick tail.
    pub fn bound(&self) -> f64 {
        self.base + self.stick_exact + self.large_eigenvalue + self.small_eigenvalue
    }
}

/// Fraction of draws violating each clause.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClauseRates {
    pub atoms: f64,
    pub tail: f64,
    pub eigen_low: f64,
    pub eigen_high: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplementReport {
    pub spec: SieveSpec,
    pub draws: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub terms: ComplementTerms,
    pub bound: f64,
    pub clauses: ClauseRates,
}

impl ComplementReport {
    /// `estimate ≤ bound + k · stderr`.
    pub fn within_bound(&self, k: f64) -> bool {
        self.estimate <= self.bound + k * self.stderr
    }
}

fn base_term(spec: &SieveSpec, prior: &PriorSpec) -> f64 {
    let d = spec.dim;
    let cov = &prior.base_cov;
    let axis_mass = |j: usize| {
        let s = cov.entry(j, j).sqrt();
        let mu = prior.base_mean[j];
        normal_interval_mass((-spec.a - mu) / s, (spec.a - mu) / s)
    };
    let outside = if cov.is_diagonal() {
        1.0 - (0..d).map(axis_mass).product::<f64>()
    } else {
        (0..d).map(|j| 1.0 - axis_mass(j)).sum::<f64>().min(1.0)
    };
    spec.h as f64 * outside
}

/// Distribution function of one diagonal precision entry, when available.
fn precision_entry_cdf(prior: &CovariancePrior, d: usize) -> Option<Box<dyn Fn(f64) -> f64>> {
    match prior {
        CovariancePrior::DiagonalInverseGamma { shape, rate } => {
            let g = Gamma::new(*shape, *rate).ok()?;
            Some(Box::new(move |x| g.cdf(x)))
        }
        CovariancePrior::DiagonalSquaredInverseGamma { shape, rate } => {
            let g = Gamma::new(*shape, *rate).ok()?;
            Some(Box::new(move |x: f64| g.cdf(x.max(0.0).sqrt())))
        }
        CovariancePrior::InverseWishart { nu, psi } if d == 1 => {
            // Σ^{-1} = χ²_ν / ψ
            let chi = ChiSquared::new(*nu).ok()?;
            let psi = psi.entry(0, 0);
            Some(Box::new(move |x| chi.cdf(x * psi)))
        }
        _ => None,
    }
}

fn eigen_terms(spec: &SieveSpec, prior: &PriorSpec, aux_draws: usize, seed: u64) -> (f64, f64, bool) {
    let d = spec.dim;
    let (lo, hi) = spec.eigen_window();
    let (x_big, x_small) = (1.0 / lo, 1.0 / hi);
    if let Some(cdf) = precision_entry_cdf(&prior.covariance, d) {
        let big = 1.0 - cdf(x_big).powi(d as i32);
        let small = 1.0 - (1.0 - cdf(x_small)).powi(d as i32);
        return (big, small, false);
    }
    let aux_seed = derive_seed(seed, 0xE16E);
    let (big, small) = (0..aux_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(aux_seed, i as u64);
            let e = sample_precision_eigenvalues(&prior.covariance, d, &mut rng);
            ((e[d - 1] > x_big) as usize, (e[0] <= x_small) as usize)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    (big as f64 / aux_draws as f64, small as f64 / aux_draws as f64, true)
}

/// Monte Carlo estimate of the prior mass outside the sieve against the sum
/// of the four union-bound terms.
pub fn complement_mass(spec: &SieveSpec, prior: &PriorSpec, draws: usize, seed: u64) -> Result<ComplementReport> {
    spec.validate()?;
    prior.validate()?;
    if prior.dim() != spec.dim {
        return Err(Error::invalid("prior and sieve dimensions differ"));
    }
    if draws < MIN_COMPLEMENT_DRAWS {
        return Err(Error::Precondition(format!(
            "need at least {MIN_COMPLEMENT_DRAWS} draws, got {draws}"
        )));
    }
    let flags: Vec<[bool; 5]> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let sticks = sample_stick_breaking(prior, spec.h, &mut rng)?;
            let cov = sample_covariance(&prior.covariance, spec.dim, &mut rng)?.covariance;
            // stick order with the remainder on an extra atom
            let mut atoms = sticks.atoms.clone();
            atoms.push(vec![0.0; spec.dim]);
            let mut weights = sticks.weights.clone();
            weights.push(sticks.remainder);
            let f = MixingMeasure::normalized(atoms, weights)?;
            let r = sieve_membership(&f, &cov, spec)?;
            let mut out = [!r.member, false, false, false, false];
            for v in &r.violations {
                let k = match v {
                    SieveViolation::AtomOutside { .. } => 1,
                    SieveViolation::TailMass { .. } => 2,
                    SieveViolation::EigenvalueBelow { .. } => 3,
                    SieveViolation::EigenvalueAbove { .. } => 4,
                };
                out[k] = true;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let rate = |k: usize| flags.iter().filter(|f| f[k]).count() as f64 / draws as f64;
    let estimate = rate(0);
    let tail = stick_tail_probability(spec.h, prior.total_mass, spec.eps)?;
    let (large, small, estimated) = eigen_terms(spec, prior, AUXILIARY_FACTOR * draws, seed);
    let terms = ComplementTerms {
        base: base_term(spec, prior),
        stick_exact: tail.exact,
        stick_stirling: tail.stirling_bound,
        large_eigenvalue: large,
        small_eigenvalue: small,
        eigen_terms_estimated: estimated,
    };
    Ok(ComplementReport {
        spec: *spec,
        draws,
        estimate,
        stderr: (estimate * (1.0 - estimate) / draws as f64).sqrt(),
        bound: terms.bound(),
        terms,
        clauses: ClauseRates {
            atoms: rate(1),
            tail: rate(2),
            eigen_low: rate(3),
            eigen_high: rate(4),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stick_term_isolated() {
        // huge cube and eigenvalue window: only the tail clause can fail
        let prior = PriorSpec::standard(1);
        let spec = SieveSpec::new(1, 0.05, 50.0, 1e-4, 5, 200_000).unwrap();
        let r = complement_mass(&spec, &prior, 20_000, 1).unwrap();
        assert!(r.terms.base < 1e-12 && r.terms.large_eigenvalue < 1e-12 && r.terms.small_eigenvalue < 1e-12, "{:?}", r.terms);
        let p = r.terms.stick_exact;
        let se = (p * (1.0 - p) / r.draws as f64).sqrt();
        assert!((r.estimate - p).abs() < 3.0 * se, "{} vs {p}", r.estimate);
    }

    #[test]
    fn tiny_cube_excludes_everything() {
        let spec = SieveSpec::new(1, 0.1, 1e-9, 0.5, 3, 10).unwrap();
        let r = complement_mass(&spec, &PriorSpec::standard(1), 10_000, 2).unwrap();
        assert_eq!(r.estimate, 1.0);
    }

    #[test]
    fn estimate_below_bound_in_two_dimensions() {
        let spec = SieveSpec::new(2, 0.2, 2.0, 0.3, 4, 60).unwrap();
        let r = complement_mass(&spec, &PriorSpec::standard(2), 10_000, 3).unwrap();
        assert!(r.terms.eigen_terms_estimated);
        assert!(r.within_bound(3.0), "{r:?}");
    }
}
