use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use super::{Smoothness, SmoothedDerivatives, TailParams, TestDensity};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::index_calculus::MultiIndex;
use crate::linalg::{norm, CovarianceSpec};
use crate::measure_discretization::MixingMeasure;
use crate::scalar::strict_floor;

/// Highest derivative order served by the Hermite recursion.
const MAX_ORDER: u32 = 32;

/// Location mixture `p_{F,Σ}(x) = Σ_h π_h φ_Σ(x − z_h)`.
#[derive(Clone, Debug)]
pub struct GaussianMixtureDensity {
    mixing: MixingMeasure,
    cov: CovarianceSpec,
    working_beta: f64,
    id: String,
}

/// Build a Gaussian location mixture. The covariance is validated by
/// [`CovarianceSpec`]; non-SPD input never reaches this point.
pub fn make_gaussian_mixture(mixing: MixingMeasure, cov: CovarianceSpec) -> Result<GaussianMixtureDensity> {
    if mixing.dim() != cov.dim() {
        return Err(Error::invalid(format!(
            "mixing measure has dimension {} but covariance {}",
            mixing.dim(),
            cov.dim()
        )));
    }
    let id = format!("gaussian-mixture-d{}-k{}", cov.dim(), mixing.len());
    Ok(GaussianMixtureDensity {
        mixing,
        cov,
        working_beta: 2.0,
        id,
    })
}

impl GaussianMixtureDensity {
    /// Standard normal in `d` dimensions.
    pub fn standard(d: usize) -> Self {
        let mut g = make_gaussian_mixture(
            MixingMeasure::dirac(vec![0.0; d]),
            CovarianceSpec::isotropic(d, 1.0).unwrap(),
        )
        .unwrap();
        g.id = format!("std-normal-d{d}");
        g
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Smoothness level used for envelopes (the density itself is super-smooth).
    pub fn with_working_beta(mut self, beta: f64) -> Self {
        self.working_beta = beta;
        self
    }

    pub fn mixing(&self) -> &MixingMeasure {
        &self.mixing
    }

    pub fn covariance(&self) -> &CovarianceSpec {
        &self.cov
    }

    /// Same mixing measure with covariance `Σ + diag(s_j²)`, which is the
    /// exact Gaussian smoothing.
    pub fn convolved(&self, scales: &[f64]) -> Result<GaussianMixtureDensity> {
        let extra: Vec<f64> = scales.iter().map(|s| s * s).collect();
        Ok(GaussianMixtureDensity {
            mixing: self.mixing.clone(),
            cov: self.cov.add_diagonal(&extra)?,
            working_beta: self.working_beta,
            id: format!("{}-smoothed", self.id),
        })
    }

    fn component_offsets(&self, x: &[f64], z: &[f64], u: &mut [f64]) {
        for i in 0..u.len() {
            u[i] = x[i] - z[i];
        }
    }

    fn combination(&self, terms: &[(MultiIndex, f64)], x: &[f64]) -> f64 {
        let d = self.dim();
        let max_order = terms.iter().map(|(k, _)| k.order()).max().unwrap_or(0);
        let mut u = vec![0.0; d];
        let mut acc = 0.0;
        for (z, w) in self.mixing.iter() {
            self.component_offsets(x, z, &mut u);
            let phi = self.cov.normal_density(&u);
            if phi == 0.0 {
                continue;
            }
            let pw = self.cov.precision_times(&u);
            let table = hermite_table(self.cov.precision(), &pw, max_order);
            let mut s = 0.0;
            for (k, c) in terms {
                let sign = if k.order() % 2 == 1 { -1.0 } else { 1.0 };
                s += c * sign * table[flat_index(k.entries(), max_order)];
            }
            acc += w * s * phi;
        }
        acc
    }
}

fn flat_index(j: &[u32], max_order: u32) -> usize {
    let radix = max_order as usize + 1;
    j.iter().rev().fold(0usize, |acc, &v| acc * radix + v as usize)
}

/// Multivariate Hermite polynomials `He_j(w)` for precision `P` (row-major)
/// and every `j` with `j. ≤ max_order`, stored densely with radix
/// `max_order + 1` (first axis fastest). They satisfy
/// `D^j φ_Σ(u) = (−1)^{j.} He_j(P u) φ_Σ(u)`.
pub fn hermite_table(precision: &[f64], w: &[f64], max_order: u32) -> Vec<f64> {
    let d = w.len();
    let radix = max_order as usize + 1;
    let mut table = vec![0.0; radix.pow(d as u32)];
    table[0] = 1.0;
    for j in crate::index_calculus::enumerate_multiindices(d, max_order).into_iter().skip(1) {
        let e = j.entries();
        let i = e.iter().position(|&v| v > 0).unwrap();
        let mut prev = e.to_vec();
        prev[i] -= 1;
        let mut val = w[i] * table[flat_index(&prev, max_order)];
        for l in 0..d {
            if prev[l] > 0 {
                let mut pp = prev.clone();
                pp[l] -= 1;
                val -= precision[i * d + l] * prev[l] as f64 * table[flat_index(&pp, max_order)];
            }
        }
        table[flat_index(e, max_order)] = val;
    }
    table
}

/// `E(r + ‖Z‖)^j` bound with `Z ~ N(0, P)`, using
/// `E‖Z‖^m ≤ λ^{m/2} 2^{m/2} Γ((d+m)/2)/Γ(d/2)` for `λ = λ_max(P)`.
fn hermite_growth(j: u32, r: f64, lambda_max: f64, d: usize) -> f64 {
    let df = d as f64;
    let mut acc = 0.0;
    let mut binom = 1.0;
    for m in 0..=j {
        if m > 0 {
            binom *= (j - m + 1) as f64 / m as f64;
        }
        let mf = m as f64;
        let moment = (0.5 * mf * (2.0 * lambda_max).ln() + ln_gamma(0.5 * (df + mf)) - ln_gamma(0.5 * df)).exp();
        acc += binom * r.powi((j - m) as i32) * moment;
    }
    acc
}

impl Density for GaussianMixtureDensity {
    fn dim(&self) -> usize {
        self.cov.dim()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let mut u = vec![0.0; self.dim()];
        self.mixing
            .iter()
            .map(|(z, w)| {
                self.component_offsets(x, z, &mut u);
                w * self.cov.normal_density(&u)
            })
            .sum()
    }
}

impl TestDensity for GaussianMixtureDensity {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::isotropic(f64::INFINITY, self.dim())
    }

    fn working_beta(&self) -> f64 {
        self.working_beta
    }

    fn max_derivative_order(&self) -> u32 {
        MAX_ORDER
    }

    fn derivative(&self, k: &MultiIndex, x: &[f64]) -> Result<f64> {
        if k.order() > MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                requested: k.order(),
                available: MAX_ORDER,
            });
        }
        Ok(self.combination(&[(k.clone(), 1.0)], x))
    }

    fn derivative_combination(&self, terms: &[(MultiIndex, f64)], x: &[f64]) -> Result<f64> {
        if let Some((k, _)) = terms.iter().find(|(k, _)| k.order() > MAX_ORDER) {
            return Err(Error::UnsupportedOrder {
                requested: k.order(),
                available: MAX_ORDER,
            });
        }
        Ok(self.combination(terms, x))
    }

    /// Mean-value bound on the top-order derivatives over a unit ball:
    /// `√d Σ_h π_h B_{j}(λ_max(P)(‖x−z_h‖+1)) φ̄ exp(−λ_min(P) (‖x−z_h‖−1)_+² / 2)`
    /// with `j = ⌊β⌋ + 1` and `φ̄` the peak of `φ_Σ`. Valid with `τ0 = 0` for
    /// shifts of norm at most one.
    fn envelope(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let j = strict_floor(self.working_beta).max(0) as u32 + 1;
        let pe = self.cov.precision_eigenvalues();
        let (lmin, lmax) = (pe[0], pe[d - 1]);
        let peak = self.cov.normal_peak();
        let mut u = vec![0.0; d];
        let total: f64 = self
            .mixing
            .iter()
            .map(|(z, w)| {
                self.component_offsets(x, z, &mut u);
                let r = norm(&u);
                let far = (r - 1.0).max(0.0);
                w * hermite_growth(j, lmax * (r + 1.0), lmax, d) * (-0.5 * lmin * far * far).exp()
            })
            .sum();
        (d as f64).sqrt() * peak * total
    }

    fn tail(&self) -> TailParams {
        let r = self.mixing.max_atom_norm();
        let lmin = self.cov.precision_eigenvalues()[0];
        TailParams {
            a: (2.0 * r).max(1.0),
            b: lmin / 8.0,
            c: self.cov.normal_peak(),
            tau: 2.0,
        }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.mixing.len() - 1;
        for (h, w) in self.mixing.weights().iter().enumerate() {
            acc += w;
            if u < acc {
                idx = h;
                break;
            }
        }
        let z: Vec<f64> = (0..self.dim()).map(|_| StandardNormal.sample(rng)).collect();
        let shift = self.cov.transform_standard(&z);
        self.mixing.atoms()[idx]
            .iter()
            .zip(shift)
            .map(|(a, s)| a + s)
            .collect()
    }

    fn working_box(&self) -> Vec<(f64, f64)> {
        let d = self.dim();
        let peak = self.cov.normal_peak();
        let lmax = self.cov.eigenvalues()[d - 1];
        let reach = (2.0 * (peak / 1e-12).ln().max(1.0) * lmax).sqrt();
        (0..d)
            .map(|a| {
                let lo = self.mixing.atoms().iter().map(|z| z[a]).fold(f64::INFINITY, f64::min);
                let hi = self.mixing.atoms().iter().map(|z| z[a]).fold(f64::NEG_INFINITY, f64::max);
                (lo - reach, hi + reach)
            })
            .collect()
    }

    fn smoothing(&self, scales: &[f64]) -> Option<Arc<dyn SmoothedDerivatives>> {
        self.convolved(scales)
            .ok()
            .map(|g| Arc::new(g) as Arc<dyn SmoothedDerivatives>)
    }

    /// Exact for a single component: `P(χ²_d > 2 log(φ̄/t))`.
    fn mass_below_level(&self, t: f64) -> Option<f64> {
        if self.mixing.len() != 1 {
            return None;
        }
        let peak = self.cov.normal_peak();
        if t > peak {
            return Some(1.0);
        }
        if t <= 0.0 {
            return Some(0.0);
        }
        let q = 2.0 * (peak / t).ln();
        let chi = ChiSquared::new(self.dim() as f64).ok()?;
        Some(chi.sf(q))
    }

    /// Exact for one component; for several it is the upper bound
    /// `max‖z_h‖ + (2 λ_max(Σ) log(φ̄/t))^{1/2}`.
    fn superlevel_radius(&self, t: f64) -> Option<f64> {
        let peak = self.cov.normal_peak();
        if t > peak {
            return Some(0.0);
        }
        let lmax = self.cov.eigenvalues()[self.dim() - 1];
        Some(self.mixing.max_atom_norm() + (2.0 * lmax * (peak / t).ln()).sqrt())
    }
}

impl SmoothedDerivatives for GaussianMixtureDensity {
    fn eval(&self, k: &MultiIndex, x: &[f64]) -> f64 {
        self.combination(&[(k.clone(), 1.0)], x)
    }

    fn eval_combination(&self, terms: &[(MultiIndex, f64)], x: &[f64]) -> f64 {
        self.combination(terms, x)
    }
}
