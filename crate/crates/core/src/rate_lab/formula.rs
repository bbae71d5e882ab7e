use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which prior on the mixing measure the rate refers to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MixingPriorKind {
    DirichletProcess,
    /// Finite mixture prior whose number of components has tail exponent `τ₁`.
    FiniteMixture { tau1: f64 },
}

/// Theoretical contraction rate `ε_n = n^{−β/(2β+d*)} (log n)^t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFormula {
    pub beta: f64,
    pub dim: usize,
    pub kappa: f64,
    pub tau: f64,
    /// Anisotropy weights with `Σ α_j = d`; absent for isotropic smoothness.
    pub alpha: Option<Vec<f64>>,
    pub prior: MixingPriorKind,
    /// `max(d, κ)`, or `max(d, κ α_max)` with anisotropy.
    pub d_star: f64,
    /// `β/(2β + d*)`.
    pub exponent: f64,
    /// `{d*(1 + 1/τ + 1/β) + 1}/(2 + d*/β)`.
    pub t0: f64,
    /// `max{0, (1 − τ₁)/2}` for finite mixtures, otherwise 0.
    pub t_offset: f64,
    /// Per-axis smoothness `β_j = β/α_j` when anisotropic.
    pub axis_smoothness: Option<Vec<f64>>,
}

impl RateFormula {
    /// Smallest admissible log power for `ε_n`; the rate holds for every
    /// `t` strictly above it.
    pub fn t_threshold(&self) -> f64 {
        self.t0 + self.t_offset
    }

    /// `ε̃_n = n^{−β/(2β+d*)} (log n)^{t₀}`, the prior thickness rate.
    pub fn eps_tilde(&self, n: f64) -> f64 {
        n.powf(-self.exponent) * n.ln().powf(self.t0)
    }

    /// `ε_n = n^{−β/(2β+d*)} (log n)^t`.
    pub fn eps(&self, n: f64, t: f64) -> f64 {
        n.powf(-self.exponent) * n.ln().powf(t)
    }

    /// `n^{−β/(2β+d*)}` without logarithmic factors.
    pub fn polynomial_rate(&self, n: f64) -> f64 {
        n.powf(-self.exponent)
    }
}

/// Derived rate quantities for smoothness `β`, dimension `d`, covariance
/// prior tail index `κ` and density tail exponent `τ`.
pub fn theoretical_rate(
    beta: f64,
    dim: usize,
    kappa: f64,
    tau: f64,
    alpha: Option<&[f64]>,
    prior: MixingPriorKind,
) -> Result<RateFormula> {
    if !(beta > 0.0 && beta.is_finite()) || !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("need beta, tau > 0; got {beta}, {tau}")));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if kappa != 1.0 && kappa != 2.0 {
        return Err(Error::invalid(format!("kappa must be 1 or 2, got {kappa}")));
    }
    let d = dim as f64;
    let alpha_max = match alpha {
        None => 1.0,
        Some(a) => {
            if a.len() != dim || a.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::invalid("anisotropy needs d positive weights"));
            }
            let total: f64 = a.iter().sum();
            if (total - d).abs() > 1e-9 * d {
                return Err(Error::invalid(format!("anisotropy weights sum to {total}, expected {dim}")));
            }
            a.iter().copied().fold(0.0, f64::max)
        }
    };
    let t_offset = match prior {
        MixingPriorKind::DirichletProcess => 0.0,
        MixingPriorKind::FiniteMixture { tau1 } => {
            if !(tau1 > 0.0) {
                return Err(Error::invalid("tau1 must be positive"));
            }
            (0.5 * (1.0 - tau1)).max(0.0)
        }
    };
    let d_star = d.max(kappa * alpha_max);
    Ok(RateFormula {
        beta,
        dim,
        kappa,
        tau,
        alpha: alpha.map(<[f64]>::to_vec),
        prior,
        d_star,
        exponent: beta / (2.0 * beta + d_star),
        t0: (d_star * (1.0 + 1.0 / tau + 1.0 / beta) + 1.0) / (2.0 + d_star / beta),
        t_offset,
        axis_smoothness: alpha.map(|a| a.iter().map(|aj| beta / aj).collect()),
    })
}

/// Harmonic mean `β = d / Σ 1/β_j` and weights `α_j = β/β_j` from per-axis
/// smoothness.
pub fn anisotropy_from_axis_smoothness(axis: &[f64]) -> Result<(f64, Vec<f64>)> {
    if axis.is_empty() || axis.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::invalid("per-axis smoothness must be positive"));
    }
    let beta = axis.len() as f64 / axis.iter().map(|b| 1.0 / b).sum::<f64>();
    Ok((beta, axis.iter().map(|b| beta / b).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DP: MixingPriorKind = MixingPriorKind::DirichletProcess;

    #[test]
    fn isotropic_example() {
        let r = theoretical_rate(2.0, 1, 2.0, 2.0, None, DP).unwrap();
        assert_eq!(r.d_star, 2.0);
        assert!((r.exponent - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.t0 - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.t_threshold(), r.t0);
    }

    #[test]
    fn unit_anisotropy_is_isotropic() {
        let a = theoretical_rate(1.5, 3, 2.0, 1.0, Some(&[1.0, 1.0, 1.0]), DP).unwrap();
        let b = theoretical_rate(1.5, 3, 2.0, 1.0, None, DP).unwrap();
        assert_eq!((a.d_star, a.exponent, a.t0), (b.d_star, b.exponent, b.t0));
    }

    #[test]
    fn anisotropy_penalised_only_beyond_d() {
        let w = [0.5, 0.5, 2.0];
        assert_eq!(theoretical_rate(2.0, 3, 1.0, 2.0, Some(&w), DP).unwrap().d_star, 3.0);
        assert_eq!(theoretical_rate(2.0, 3, 2.0, 2.0, Some(&w), DP).unwrap().d_star, 4.0);
        // α_max → 3
        let w = [1e-9, 1e-9, 3.0 - 2e-9];
        assert_eq!(theoretical_rate(2.0, 3, 1.0, 2.0, Some(&w), DP).unwrap().d_star, 3.0);
        assert!((theoretical_rate(2.0, 3, 2.0, 2.0, Some(&w), DP).unwrap().d_star - 6.0).abs() < 1e-8);
    }

    #[test]
    fn rejections() {
        assert!(theoretical_rate(2.0, 2, 2.0, 2.0, Some(&[1.0, 1.5]), DP).is_err());
        assert!(theoretical_rate(0.0, 1, 2.0, 2.0, None, DP).is_err());
        assert!(theoretical_rate(2.0, 1, 3.0, 2.0, None, DP).is_err());
    }

    #[test]
    fn finite_mixture_offset() {
        let r = theoretical_rate(2.0, 1, 2.0, 2.0, None, MixingPriorKind::FiniteMixture { tau1: 0.4 }).unwrap();
        assert!((r.t_offset - 0.3).abs() < 1e-15);
        let r = theoretical_rate(2.0, 1, 2.0, 2.0, None, MixingPriorKind::FiniteMixture { tau1: 2.0 }).unwrap();
        assert_eq!(r.t_offset, 0.0);
    }

    #[test]
    fn harmonic_mean_round_trip() {
        let axis = [1.0, 2.0, 4.0];
        let (beta, alpha) = anisotropy_from_axis_smoothness(&axis).unwrap();
        assert!((beta - 3.0 / 1.75).abs() < 1e-14);
        assert!((alpha.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        let r = theoretical_rate(beta, 3, 1.0, 2.0, Some(&alpha), DP).unwrap();
        for (b, want) in r.axis_smoothness.unwrap().iter().zip(axis) {
            assert!((b - want).abs() < 1e-12);
        }
    }

    #[test]
    fn eps_sequences() {
        let r = theoretical_rate(2.0, 1, 2.0, 2.0, None, DP).unwrap();
        let n: f64 = 1000.0;
        assert!((r.eps_tilde(n) - n.powf(-1.0 / 3.0) * n.ln().powf(5.0 / 3.0)).abs() < 1e-12);
        assert!(r.eps(n, 2.0) > r.eps_tilde(n));
    }
}
